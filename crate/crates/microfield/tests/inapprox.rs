use approx::assert_relative_eq;
use microfield::inapprox::{
    build_inapprox_2d, build_inapprox_3d, build_inapprox_nonlinear, inapprox_member, member_2d, member_3d,
    random_rotation, sample_member, validate_inapprox,
};
use microfield::kernel::{Dense, OgdenParams};
use microfield::laminate::hull_expand_3d;
use microfield::wells::{in_well, well_distance, WellSet};
use microfield::{Mat3, Tol, TracelessMat2, TracelessMat3, Vec2, Vec3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn distance_to_planar_well() {
    let a = TracelessMat2::from_parts(Vec2::new(0.6, 0.0), 0.0);
    let d = well_distance(&Dense::Two(a.to_matrix()), &WellSet::Linear2dK0 { m: 2.0 }).unwrap();
    assert_relative_eq!(d, 0.15, epsilon = 1e-14);
    assert!(well_distance(&Dense::Three(Mat3::zeros()), &WellSet::Linear2dK0 { m: 2.0 }).is_err());
}

#[test]
fn planar_radii() {
    let s = build_inapprox_2d(0.5, 2.0, 6).unwrap();
    let frozen = [0.625, 0.6875, 0.71875, 0.734375, 0.7421875, 0.74609375, 0.748046875];
    for (r, f) in s.r.iter().zip(frozen) {
        assert_relative_eq!(*r, f, epsilon = 1e-15);
    }
    assert!(s.r.windows(2).all(|w| w[0] < w[1] && w[1] < 0.75));
    assert!(build_inapprox_2d(0.8, 2.0, 6).is_err());
}

#[test]
fn planar_membership() {
    let s = build_inapprox_2d(0.5, 2.0, 6).unwrap();
    assert!(member_2d(&TracelessMat2::from_parts(Vec2::new(0.5, 0.0), 0.0), &s, 1).inside);
    assert!(!member_2d(&TracelessMat2::from_parts(Vec2::new(0.9, 0.0), 0.0), &s, 1).inside);
}

#[test]
fn spatial_radii_and_membership() {
    let s = build_inapprox_3d(-0.45, 0.9, 2.0, 6).unwrap();
    assert!(s.r[1] > 0.45 && s.r[1] < 0.5);
    assert!(2.0 * s.r[1] > 0.9 && 2.0 * s.r[1] < 1.0);
    assert!(s.r[1..].windows(2).all(|w| w[0] < w[1] && w[1] < 0.5));
    let x = TracelessMat3::project(&Mat3::from_diagonal(&Vec3::new(-0.45, -0.45, 0.9)));
    let i = (1..s.depth).find(|&i| s.r[i - 1] < 0.45 && 0.45 < s.r[i]).unwrap();
    assert!(member_3d(&x, &s, i).inside);
}

#[test]
fn nematic_first_parameter() {
    let p = OgdenParams::nematic(8.0, vec![1.0], vec![2.0], 1.0).unwrap();
    let s = build_inapprox_nonlinear(&p, 0.72, 1.9, 6).unwrap();
    let eta1 = s.eta[1];
    assert!(eta1 > 0.5f64.sqrt() && eta1 < 0.72);
    let inv = 1.0 / (eta1 * eta1);
    assert!(inv > 1.9 && inv < 2.0);
}

#[test]
fn sequences_validate() {
    let s = build_inapprox_2d(0.5, 2.0, 6).unwrap();
    let r = validate_inapprox(&s, 1000, 1).unwrap();
    assert!(r.sampled_sup <= r.declared_bound);
    assert!(r.counterexample.condition3_fails && r.counterexample.weak_condition_holds);
    let s = build_inapprox_3d(-0.45, 0.9, 2.0, 6).unwrap();
    let r = validate_inapprox(&s, 1000, 2).unwrap();
    assert!(r.inclusion_min_margin > 0.0);
}

#[test]
fn second_order_hull_stays_in_the_envelope() {
    let p = OgdenParams::nematic(8.0, vec![1.0], vec![2.0], 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let wells: Vec<Mat3> = (0..10)
        .map(|_| random_rotation(&mut rng) * Mat3::from_diagonal(&Vec3::from(p.e)) * random_rotation(&mut rng))
        .collect();
    let hull = hull_expand_3d(&wells, 2, 200, 5, Some(p.e));
    assert!(hull.len() > 200);
    let set = WellSet::HullNonlinear { e: p.e };
    let tol = Tol::default();
    for f in &hull {
        assert!(in_well(&Dense::Three(*f), &set, &tol));
        assert!((f.determinant() - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_members_are_members(seed in any::<u64>(), i in 1usize..5) {
        let s = build_inapprox_2d(0.5, 2.0, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(x) = sample_member(&s, i, &mut rng) {
            prop_assert!(inapprox_member(&x, &s, i).unwrap().inside);
        }
        let s = build_inapprox_3d(-0.45, 0.9, 2.0, 6).unwrap();
        if let Some(x) = sample_member(&s, i, &mut rng) {
            prop_assert!(inapprox_member(&x, &s, i).unwrap().inside);
        }
    }

    #[test]
    fn nematic_wells_have_zero_distance(seed in any::<u64>()) {
        let p = OgdenParams::nematic(8.0, vec![1.0], vec![2.0], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_rotation(&mut rng) * Mat3::from_diagonal(&Vec3::from(p.e)) * random_rotation(&mut rng);
        let d = well_distance(&Dense::Three(f), &WellSet::NonlinearK { e: p.e }).unwrap();
        prop_assert!(d < 1e-12);
        let h = well_distance(&Dense::Three(f * 1.01), &WellSet::HullNonlinear { e: p.e }).unwrap();
        prop_assert!(h > 0.0);
    }
}
