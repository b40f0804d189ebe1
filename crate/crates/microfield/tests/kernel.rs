use approx::assert_relative_eq;
use microfield::kernel::{
    energy_v, energy_vqce_2d, energy_w, energy_wn, rank_one_connection, singular_values, sym_skw, u_n, Dense,
    OgdenParams, TracelessMat,
};
use microfield::{Mat2, Mat3, TracelessMat2, TracelessMat3, Vec2, Vec3};
use proptest::prelude::*;

fn traceless3(v: [f64; 9]) -> Mat3 {
    let m = Mat3::from_row_slice(&v);
    m - Mat3::identity() * (m.trace() / 3.0)
}

fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * k as f64;
            Vec3::new(r * t.cos(), r * t.sin(), z)
        })
        .collect()
}

#[test]
fn shear_singular_values_match_eigenvalues_of_f_ft() {
    let f = Mat3::identity() + Vec3::x() * Vec3::y().transpose();
    let sv = singular_values(&f).unwrap();
    let mut want: Vec<f64> = (f * f.transpose()).symmetric_eigen().eigenvalues.iter().map(|l| l.sqrt()).collect();
    want.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for i in 0..3 {
        assert_relative_eq!(sv.values[i], want[i], epsilon = 1e-12);
    }
}

#[test]
fn nematic_energy_at_identity() {
    let p = OgdenParams::nematic(8.0, vec![2.0], vec![2.0], 1.0).unwrap();
    assert_relative_eq!(p.e[0], 0.5f64.sqrt(), epsilon = 1e-15);
    assert_relative_eq!(p.e[2], 2.0, epsilon = 1e-15);
    let w = energy_w(&Mat3::identity(), &p).unwrap();
    let want: f64 = p.e.iter().map(|e| 1.0 / (e * e)).sum::<f64>() - 3.0;
    assert_relative_eq!(w, want, epsilon = 1e-12);
    assert_relative_eq!(w, 1.25, epsilon = 1e-12);
}

#[test]
fn director_minimum_is_not_below_energy_w() {
    let p = OgdenParams::nematic(8.0, vec![2.0], vec![2.0], 1.0).unwrap();
    let dirs = fibonacci_sphere(20_000);
    let f = Mat3::new(1.1, 0.2, 0.0, 0.0, 0.95, 0.1, 0.0, 0.0, 1.0 / (1.1 * 0.95));
    let w = energy_w(&f, &p).unwrap();
    let sampled = dirs.iter().map(|n| energy_wn(&f, n, &p, false).unwrap()).fold(f64::INFINITY, f64::min);
    assert!(sampled >= w - 1e-12);
    assert!(sampled - w < 1e-3, "gap {}", sampled - w);
}

#[test]
fn uniaxial_strain_energy() {
    let e = Mat3::from_diagonal(&Vec3::new(0.25, 0.25, -0.5));
    let (v, _) = energy_v(&e).unwrap();
    assert_relative_eq!(v, 9.0 / 8.0, epsilon = 1e-14);
}

#[test]
fn planar_relaxed_energy_outside_ball() {
    let e = Mat2::new(1.5, 0.0, 0.0, -1.5);
    assert_relative_eq!(e.norm(), 3.0 / 2f64.sqrt(), epsilon = 1e-15);
    assert_relative_eq!(energy_vqce_2d(&e).unwrap(), 9.0 / 8.0, epsilon = 1e-14);
    assert_eq!(energy_vqce_2d(&(e * 0.4)).unwrap(), 0.0);
}

#[test]
fn non_symmetric_strain_is_rejected() {
    assert!(energy_v(&Mat3::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)).is_err());
}

#[test]
fn planar_rank_one_pair() {
    let a = TracelessMat2::from_parts(Vec2::new(0.75, 0.0), 0.5);
    let b = TracelessMat2::from_parts(Vec2::new(-0.75, 0.0), -1.0);
    let r = rank_one_connection(&a.into(), &b.into()).unwrap();
    assert!(r.is_rank_one());
    let d = a.to_matrix() - b.to_matrix();
    assert!(d.determinant().abs() < 1e-12);
    let not = TracelessMat2::from_parts(Vec2::new(-0.75, 0.0), 0.5);
    assert!(!rank_one_connection(&a.into(), &not.into()).unwrap().is_rank_one());
}

proptest! {
    #[test]
    fn sym_and_skw_parts_match_transpose_formula(v in prop::array::uniform9(-2.0f64..2.0)) {
        let m = traceless3(v);
        let t = TracelessMat3::project(&m);
        let (Dense::Three(s), Dense::Three(k)) = sym_skw(&TracelessMat::Three(t)) else { unreachable!() };
        prop_assert!((s - 0.5 * (m + m.transpose())).amax() < 1e-12);
        prop_assert!((k - 0.5 * (m - m.transpose())).amax() < 1e-12);
        prop_assert!((t.to_matrix() - m).amax() < 1e-12);
    }

    #[test]
    fn energy_v_is_the_director_minimum(d in prop::array::uniform5(-0.6f64..0.6)) {
        let e = Mat3::new(d[0], d[2], d[3], d[2], d[1], d[4], d[3], d[4], -d[0] - d[1]);
        let (v, n) = energy_v(&e).unwrap();
        prop_assert!(v >= 0.0);
        prop_assert!(((e - u_n(&n)).norm_squared() - v).abs() < 1e-10);
        for k in fibonacci_sphere(200) {
            prop_assert!((e - u_n(&k)).norm_squared() >= v - 1e-12);
        }
    }

    #[test]
    fn singular_values_are_ordered_and_reproduce_norm(v in prop::array::uniform9(-2.0f64..2.0)) {
        let f = Mat3::from_row_slice(&v);
        if let Ok(sv) = singular_values(&f) {
            prop_assert!(sv.values[0] <= sv.values[1] && sv.values[1] <= sv.values[2]);
            let n2: f64 = sv.values.iter().map(|s| s * s).sum();
            prop_assert!((n2 - f.norm_squared()).abs() < 1e-10 * (1.0 + n2));
        }
    }
}
