use approx::assert_relative_eq;
use microfield::construct::pompe::{jordan_frame, tile_amplitude, tile_cell, tile_frame};
use microfield::construct::{
    affine_datum, construct_open, convex_integrate, embed, explicit_disk_solution, general_domain_solution,
    pompe_construct, segment_distance, stage_budgets, ConstructError, PackParams, RefineOptions, Target2d,
};
use microfield::geometry::{field_eval, Domain2};
use microfield::inapprox::build_inapprox_2d;
use microfield::kernel::{eig_sym, energy_v};
use microfield::wells::matrix_e;
use microfield::{Mat2, TracelessMat2, Vec2, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn disk_field_closed_form_value() {
    let f = explicit_disk_solution(1.0, 1.0).unwrap();
    let v = field_eval(&f, &Vec2::new(0.5, 0.0)).unwrap();
    let want = 0.75 * 0.25f64.ln() * 0.5;
    assert_relative_eq!(v.value.x, 0.0, epsilon = 1e-15);
    assert_relative_eq!(v.value.y, want, epsilon = 1e-14);
    assert_relative_eq!(v.value.y, -0.519860, epsilon = 1e-6);
    assert!(matches!(explicit_disk_solution(0.0, 1.0), Err(ConstructError::NonPositiveRadius(_))));
}

#[test]
fn disk_field_strain_sits_on_the_well() {
    let f = explicit_disk_solution(1.0, 1.0).unwrap();
    for rho in [0.1, 0.37, 0.8] {
        let v = field_eval(&f, &Vec2::new(rho, 0.0)).unwrap();
        let (_, g) = embed(v.value, v.grad, &Vec3::new(rho, 0.0, 0.0));
        let e = 0.5 * (g + g.transpose());
        let ev = eig_sym(&e).unwrap().values;
        for (a, b) in ev.iter().zip([-0.5, -0.5, 1.0]) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }
}

#[test]
fn packed_square_is_mostly_stress_free() {
    let pack = PackParams { target: 0.99, min_scale: 1e-4, seed: 0 };
    let f = general_domain_solution(&Domain2::unit_square(), &pack).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 4000;
    let mut good = 0;
    for _ in 0..n {
        let x = Vec2::new(rng.gen(), rng.gen());
        let v = field_eval(&f, &x).unwrap();
        if v.residual {
            assert_eq!(v.value, Vec2::zeros());
            continue;
        }
        let (_, g) = embed(v.value, v.grad, &Vec3::new(x.x, x.y, 0.0));
        if energy_v(&(0.5 * (g + g.transpose()))).unwrap().0 < 1e-10 {
            good += 1;
        }
    }
    // binomial slack for 4000 draws at p = 0.99
    assert!(good as f64 / n as f64 >= 0.99 - 0.006, "good {good}");
}

#[test]
fn flatness_at_half() {
    let a = TracelessMat2::project(&(matrix_e() * 0.5));
    let b = TracelessMat2::project(&(matrix_e() * -0.5));
    let out = pompe_construct(&a, &b, 0.5, &Domain2::unit_square(), 0.1, &PackParams::default()).unwrap();
    assert_relative_eq!(out.report.m, 2.0 * out.report.eps_hat.powi(3), epsilon = 1e-15);
}

#[test]
fn half_e_oscillation_measure() {
    let a = TracelessMat2::project(&(matrix_e() * 0.5));
    let b = TracelessMat2::project(&(matrix_e() * -0.5));
    let pack = PackParams { target: 0.999, min_scale: 1e-6, seed: 0 };
    let out = pompe_construct(&a, &b, 0.5, &Domain2::unit_square(), 0.1, &pack).unwrap();
    let r = &out.report;
    // flat tiles hit the tile cap before the requested coverage
    assert!(r.covered_fraction >= 0.99);
    assert!(r.flagged_fraction <= 5.0 / 6.0 * r.covered_fraction + 1e-9);
    assert!(r.flagged_fraction <= 5.0 / 6.0 * 0.999 + 0.001, "flagged {}", r.flagged_fraction);
    assert!(r.max_segment_distance < 0.1 && r.sup_deviation < 0.1);
    for c in &out.field.cells {
        for (_, g) in c.derived_pieces() {
            assert!(g.trace().abs() <= 1e-12 * (1.0 + g.norm()));
        }
    }
}

#[test]
fn pompe_rejects_bad_inputs() {
    let a = TracelessMat2::project(&(matrix_e() * 0.5));
    let b = TracelessMat2::project(&(matrix_e() * -0.5));
    let dom = Domain2::unit_square();
    let pack = PackParams::default();
    assert!(matches!(pompe_construct(&a, &b, 0.0, &dom, 0.1, &pack), Err(ConstructError::DegenerateLambda(_))));
    assert!(matches!(pompe_construct(&a, &b, 0.5, &dom, 0.9, &pack), Err(ConstructError::EpsilonTooLarge { .. })));
    let c = TracelessMat2::new(-0.5, 0.0, 0.0);
    assert!(matches!(pompe_construct(&a, &c, 0.5, &dom, 0.1, &pack), Err(ConstructError::NotRankOne { .. })));
}

#[test]
fn stage_budget_sequence() {
    let b = stage_budgets(0.1, 4);
    let frozen = [0.05, 0.00625, 0.000390625, 1.220703125e-5];
    for (x, y) in b.iter().zip(frozen) {
        assert_relative_eq!(*x, y, epsilon = 1e-18);
    }
}

#[test]
fn open_refinement_decays() {
    let seq = build_inapprox_2d(0.5, 2.0, 6).unwrap();
    let datum = affine_datum(Domain2::unit_square(), TracelessMat2::new(0.5, 0.0, 0.0).to_matrix(), Vec2::zeros());
    let target = Target2d { seq, index: 1 };
    let opts = RefineOptions { samples: 5000, ..RefineOptions::default() };
    let r = construct_open(&datum, &target, 0.05, 6, &opts).unwrap();
    let last = r.metrics.last().unwrap();
    assert!(last.bad_fraction <= (5.0f64 / 6.0 + 0.02).powi(r.metrics.len() as i32 - 1));
    assert!(r.sup_ledger < 0.05);
}

#[test]
fn staged_integration_is_monotone() {
    let seq = build_inapprox_2d(0.5, 2.0, 6).unwrap();
    let datum = affine_datum(Domain2::unit_square(), TracelessMat2::new(0.5, 0.0, 0.0).to_matrix(), Vec2::zeros());
    let opts = RefineOptions { samples: 4000, ..RefineOptions::default() };
    let r = convex_integrate(&datum, &seq, 0.05, 4, 24, &opts).unwrap();
    assert!(r.stages.windows(2).all(|w| w[1].p95 <= w[0].p95));
    assert!(r.sup_ledger < 0.05);
}

#[test]
fn strain_bound_is_enforced() {
    let seq = build_inapprox_2d(0.5, 2.0, 6).unwrap();
    let g = Mat2::new(1.2, 0.0, 0.0, -1.2) / 2f64.sqrt();
    let datum = affine_datum(Domain2::unit_square(), g, Vec2::zeros());
    let err = convex_integrate(&datum, &seq, 0.05, 4, 24, &RefineOptions::default()).unwrap_err();
    assert!(matches!(err, ConstructError::PreconditionViolation(_)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jordan_frame_conjugates_e(a1 in -1.0f64..1.0, a2 in -1.0f64..1.0, r in 0.1f64..1.0, phi in 0.0f64..6.28, up in any::<bool>()) {
        let a = TracelessMat2::new(a1, a2, 0.0);
        let s = if up { 1.0 } else { -1.0 };
        let b = TracelessMat2::new(a1 - r * phi.cos(), a2 - r * phi.sin(), -s * r);
        let (_, _, l) = jordan_frame(&a, &b).unwrap();
        let d = l.try_inverse().unwrap() * matrix_e() * l;
        prop_assert!((d - (a.to_matrix() - b.to_matrix())).norm() < 1e-12);
    }

    #[test]
    fn tile_pieces_are_trace_free_and_near_the_segment(lambda in 0.1f64..0.9, eps in 0.05f64..0.3, h in 0.01f64..1.0, phi in 0.0f64..6.28) {
        let a = TracelessMat2::new(0.2, -0.1, 0.3);
        let b = TracelessMat2::new(0.2 - 0.5 * phi.cos(), -0.1 - 0.5 * phi.sin(), -0.2);
        let (_, _, l) = jordan_frame(&a, &b).unwrap();
        let m = eps.powi(3) * (1.0 / lambda).max(1.0 / (1.0 - lambda));
        let j = tile_frame(&l, m);
        let c = a.to_matrix() * (1.0 - lambda) + b.to_matrix() * lambda;
        let cell = tile_cell(1, Vec2::new(0.3, -0.2), h, &j, tile_amplitude(m, lambda), &c, &Vec2::zeros(), 1);
        for (_, g) in cell.derived_pieces() {
            prop_assert!(g.trace().abs() <= 1e-12 * (1.0 + g.norm()));
            prop_assert!(segment_distance(&g, &a.to_matrix(), &b.to_matrix()) < eps);
        }
    }
}
