use approx::assert_relative_eq;
use microfield::kernel::{eig_sym, rank_one_connection};
use microfield::laminate::{hull_expand_2d, split_2d, split_3d_first, split_3d_second, LaminateNode};
use microfield::{Mat2, Mat3, TracelessMat2, TracelessMat3, Vec2, Vec3};
use proptest::prelude::*;

fn diag3(a: f64, b: f64, c: f64) -> TracelessMat3 {
    TracelessMat3::project(&Mat3::from_diagonal(&Vec3::new(a, b, c)))
}

fn sym_eigs(t: &TracelessMat3) -> [f64; 3] {
    eig_sym(&t.sym_matrix()).unwrap().values
}

#[test]
fn planar_worked_split() {
    let c = TracelessMat2::from_parts(Vec2::new(0.5, 0.0), 0.0);
    let (a, b, lambda) = split_2d(&c, 0.6, 2.0).unwrap();
    assert_relative_eq!(a.a1, 0.6, epsilon = 1e-15);
    assert_relative_eq!(b.a1, -0.6, epsilon = 1e-15);
    assert_relative_eq!(a.a3, 0.1, epsilon = 1e-15);
    assert_relative_eq!(b.a3, -1.1, epsilon = 1e-15);
    assert_relative_eq!(lambda, 1.0 / 12.0, epsilon = 1e-15);
    let d = a - b;
    assert_relative_eq!(d.a3 * d.a3, d.sym_norm().powi(2), epsilon = 1e-14);
    assert_relative_eq!(d.a3 * d.a3, 1.44, epsilon = 1e-14);
}

#[test]
fn planar_split_rejects_out_of_radius() {
    let c = TracelessMat2::from_parts(Vec2::new(0.7, 0.0), 0.0);
    assert!(split_2d(&c, 0.6, 2.0).is_err());
    assert!(split_2d(&TracelessMat2::from_parts(Vec2::zeros(), 0.3), 0.6, 2.0).is_err());
}

#[test]
fn spatial_worked_example() {
    let a = diag3(-0.45, -0.45, 0.9);
    let first = split_3d_first(&a, 0.475).unwrap();
    assert_relative_eq!(first.amplitude, (0.025f64 * 1.375).sqrt(), epsilon = 1e-14);
    assert_relative_eq!(first.amplitude, 0.185405, epsilon = 1e-6);
    for b in [first.plus, first.minus] {
        let e = sym_eigs(&b);
        for (x, y) in e.iter().zip([-0.475, -0.45, 0.925]) {
            assert_relative_eq!(*x, y, epsilon = 1e-12);
        }
    }
    let d = first.plus.to_matrix() - first.minus.to_matrix();
    assert!(rank_one_connection(&first.plus.into(), &first.minus.into()).unwrap().is_rank_one());
    assert!(d.determinant().abs() < 1e-14);

    let b = diag3(-0.475, -0.45, 0.925);
    let second = split_3d_second(&b, 0.475, 3.0).unwrap();
    assert_relative_eq!(second.amplitude, (1.4f64 * 0.025).sqrt(), epsilon = 1e-14);
    assert_relative_eq!(second.amplitude, 0.187083, epsilon = 1e-6);
    for c in [second.plus, second.minus] {
        let e = sym_eigs(&c);
        for (x, y) in e.iter().zip([-0.475, -0.475, 0.95]) {
            assert_relative_eq!(*x, y, epsilon = 1e-12);
        }
    }
}

#[test]
fn two_level_tree_reconstructs() {
    let a = diag3(-0.45, -0.45, 0.9);
    let tree = LaminateNode::two_level_3d(&a, 0.475, 3.0).unwrap();
    let leaves = tree.leaves();
    assert_eq!(leaves.len(), 4);
    assert!(leaves.iter().all(|l| l.weight == 0.25));
    let (err, rank1) = tree.check();
    assert!(err < 1e-12 && rank1);
}

#[test]
fn planar_hull_of_rank_one_pair_is_the_segment() {
    let a = TracelessMat2::from_parts(Vec2::new(0.75, 0.0), 0.75).to_matrix();
    let b = TracelessMat2::from_parts(Vec2::new(-0.75, 0.0), -0.75).to_matrix();
    let hull = hull_expand_2d(&[a, b], 1, 100, 3);
    assert_eq!(hull.len(), 102);
    for g in &hull {
        let t = ((g - b).dot(&(a - b)) / (a - b).norm_squared()).clamp(0.0, 1.0);
        assert!((g - (b + (a - b) * t)).norm() < 1e-12);
    }
}

proptest! {
    #[test]
    fn planar_split_recombines(r in 0.05f64..0.6, phi in 0.0f64..6.28, c3 in -1.0f64..1.0) {
        let c = TracelessMat2::from_parts(Vec2::new(phi.cos(), phi.sin()) * r, c3);
        let (a, b, l) = split_2d(&c, 0.7, 2.0).unwrap();
        let back: Mat2 = (1.0 - l) * a.to_matrix() + l * b.to_matrix();
        prop_assert!((back - c.to_matrix()).norm() < 1e-12);
        prop_assert!((a.sym_norm() - 0.7).abs() < 1e-12 && (b.sym_norm() - 0.7).abs() < 1e-12);
        prop_assert!(rank_one_connection(&a.into(), &b.into()).unwrap().is_rank_one());
    }

    #[test]
    fn mirrored_input_splits_mirrored(r in 0.05f64..0.6, phi in 0.0f64..6.28, c3 in 0.01f64..1.0) {
        let c = TracelessMat2::from_parts(Vec2::new(phi.cos(), phi.sin()) * r, -c3);
        let (a, b, l) = split_2d(&c, 0.7, 2.0).unwrap();
        let (am, bm, lm) = split_2d(&c.mirrored(), 0.7, 2.0).unwrap();
        prop_assert_eq!(l, lm);
        prop_assert_eq!(a, am.mirrored());
        prop_assert_eq!(b, bm.mirrored());
    }

    #[test]
    fn unimodular_interpolation_keeps_det(s in prop::array::uniform3(-1.0f64..1.0), d in prop::array::uniform3(-1.0f64..1.0), t in 0.0f64..1.0) {
        let a = Mat3::new(1.2, 0.1, 0.0, 0.0, 0.9, 0.3, 0.0, 0.0, 1.0 / 1.08);
        let (sv, dv) = (Vec3::from(s), Vec3::from(d));
        // det(A + a n^T) = det A (1 + n . A^-1 a); pick a with n . A^-1 a = 0
        let ainv = a.try_inverse().unwrap();
        let w = ainv.transpose() * dv;
        prop_assume!(w.norm() > 1e-3);
        let v = sv - w * (w.dot(&sv) / w.norm_squared());
        let b = a + v * dv.transpose();
        let c = (1.0 - t) * a + t * b;
        prop_assert!((b.determinant() - 1.0).abs() < 1e-9);
        prop_assert!((c.determinant() - 1.0).abs() < 1e-9);
    }
}
