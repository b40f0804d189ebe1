use approx::assert_relative_eq;
use microfield::geometry::region::{cross, point_in_polygon, polygon_area};
use microfield::geometry::tile::lattice_edges;
use microfield::geometry::{vitali_pack, Generator, PackStatus};
use microfield::geometry::{field_eval, reference_triangle_field, Domain2, Payload, Shape};
use microfield::{Mat2, Vec2};
use proptest::prelude::*;

fn tri(shape: &Shape) -> [Vec2; 3] {
    match shape {
        Shape::Triangle { v } => *v,
        _ => panic!("expected a triangle"),
    }
}

/// Separating-axis test for convex polygons; touching edges do not count.
fn overlap(p: &[Vec2], q: &[Vec2]) -> bool {
    for poly in [p, q] {
        for i in 0..poly.len() {
            let e = poly[(i + 1) % poly.len()] - poly[i];
            let n = Vec2::new(-e.y, e.x);
            let span = |s: &[Vec2]| {
                s.iter().map(|v| n.dot(v)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
            };
            let (a0, a1) = span(p);
            let (b0, b1) = span(q);
            if a1.min(b1) - a0.max(b0) <= 1e-12 * n.norm() {
                return false;
            }
        }
    }
    true
}

fn no_overlaps(polys: &mut [Vec<Vec2>]) -> bool {
    polys.sort_by(|a, b| {
        let xa = a.iter().map(|v| v.x).fold(f64::INFINITY, f64::min);
        let xb = b.iter().map(|v| v.x).fold(f64::INFINITY, f64::min);
        xa.partial_cmp(&xb).unwrap()
    });
    for i in 0..polys.len() {
        let right = polys[i].iter().map(|v| v.x).fold(f64::NEG_INFINITY, f64::max);
        for j in i + 1..polys.len() {
            let left = polys[j].iter().map(|v| v.x).fold(f64::INFINITY, f64::min);
            if left >= right {
                break;
            }
            if overlap(&polys[i], &polys[j]) {
                return false;
            }
        }
    }
    true
}

#[test]
fn reference_triangle_cell_areas() {
    let f = reference_triangle_field(0.1).unwrap();
    assert_eq!(f.cells.len(), 7);
    let total = f.domain.area();
    let mut fr: Vec<f64> = f.cells.iter().map(|c| c.shape.area() / total).collect();
    fr.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let want = [1.0 / 16.0, 7.0 / 48.0, 7.0 / 48.0, 7.0 / 48.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
    for (a, b) in fr.iter().zip(want) {
        assert_relative_eq!(*a, b, epsilon = 1e-14);
    }
}

#[test]
fn reference_triangle_cells_are_divergence_free() {
    let f = reference_triangle_field(0.1).unwrap();
    for c in &f.cells {
        let v = tri(&c.shape);
        let Payload::Affine { values, .. } = &c.payload else { panic!("affine cells expected") };
        for (_, g) in c.derived_pieces() {
            assert!(g.trace().abs() < 1e-14);
        }
        // a single displaced vertex must slide along the opposite edge
        let moving: Vec<usize> = (0..3).filter(|&k| values[k].norm() > 0.0).collect();
        if moving.len() == 1 {
            let k = moving[0];
            let edge = v[(k + 2) % 3] - v[(k + 1) % 3];
            assert!(cross(&values[k], &edge).abs() < 1e-14 * edge.norm());
        }
    }
}

#[test]
fn reference_triangle_rejects_bad_delta() {
    assert!(reference_triangle_field(0.0).is_err());
    assert!(reference_triangle_field(f64::NAN).is_err());
}

#[test]
fn shared_edges_agree_and_lowest_id_wins() {
    let f = reference_triangle_field(0.2).unwrap();
    let mut checked = 0;
    for a in &f.cells {
        for b in &f.cells {
            if a.id >= b.id {
                continue;
            }
            let (ta, tb) = (tri(&a.shape), tri(&b.shape));
            let shared: Vec<Vec2> = ta.iter().filter(|p| tb.iter().any(|q| (*p - q).norm() < 1e-14)).copied().collect();
            if shared.len() != 2 {
                continue;
            }
            let mid = (shared[0] + shared[1]) * 0.5;
            let (ua, _) = a.eval(&mid);
            let (ub, _) = b.eval(&mid);
            assert!((ua - ub).norm() < 1e-12);
            let v = field_eval(&f, &mid).unwrap();
            let lowest = f.cells.iter().filter(|c| c.shape.contains(&mid, 1e-12)).map(|c| c.id).min();
            assert_eq!(v.cell, lowest);
            checked += 1;
        }
    }
    assert!(checked >= 6);
}

#[test]
fn disk_packing_of_the_square() {
    let dom = Domain2::unit_square();
    let cover = vitali_pack(&dom, &Generator::Disk, 0.9, 1e-4, 1).unwrap();
    assert_eq!(cover.status, PackStatus::Reached);
    assert!(cover.covered_fraction >= 0.9);
    let area: f64 = cover.placements.iter().map(|p| std::f64::consts::PI * p.scale * p.scale).sum();
    assert_relative_eq!(area, cover.covered_fraction, epsilon = 1e-9);
    let ps = &cover.placements;
    for (i, p) in ps.iter().enumerate() {
        assert!(p.center.x - p.scale >= -1e-12 && p.center.x + p.scale <= 1.0 + 1e-12);
        assert!(p.center.y - p.scale >= -1e-12 && p.center.y + p.scale <= 1.0 + 1e-12);
        for q in &ps[i + 1..] {
            assert!((p.center - q.center).norm() >= p.scale + q.scale - 1e-12);
        }
    }
}

#[test]
fn parallelogram_packing_of_an_l_shape() {
    let l = vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(2.0, 0.0),
        Vec2::new(2.0, 1.0),
        Vec2::new(1.0, 1.0),
        Vec2::new(1.0, 2.0),
        Vec2::new(0.0, 2.0),
    ];
    let dom = Domain2::Polygon { vertices: l.clone() };
    let basis = Mat2::new(1.0, 0.0, 0.0, 0.05) * lattice_edges() * 0.5;
    let cover = vitali_pack(&dom, &Generator::Parallelogram { basis }, 0.95, 1e-6, 2).unwrap();
    assert!(cover.covered_fraction >= 0.95);
    let mut polys: Vec<Vec<Vec2>> = cover.placements.iter().map(|p| cover.corners(p).unwrap().to_vec()).collect();
    let area: f64 = polys.iter().map(|p| polygon_area(p).abs()).sum();
    assert_relative_eq!(area / dom.area(), cover.covered_fraction, epsilon = 1e-9);
    for p in &polys {
        assert!(p.iter().all(|v| point_in_polygon(&l, v, 1e-12)));
    }
    assert!(no_overlaps(&mut polys));
}

#[test]
fn invalid_targets_are_rejected() {
    let dom = Domain2::unit_square();
    assert!(vitali_pack(&dom, &Generator::Disk, 1.0, 1e-4, 0).is_err());
    assert!(vitali_pack(&dom, &Generator::Disk, 0.5, 0.0, 0).is_err());
    let flat = Generator::Parallelogram { basis: Mat2::new(1.0, 2.0, 0.5, 1.0) };
    assert!(vitali_pack(&dom, &flat, 0.5, 1e-4, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reference_field_is_continuous(delta in 0.01f64..1.0, s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let f = reference_triangle_field(delta).unwrap();
        let Domain2::Polygon { vertices } = &f.domain else { unreachable!() };
        let (s, t) = if s + t > 1.0 { (1.0 - s, 1.0 - t) } else { (s, t) };
        let x = vertices[0] + (vertices[1] - vertices[0]) * s + (vertices[2] - vertices[0]) * t;
        let owners: Vec<_> = f.cells.iter().filter(|c| c.shape.contains(&x, 1e-12)).collect();
        prop_assert!(!owners.is_empty());
        let u0 = owners[0].eval(&x).0;
        for c in &owners[1..] {
            prop_assert!((c.eval(&x).0 - u0).norm() < 1e-12);
        }
    }

    #[test]
    fn disk_packings_are_disjoint(seed in 0u64..1000, target in 0.3f64..0.8) {
        let dom = Domain2::Disk { center: Vec2::zeros(), radius: 1.0 };
        let cover = vitali_pack(&dom, &Generator::Disk, target, 1e-3, seed).unwrap();
        prop_assert!(cover.covered_fraction >= target);
        let ps = &cover.placements;
        for (i, p) in ps.iter().enumerate() {
            prop_assert!(p.center.norm() + p.scale <= 1.0 + 1e-12);
            for q in &ps[i + 1..] {
                prop_assert!((p.center - q.center).norm() >= p.scale + q.scale - 1e-12);
            }
        }
    }
}
