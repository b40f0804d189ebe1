//! The seven-cell reference triangle, its point-reflected twin, and the
//! rhombus tile they form.

use std::sync::OnceLock;

use crate::kernel::{Mat2, Vec2};

use super::region::{barycentric, cross};

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Corner and interior nodes of the reference triangle `T`.
pub fn reference_nodes() -> [Vec2; 6] {
    [
        Vec2::new(-1.0, -1.0 / SQRT3),
        Vec2::new(1.0, -1.0 / SQRT3),
        Vec2::new(0.0, 2.0 / SQRT3),
        Vec2::new(0.25, 1.0 / (4.0 * SQRT3)),
        Vec2::new(-0.25, 1.0 / (4.0 * SQRT3)),
        Vec2::new(0.0, -1.0 / (2.0 * SQRT3)),
    ]
}

/// Unit-amplitude nodal displacements (corners fixed).
pub fn reference_displacements() -> [Vec2; 6] {
    [
        Vec2::zeros(),
        Vec2::zeros(),
        Vec2::zeros(),
        Vec2::new(-0.5, 0.5 * SQRT3),
        Vec2::new(-0.5, -0.5 * SQRT3),
        Vec2::new(1.0, 0.0),
    ]
}

/// Node indices of `T1..T7`, counterclockwise.
pub const TRIANGLES: [[usize; 3]; 7] = [
    [0, 1, 5],
    [1, 3, 5],
    [3, 4, 5],
    [1, 2, 3],
    [2, 4, 3],
    [2, 0, 4],
    [0, 5, 4],
];

/// Gradient of the affine interpolant of `u` on the triangle `p`.
pub fn affine_grad(p: &[Vec2; 3], u: &[Vec2; 3]) -> Mat2 {
    let dp = Mat2::from_columns(&[p[1] - p[0], p[2] - p[0]]);
    let du = Mat2::from_columns(&[u[1] - u[0], u[2] - u[0]]);
    du * dp.try_inverse().unwrap_or_else(|| Mat2::from_element(f64::NAN))
}

/// Rhombus tile data: ten nodes (the reflected corners `V2`, `V3` are shared),
/// fourteen triangles, unit-amplitude gradients.
#[derive(Debug)]
pub struct RefTile {
    pub nodes: [Vec2; 10],
    pub disp: [Vec2; 10],
    /// Lattice coordinates `(alpha, beta)` of each node: `y = V1 + alpha e_a + beta e_b`.
    pub lat: [Vec2; 10],
    pub tris: [[usize; 3]; 14],
    pub grads: [Mat2; 14],
    /// `|T_k| / |rhombus|`.
    pub frac: [f64; 14],
}

/// `e_a = V2 - V1`, `e_b = V3 - V1`.
pub fn lattice_edges() -> Mat2 {
    Mat2::new(2.0, 1.0, 0.0, SQRT3)
}

pub fn ref_tile() -> &'static RefTile {
    static TILE: OnceLock<RefTile> = OnceLock::new();
    TILE.get_or_init(|| {
        let n = reference_nodes();
        let d = reference_displacements();
        let mid = (n[1] + n[2]) * 0.5;
        // reflected V1, V4, V5, V6
        let mut nodes = [Vec2::zeros(); 10];
        let mut disp = [Vec2::zeros(); 10];
        nodes[..6].copy_from_slice(&n);
        disp[..6].copy_from_slice(&d);
        for (slot, src) in [(6usize, 0usize), (7, 3), (8, 4), (9, 5)] {
            nodes[slot] = mid * 2.0 - n[src];
            disp[slot] = -d[src];
        }
        let image = |i: usize| match i {
            0 => 6,
            1 => 2,
            2 => 1,
            3 => 7,
            4 => 8,
            5 => 9,
            _ => unreachable!(),
        };
        let mut tris = [[0usize; 3]; 14];
        for (k, t) in TRIANGLES.iter().enumerate() {
            tris[k] = *t;
            tris[k + 7] = [image(t[0]), image(t[1]), image(t[2])];
        }
        let einv = lattice_edges().try_inverse().unwrap();
        let lat = nodes.map(|y| einv * (y - n[0]));
        let area_rh = 2.0 * SQRT3;
        let mut grads = [Mat2::zeros(); 14];
        let mut frac = [0.0; 14];
        for k in 0..14 {
            let p = tris[k].map(|i| nodes[i]);
            let u = tris[k].map(|i| disp[i]);
            grads[k] = affine_grad(&p, &u);
            frac[k] = 0.5 * cross(&(p[1] - p[0]), &(p[2] - p[0])) / area_rh;
        }
        RefTile { nodes, disp, lat, tris, grads, frac }
    })
}

impl RefTile {
    /// Sub-triangle containing the point with rhombus lattice coordinates
    /// `(alpha, beta)` in `[0, 1]^2`; indices `7..14` are in the reflected half.
    pub fn locate(&self, ab: &Vec2) -> usize {
        let (al, be, off) = if ab.x + ab.y <= 1.0 {
            (ab.x, ab.y, 0)
        } else {
            (1.0 - ab.x, 1.0 - ab.y, 7)
        };
        let y = self.nodes[0] + lattice_edges() * Vec2::new(al, be);
        let mut best = (0usize, f64::NEG_INFINITY);
        for (k, t) in TRIANGLES.iter().enumerate() {
            let tri = t.map(|i| self.nodes[i]);
            let lo = barycentric(&tri, &y).into_iter().fold(f64::INFINITY, f64::min);
            if lo >= 0.0 {
                return k + off;
            }
            if lo > best.1 {
                best = (k, lo);
            }
        }
        best.0 + off
    }

    /// Largest `|J u_i|` over the nodal displacements.
    pub fn max_node_disp(&self, j: &Mat2) -> f64 {
        self.disp.iter().map(|d| (j * d).norm()).fold(0.0, f64::max)
    }
}
