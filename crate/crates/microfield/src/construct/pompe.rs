use serde::{Deserialize, Serialize};

use super::disk::PackParams;
use super::{segment_distance, ConstructError};
use crate::geometry::tile::{lattice_edges, SQRT3};
use crate::geometry::vitali::pack_lattice;
use crate::geometry::{ref_tile, Cell, Datum, Domain2, Payload, PiecewiseField, Shape, TilePayload};
use crate::kernel::{Mat2, TracelessMat2, Vec2};

/// Rank-one frame of `A - B = a (x) b` with `|a| = 1`: `L = [a^T; b^T]`, so
/// that `L^{-1} E L = A - B`.
pub fn jordan_frame(a: &TracelessMat2, b: &TracelessMat2) -> Result<(Vec2, Vec2, Mat2), ConstructError> {
    let d = a.to_matrix() - b.to_matrix();
    let svd = d.svd(true, true);
    let (s0, s1) = (svd.singular_values[0], svd.singular_values[1]);
    let (smax, smin, k) = if s0 >= s1 { (s0, s1, 0) } else { (s1, s0, 1) };
    if !(smax > 0.0) || smin > 1e-8 * smax.max(1.0) {
        return Err(ConstructError::NotRankOne { singular: [smin, smax] });
    }
    let u = svd.u.unwrap().column(k).into_owned();
    let v = svd.v_t.unwrap().row(k).transpose();
    // deterministic sign: first nonzero component of a positive
    let sgn = if u.x.abs() > 1e-12 { u.x.signum() } else { u.y.signum() };
    let av = u * sgn;
    let bv = v * (smax * sgn);
    let l = Mat2::new(av.x, av.y, bv.x, bv.y);
    Ok((av, bv, l))
}

/// Tile transformation `J = L^{-1} S^{-1}` for flatness `m`.
pub fn tile_frame(l: &Mat2, m: f64) -> Mat2 {
    let s_inv = Mat2::new(1.0 / m.sqrt(), 0.0, 0.0, m.sqrt());
    l.try_inverse().expect("rank-one frame is invertible") * s_inv
}

/// Amplitude of the tile oscillation so that `T1` lands exactly on `A`
/// (`lambda <= 1/2`) or on `B`.
pub fn tile_amplitude(m: f64, lambda: f64) -> f64 {
    let sigma = if lambda <= 0.5 { 1.0 } else { -1.0 };
    sigma * m * lambda.min(1.0 - lambda) / (2.0 * SQRT3)
}

/// Builds one tile cell: base affine `(g, t)`, oscillation `amp`, tile frame
/// `j` scaled by `h`, reference vertex `V1` sent to `origin`.
pub fn tile_cell(id: u64, origin: Vec2, h: f64, j: &Mat2, amp: f64, g: &Mat2, t: &Vec2, generation: u32) -> Cell {
    let rt = ref_tile();
    let basis = j * h;
    let jinv = j.try_inverse().expect("tile frame invertible");
    let (anchor, increments) = tile_node_values(&origin, &basis, amp, g, t);
    let sub_grads = rt.grads.iter().map(|gk| g + j * gk * jinv * amp).collect();
    Cell {
        id,
        shape: Shape::Tile { origin, basis },
        payload: Payload::Tile(TilePayload { grad: *g, shift: *t, amp, anchor, increments, sub_grads }),
        generation,
    }
}

/// Value at `V1` and nodal increments of a tile cell; a pure function of its
/// placement and payload.
pub fn tile_node_values(origin: &Vec2, basis: &Mat2, amp: f64, g: &Mat2, t: &Vec2) -> (Vec2, [Vec2; 10]) {
    let rt = ref_tile();
    let v1 = rt.nodes[0];
    let anchor = g * origin + t + basis * rt.disp[0] * amp;
    let mut out = [Vec2::zeros(); 10];
    for k in 0..10 {
        out[k] = g * (basis * (rt.nodes[k] - v1)) + basis * (rt.disp[k] - rt.disp[0]) * amp;
    }
    (anchor, out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PompeReport {
    pub lambda: f64,
    /// Flatness parameter of the tiles actually used.
    pub m: f64,
    /// Internal scale `eps_hat <= eps` (halved until the distance audit passes).
    pub eps_hat: f64,
    pub tiles: usize,
    pub covered_fraction: f64,
    pub residual_fraction: f64,
    pub flagged_fraction: f64,
    pub max_segment_distance: f64,
    pub sup_deviation: f64,
}

#[derive(Clone, Debug)]
pub struct PompeOutput {
    pub field: PiecewiseField,
    /// `(cell id, sub-triangle)` pairs with `dist(grad u, {A, B}) >= eps`.
    pub flagged: Vec<(u64, usize)>,
    pub report: PompeReport,
}

/// Largest tile count tried before accepting a lower coverage.
pub const TILE_CAP: usize = 400_000;

pub fn pompe_construct(
    a: &TracelessMat2,
    b: &TracelessMat2,
    lambda: f64,
    domain: &Domain2,
    eps: f64,
    pack: &PackParams,
) -> Result<PompeOutput, ConstructError> {
    domain.validate()?;
    if !(lambda > 0.0 && lambda < 1.0) || lambda.min(1.0 - lambda) <= 1e-12 {
        return Err(ConstructError::DegenerateLambda(lambda));
    }
    if !(eps > 0.0) || eps.powi(3) >= lambda.min(1.0 - lambda) {
        return Err(ConstructError::EpsilonTooLarge { eps, lambda });
    }
    let (_, _, l) = jordan_frame(a, b)?;
    let am = a.to_matrix();
    let bm = b.to_matrix();
    let c = am * (1.0 - lambda) + bm * lambda;
    let mut eps_hat = eps;
    for _ in 0..12 {
        let out = build(&am, &bm, &c, &l, lambda, domain, eps, eps_hat, pack);
        if out.report.max_segment_distance < eps && out.report.sup_deviation < eps {
            return Ok(out);
        }
        eps_hat *= 0.5;
    }
    Err(ConstructError::EpsilonTooLarge { eps, lambda })
}

#[allow(clippy::too_many_arguments)]
fn build(
    am: &Mat2,
    bm: &Mat2,
    c: &Mat2,
    l: &Mat2,
    lambda: f64,
    domain: &Domain2,
    eps: f64,
    eps_hat: f64,
    pack: &PackParams,
) -> PompeOutput {
    let m = eps_hat.powi(3) * (1.0 / lambda).max(1.0 / (1.0 - lambda));
    let j = tile_frame(l, m);
    let amp = tile_amplitude(m, lambda);
    let rt = ref_tile();
    // unit-level tiles already respect half the sup budget
    let h0 = 0.5 * eps / (amp.abs() * rt.max_node_disp(&j));
    let basis = j * lattice_edges() * h0;
    let mut cover = None;
    for l_max in 2..=40u32 {
        let (cv, capped) = pack_lattice(domain, &basis, pack.target, (-(l_max as f64)).exp2(), pack.seed, TILE_CAP);
        let done = cv.covered_fraction >= pack.target || (-(l_max as f64)).exp2() * h0 < pack.min_scale;
        if capped {
            if cover.is_none() {
                cover = Some(cv);
            }
            break;
        }
        cover = Some(cv);
        if done {
            break;
        }
    }
    let cover = cover.expect("at least one packing pass");
    let t = Vec2::zeros();
    let mut cells = Vec::with_capacity(cover.placements.len());
    let mut flagged = Vec::new();
    let mut flagged_area = 0.0;
    let mut max_seg: f64 = 0.0;
    let mut sup: f64 = 0.0;
    for (k, p) in cover.placements.iter().enumerate() {
        let corners = cover.corners(p).expect("parallelogram cover");
        let h = h0 * p.scale;
        let cell = tile_cell(k as u64 + 1, corners[0], h, &j, amp, c, &t, 1);
        let area = cell.shape.area();
        for (piece, (_, g)) in cell.derived_pieces().iter().enumerate() {
            max_seg = max_seg.max(segment_distance(g, am, bm));
            let to_ends = (g - am).norm().min((g - bm).norm());
            if to_ends >= eps {
                flagged.push((cell.id, piece));
                flagged_area += area * rt.frac[piece];
            }
        }
        if let Payload::Tile(tp) = &cell.payload {
            if let Some(nodes) = cell.shape.tile_nodes() {
                for (k, x) in nodes.iter().enumerate() {
                    sup = sup.max((tp.node_value(k) - c * x).norm());
                }
            }
        }
        cells.push(cell);
    }
    let total = domain.area();
    let covered = cover.covered_fraction;
    let mut field = PiecewiseField::new(domain.clone(), cells, Datum::Affine { grad: *c, shift: t });
    field.residual = ((1.0 - covered) * total).max(0.0);
    let report = PompeReport {
        lambda,
        m,
        eps_hat,
        tiles: field.cells.len(),
        covered_fraction: covered,
        residual_fraction: 1.0 - covered,
        flagged_fraction: flagged_area / total,
        max_segment_distance: max_seg,
        sup_deviation: sup,
    };
    PompeOutput { field, flagged, report }
}
