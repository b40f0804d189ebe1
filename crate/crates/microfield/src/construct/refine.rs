//! Lazily evaluated iterated refinement.
//!
//! A refined field is a deterministic function of its root cells and a
//! [`Refinement`] plan, so nothing below the roots is stored.  Every patch is
//! a triangle carrying an affine map.  When a patch gradient leaves the
//! target of a round, the patch is split toward the target (reusing the
//! parent's rank-one direction when possible), packed with oscillation tiles
//! on a dyadic lattice, and each tile sub-triangle becomes a child patch.
//! Evaluation descends from a root; statistics descend along random paths,
//! drawing a fresh uniform point inside every patch on the way.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pompe::{jordan_frame, tile_amplitude, tile_frame};
use crate::geometry::lattice::{coverage, locate_convex};
use crate::geometry::region::{cross, polygon_area};
use crate::geometry::tile::lattice_edges;
use crate::geometry::{ref_tile, Cell, FieldValue, Payload, Shape};
use crate::inapprox::{member_2d, InApproximation};
use crate::kernel::{Dense, Mat2, Mat3, TracelessMat2, Vec2};
use crate::laminate::{split_2d, LaminateError};
use crate::wells::{dist_k0_2d, well_distance, WellSet};

/// Open target `U_index` of a two-dimensional in-approximation, with the
/// constructive split toward it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target2d {
    pub seq: InApproximation,
    pub index: usize,
}

impl Target2d {
    pub fn margin(&self, g: &Mat2) -> f64 {
        member_2d(&TracelessMat2::project(g), &self.seq, self.index).margin
    }

    pub fn contains(&self, g: &Mat2) -> bool {
        self.margin(g) > 0.0
    }

    /// Margin of a freshly split endpoint.
    pub fn nominal_margin(&self) -> f64 {
        let i = self.index;
        if i >= 2 {
            0.5 * (self.seq.r[i] - self.seq.r[i - 1])
        } else {
            0.5 * self.seq.r[0]
        }
    }

    pub fn split(&self, g: &Mat2) -> Result<(TracelessMat2, TracelessMat2, f64), LaminateError> {
        if self.index < 2 {
            return Err(LaminateError::PreconditionViolation("no split toward the innermost set".into()));
        }
        split_2d(&TracelessMat2::project(g), self.seq.r_tilde(self.index - 1), self.seq.m2())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub target: Target2d,
    pub rounds: u32,
    /// Tile flatness used throughout the stage.
    pub m: f64,
    /// Sup-norm budget of the stage; round `j` may move the field by `budget / 2^j`.
    pub budget: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub stages: Vec<StagePlan>,
    /// Global rounds actually applied.
    pub final_round: u32,
    /// Dyadic depth of every patch packing, relative to the patch size.
    pub levels: u32,
    /// Read the field as a 3D extrusion when computing well distances.
    #[serde(default)]
    pub embed3d: bool,
}

#[derive(Clone, Debug)]
struct Lineage {
    stage: usize,
    a: Mat2,
    b: Mat2,
    l: Mat2,
}

/// Triangle with an affine map; `verts` are relative to `v0`.
#[derive(Clone, Debug)]
pub struct Patch {
    pub v0: Vec2,
    pub verts: [Vec2; 3],
    pub grad: Mat2,
    pub value0: Vec2,
    pub created: u32,
    lineage: Option<Lineage>,
}

impl Patch {
    pub fn from_triangle(v: &[Vec2; 3], grad: Mat2, value0: Vec2) -> Self {
        Patch {
            v0: v[0],
            verts: [Vec2::zeros(), v[1] - v[0], v[2] - v[0]],
            grad,
            value0,
            created: 0,
            lineage: None,
        }
    }

    pub fn from_cell(c: &Cell) -> Option<Self> {
        match (&c.shape, &c.payload) {
            (Shape::Triangle { v }, Payload::Affine { grad, shift, .. }) => {
                Some(Patch::from_triangle(v, *grad, grad * v[0] + shift))
            }
            _ => None,
        }
    }

    pub fn area(&self) -> f64 {
        0.5 * cross(&self.verts[1], &self.verts[2]).abs()
    }

    fn diam(&self) -> f64 {
        self.verts[1].norm().max(self.verts[2].norm()).max((self.verts[2] - self.verts[1]).norm())
    }

    fn uniform<R: Rng>(&self, rng: &mut R) -> Vec2 {
        let (mut s, mut t) = (rng.gen::<f64>(), rng.gen::<f64>());
        if s + t > 1.0 {
            s = 1.0 - s;
            t = 1.0 - t;
        }
        self.verts[1] * s + self.verts[2] * t
    }
}

/// Tiling data of a refined patch.
#[derive(Clone, Debug)]
pub struct Plan {
    pub round: u32,
    pub stage: usize,
    pub a: Mat2,
    pub b: Mat2,
    pub lambda: f64,
    pub l: Mat2,
    pub j: Mat2,
    pub jinv: Mat2,
    pub amp: f64,
    /// Level-0 lattice matrix `h0 J [e_a e_b]`.
    pub h: Mat2,
    pub hinv: Mat2,
    pub h0: f64,
    /// The patch in normalized lattice coordinates, counterclockwise.
    pub region: [Vec2; 3],
    pub l_min: u32,
    pub l_max: u32,
    /// True when the rank-one direction was inherited from the parent.
    pub shifted: bool,
}

fn coverage_cache() -> &'static Mutex<HashMap<(Vec<i64>, u32), f64>> {
    static C: OnceLock<Mutex<HashMap<(Vec<i64>, u32), f64>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Covered fraction of a normalized patch region, cached by shape.
pub fn region_coverage(region: &[Vec2; 3], l_max: u32) -> f64 {
    let key: Vec<i64> = region.iter().flat_map(|p| [(p.x * 1e9).round() as i64, (p.y * 1e9).round() as i64]).collect();
    if let Some(v) = coverage_cache().lock().unwrap().get(&(key.clone(), l_max)) {
        return *v;
    }
    let c = coverage(region, l_max);
    coverage_cache().lock().unwrap().insert((key, l_max), c);
    c
}

/// Outcome of [`Refinement::audit_path`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditPath {
    /// Re-derived gradient of the leaf.
    pub grad: Mat2,
    /// Approximate position of the leaf sample.
    pub point: Vec2,
    pub max_trace: f64,
    /// Largest gap between re-derived and formula gradients.
    pub max_mismatch: f64,
    pub max_outline_jump: f64,
    /// `|u - root map|` at the leaf sample.
    pub deviation: f64,
    pub depth: u32,
    pub split_failed: bool,
}

/// Node of a sampled descent path.
#[derive(Clone, Debug)]
pub struct PathNode {
    pub created: u32,
    pub grad: Mat2,
    pub refined: Option<u32>,
    pub area: f64,
    /// Estimated number of tiles placed in this patch when refined.
    pub tiles: f64,
    pub split_failed: bool,
}

const MAX_DEPTH: usize = 4096;

impl Refinement {
    pub fn total_rounds(&self) -> u32 {
        self.stages.iter().map(|s| s.rounds).sum()
    }

    /// `(stage, round within stage)` of global round `g >= 1`.
    pub fn stage_of(&self, g: u32) -> Option<(usize, u32)> {
        let mut start = 0;
        for (s, st) in self.stages.iter().enumerate() {
            if g > start && g <= start + st.rounds {
                return Some((s, g - start));
            }
            start += st.rounds;
        }
        None
    }

    fn stage_start(&self, s: usize) -> u32 {
        self.stages[..s].iter().map(|st| st.rounds).sum::<u32>() + 1
    }

    pub fn budget_of(&self, g: u32) -> f64 {
        match self.stage_of(g) {
            Some((s, j)) => self.stages[s].budget * (-(j as f64)).exp2(),
            None => 0.0,
        }
    }

    pub fn target_of(&self, g: u32) -> &Target2d {
        let s = self.stage_of(g.max(1)).map(|(s, _)| s).unwrap_or(self.stages.len() - 1);
        &self.stages[s].target
    }

    /// First round after `created` whose target excludes `grad`.
    pub fn refine_round(&self, grad: &Mat2, created: u32, limit: u32) -> Option<u32> {
        let mut g = created + 1;
        while g <= limit.min(self.final_round) {
            let (s, _) = self.stage_of(g)?;
            if !self.stages[s].target.contains(grad) {
                return Some(g);
            }
            if s + 1 >= self.stages.len() {
                return None;
            }
            g = self.stage_start(s + 1);
        }
        None
    }

    pub fn plan(&self, p: &Patch, g: u32) -> Option<Plan> {
        let (s, _) = self.stage_of(g)?;
        let st = &self.stages[s];
        let t = &st.target;
        let mut chosen = None;
        if let Some(lin) = p.lineage.as_ref().filter(|l| l.stage == s) {
            let d = lin.a - lin.b;
            let lam = (lin.a - p.grad).dot(&d) / d.norm_squared();
            if lam > 1e-9 && lam < 1.0 - 1e-9 {
                let shift = p.grad - lin.a + d * lam;
                let (a2, b2) = (lin.a + shift, lin.b + shift);
                let need = 0.25 * t.nominal_margin();
                if t.margin(&a2) > need && t.margin(&b2) > need {
                    chosen = Some((a2, b2, lam, lin.l, true));
                }
            }
        }
        if chosen.is_none() {
            let (a, b, lam) = t.split(&p.grad).ok()?;
            let (_, _, l) = jordan_frame(&a, &b).ok()?;
            chosen = Some((a.to_matrix(), b.to_matrix(), lam, l, false));
        }
        let (a, b, lambda, l, shifted) = chosen?;
        let j = tile_frame(&l, st.m);
        let jinv = j.try_inverse()?;
        let amp = tile_amplitude(st.m, lambda);
        let je = j * lattice_edges();
        let jei = je.try_inverse()?;
        let unit = p.verts.map(|v| jei * v);
        let (mut lo, mut hi) = (unit[0], unit[0]);
        for u in &unit[1..] {
            lo = lo.inf(u);
            hi = hi.sup(u);
        }
        let h0 = (hi - lo).max();
        if !(h0 > 0.0) {
            return None;
        }
        let h = je * h0;
        let hinv = h.try_inverse()?;
        let mut region = unit.map(|u| u / h0);
        if polygon_area(&region) < 0.0 {
            region.swap(1, 2);
        }
        let k = ref_tile().max_node_disp(&j);
        let budget = self.budget_of(g);
        let ratio = amp.abs() * h0 * k / budget;
        let l_min = if ratio > 1.0 { ratio.log2().ceil() as u32 } else { 0 };
        let l_max = self.levels.max(l_min + 4);
        Some(Plan { round: g, stage: s, a, b, lambda, l, j, jinv, amp, h, hinv, h0, region, l_min, l_max, shifted })
    }

    /// Child patch from tile `(level, i, j)`, sub-triangle `k`, plus its
    /// offset relative to the parent's `v0`.
    pub fn child_patch(&self, p: &Patch, plan: &Plan, level: u32, i: i64, j: i64, k: usize) -> (Patch, Vec2) {
        let rt = ref_tile();
        let s = (-(level as f64)).exp2();
        let tri = rt.tris[k];
        let hs = plan.h * s;
        let ij = Vec2::new(i as f64, j as f64);
        let rel0 = hs * (ij + rt.lat[tri[0]]);
        let verts = [
            Vec2::zeros(),
            hs * (rt.lat[tri[1]] - rt.lat[tri[0]]),
            hs * (rt.lat[tri[2]] - rt.lat[tri[0]]),
        ];
        let w0 = plan.j * rt.disp[tri[0]] * (plan.amp * plan.h0 * s);
        let child = Patch {
            v0: p.v0 + rel0,
            verts,
            grad: p.grad + plan.j * rt.grads[k] * plan.jinv * plan.amp,
            value0: p.value0 + p.grad * rel0 + w0,
            created: plan.round,
            lineage: Some(Lineage { stage: plan.stage, a: plan.a, b: plan.b, l: plan.l }),
        };
        (child, rel0)
    }

    /// Tile `(level, i, j)` and sub-triangle containing `q` (relative to `p.v0`).
    pub fn locate_child(&self, plan: &Plan, q: &Vec2) -> Option<(u32, i64, i64, usize)> {
        let lat = plan.hinv * q;
        let (l, i, j) = locate_convex(&plan.region, &lat, plan.l_min, plan.l_max)?;
        let s = (-(l as f64)).exp2();
        let ab = lat / s - Vec2::new(i as f64, j as f64);
        let ab = Vec2::new(ab.x.clamp(0.0, 1.0), ab.y.clamp(0.0, 1.0));
        Some((l, i, j, ref_tile().locate(&ab)))
    }

    /// Child containing the point `q` (relative to `p.v0`), if covered.
    pub fn child_at(&self, p: &Patch, plan: &Plan, q: &Vec2) -> Option<(Patch, Vec2)> {
        let (l, i, j, k) = self.locate_child(plan, q)?;
        Some(self.child_patch(p, plan, l, i, j, k))
    }

    /// One uniformly distributed descent below `root` starting at `q0`
    /// (relative to `root.v0`), re-deriving every child gradient from the
    /// nodal increments of its tile instead of the tile formula.
    pub fn audit_path<R: Rng>(&self, root: &Patch, q0: Vec2, rng: &mut R) -> AuditPath {
        let rt = ref_tile();
        let mut p = root.clone();
        let mut q = q0;
        let mut dg = root.grad;
        let mut offset = (Vec2::zeros(), Mat2::zeros());
        let mut out = AuditPath {
            grad: dg,
            point: root.v0 + q0,
            max_trace: 0.0,
            max_mismatch: 0.0,
            max_outline_jump: 0.0,
            deviation: 0.0,
            depth: 0,
            split_failed: false,
        };
        while (out.depth as usize) < MAX_DEPTH {
            let Some(g) = self.refine_round(&p.grad, p.created, self.final_round) else { break };
            let Some(plan) = self.plan(&p, g) else {
                out.split_failed = true;
                break;
            };
            let Some((l, i, j, k)) = self.locate_child(&plan, &q) else { break };
            let s = (-(l as f64)).exp2();
            let hs = plan.h * s;
            let osc = |n: usize| plan.j * rt.disp[n] * (plan.amp * plan.h0 * s);
            // tile outline nodes keep the parent's affine values
            for n in [0, 1, 2, 6] {
                out.max_outline_jump = out.max_outline_jump.max(osc(n).norm());
            }
            let tri = rt.tris[k];
            let pos = tri.map(|n| hs * (rt.lat[n] - rt.lat[tri[0]]));
            let vals = tri.map(|n| osc(n) - osc(tri[0]));
            // only this level's oscillation is re-derived, on top of the
            // parent gradient, so rounding does not compound over levels
            let child_dg = p.grad + crate::geometry::tile::affine_grad(&pos, &vals);
            let (child, rel0) = self.child_patch(&p, &plan, l, i, j, k);
            out.max_trace = out.max_trace.max(child_dg.trace().abs() / (1.0 + child_dg.norm()));
            out.max_mismatch = out.max_mismatch.max((child_dg - child.grad).norm() / (1.0 + child_dg.norm()));
            // offset from the root map, re-anchored at the child's v0
            offset = (offset.0 + offset.1 * rel0 + osc(tri[0]), offset.1 + child_dg - p.grad);
            dg = child_dg;
            p = child;
            q = p.uniform(rng);
            out.depth += 1;
        }
        if out.depth > 0 {
            out.point = p.v0 + q;
            out.deviation = (offset.0 + offset.1 * q).norm();
        }
        out.grad = dg;
        out
    }

    /// Field value below a root cell at `x`, after round `limit`.
    pub fn eval_at(&self, root: &Patch, x: &Vec2, limit: u32) -> (Vec2, Mat2, u32) {
        let mut p = root.clone();
        let mut q = x - p.v0;
        let floor = 1e-15 * (1.0 + x.norm());
        let mut depth = 0;
        while depth < MAX_DEPTH as u32 {
            let Some(g) = self.refine_round(&p.grad, p.created, limit) else { break };
            let Some(plan) = self.plan(&p, g) else { break };
            let Some((c, rel0)) = self.child_at(&p, &plan, &q) else { break };
            q -= rel0;
            p = c;
            depth += 1;
            if p.diam() < floor {
                break;
            }
        }
        (p.value0 + p.grad * q, p.grad, depth)
    }

    pub fn eval_in(&self, cell: &Cell, x: &Vec2) -> FieldValue {
        match Patch::from_cell(cell) {
            Some(root) => {
                let (value, grad, depth) = self.eval_at(&root, x, self.final_round);
                FieldValue { value, grad, cell: Some(cell.id), residual: false, depth }
            }
            None => {
                let (value, grad) = cell.eval(x);
                FieldValue { value, grad, cell: Some(cell.id), residual: false, depth: 0 }
            }
        }
    }

    fn tile_estimate(plan: &Plan) -> f64 {
        let area = polygon_area(&plan.region);
        let per: f64 = (0..3).map(|i| (plan.region[(i + 1) % 3] - plan.region[i]).norm()).sum();
        area * 4f64.powi(plan.l_min as i32) + per * 2f64.powi(plan.l_max as i32 + 1)
    }

    /// One descent path with fresh uniform points in every patch.
    pub fn sample_path<R: Rng>(&self, roots: &[Patch], total_area: f64, rng: &mut R) -> Vec<PathNode> {
        let mut pick = rng.gen::<f64>() * total_area;
        let mut p = roots.last().expect("at least one root").clone();
        for r in roots {
            if pick < r.area() {
                p = r.clone();
                break;
            }
            pick -= r.area();
        }
        let mut out = Vec::new();
        while out.len() < MAX_DEPTH {
            let refined = self.refine_round(&p.grad, p.created, self.final_round);
            let mut node =
                PathNode { created: p.created, grad: p.grad, refined, area: p.area(), tiles: 0.0, split_failed: false };
            let Some(g) = refined else {
                out.push(node);
                break;
            };
            let Some(plan) = self.plan(&p, g) else {
                node.split_failed = true;
                node.refined = None;
                out.push(node);
                break;
            };
            node.tiles = Self::tile_estimate(&plan);
            out.push(node);
            let q = p.uniform(rng);
            match self.child_at(&p, &plan, &q) {
                Some((c, _)) => p = c,
                None => break,
            }
        }
        out
    }

    /// Exact bad fraction after round `r` from the coverage recursion; every
    /// tile of a patch carries identical children up to similarity, and a
    /// sub-triangle and its reflection have equal statistics.
    pub fn exact_bad_fraction(&self, roots: &[Patch], r: u32) -> f64 {
        let total: f64 = roots.iter().map(|p| p.area()).sum();
        roots.iter().map(|p| p.area() * self.bad_rec(p, r)).sum::<f64>() / total
    }

    fn bad_rec(&self, p: &Patch, r: u32) -> f64 {
        let bad_here = if self.target_of(r).contains(&p.grad) { 0.0 } else { 1.0 };
        let Some(g) = self.refine_round(&p.grad, p.created, r) else { return bad_here };
        let Some(plan) = self.plan(p, g) else { return bad_here };
        let cov = region_coverage(&plan.region, plan.l_max);
        let rt = ref_tile();
        let mut acc = (1.0 - cov) * bad_here;
        for k in 0..7 {
            let (c, _) = self.child_patch(p, &plan, plan.l_min, 0, 0, k);
            acc += cov * 2.0 * rt.frac[k] * self.bad_rec(&c, r);
        }
        acc
    }
}

/// Per-round statistics of a refined field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub stage: usize,
    pub round: u32,
    pub bad_fraction: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
    pub sup_dev: f64,
    pub cells: f64,
}

/// Well distance of a planar gradient to the final well set.
pub fn final_well_distance(g: &Mat2, seq: &InApproximation, embed3d: bool) -> f64 {
    if embed3d {
        let s = 0.5 * (g + g.transpose());
        let mut e = Mat3::zeros();
        e.fixed_view_mut::<2, 2>(0, 0).copy_from(&s);
        e[(0, 0)] += 0.25;
        e[(1, 1)] += 0.25;
        e[(2, 2)] = -0.5;
        well_distance(&Dense::Three(e), &WellSet::Linear3dK0).unwrap_or(f64::INFINITY)
    } else {
        dist_k0_2d(&TracelessMat2::project(g), seq.m2())
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// Sampled statistics for rounds `0..=rf.final_round`.
pub struct Sampled {
    pub metrics: Vec<StageMetrics>,
    pub split_failures: usize,
}

pub fn sample_metrics(rf: &Refinement, roots: &[Patch], samples: usize, seed: u64) -> Sampled {
    let total: f64 = roots.iter().map(|p| p.area()).sum();
    let paths: Vec<Vec<PathNode>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            rf.sample_path(roots, total, &mut rng)
        })
        .collect();
    let seq = &rf.stages.last().expect("at least one stage").target.seq;
    let split_failures = paths.iter().filter(|p| p.last().is_some_and(|n| n.split_failed)).count();
    let mut metrics = Vec::new();
    for r in 0..=rf.final_round {
        let target = rf.target_of(r.max(1));
        let mut dists = Vec::with_capacity(samples);
        let mut bad = 0usize;
        let mut cells = 0.0;
        for path in &paths {
            let k = path.iter().rposition(|n| n.created <= r).unwrap_or(0);
            let g = &path[k].grad;
            if !target.contains(g) {
                bad += 1;
            }
            dists.push(final_well_distance(g, seq, rf.embed3d));
            for n in &path[..=k] {
                if n.refined.is_some_and(|x| x <= r) {
                    cells += 14.0 * n.tiles * total / n.area;
                }
            }
        }
        dists.sort_by(|a, b| a.total_cmp(b));
        let (stage, round) = rf.stage_of(r).map(|(s, j)| (s + 1, j)).unwrap_or((0, 0));
        metrics.push(StageMetrics {
            stage,
            round,
            bad_fraction: bad as f64 / samples as f64,
            p50: quantile(&dists, 0.5),
            p95: quantile(&dists, 0.95),
            max: dists.last().copied().unwrap_or(f64::NAN),
            sup_dev: rf.budget_of(r),
            cells: roots.len() as f64 + cells / samples as f64,
        });
    }
    Sampled { metrics, split_failures }
}
