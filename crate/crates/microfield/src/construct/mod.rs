//! Constructions: the closed-form disk field, disk packings, rank-one
//! oscillation tiles and iterated refinement toward open targets.

mod disk;
pub mod pompe;
pub mod refine;

use serde::{Deserialize, Serialize};

pub use disk::{embed, explicit_disk_solution, general_domain_solution, ClosedFormDiskField, PackParams};
pub use pompe::{pompe_construct, PompeOutput, PompeReport};
pub use refine::{Patch, Refinement, StageMetrics, StagePlan, Target2d};

use crate::geometry::{Cell, Datum, GeometryError, Payload, PiecewiseField, Shape};
use crate::inapprox::{InApproximation, InapproxError};
use crate::kernel::{Mat2, TracelessMat2, Vec2};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConstructError {
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("A - B is not rank one (singular values {singular:?})")]
    NotRankOne { singular: [f64; 2] },
    #[error("eps = {eps} is too large: eps^3 must stay below min(lambda, 1 - lambda) for lambda = {lambda}")]
    EpsilonTooLarge { eps: f64, lambda: f64 },
    #[error("lambda = {0} is degenerate")]
    DegenerateLambda(f64),
    #[error("no rank-one split toward the target for gradient (a1, a2, a3) = {witness:?}: {detail}")]
    SplitUnavailable { witness: [f64; 3], detail: String },
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("stage {stage}: p95 rose from {before} to {after}")]
    StageRegression { stage: usize, before: f64, after: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Inapprox(#[from] InapproxError),
}

/// Frobenius distance from `g` to the segment `[a, b]`.
pub fn segment_distance(g: &Mat2, a: &Mat2, b: &Mat2) -> f64 {
    let d = a - b;
    let dd = d.norm_squared();
    if dd == 0.0 {
        return (g - a).norm();
    }
    let t = ((g - b).dot(&d) / dd).clamp(0.0, 1.0);
    (g - (b + d * t)).norm()
}

/// Tuning of the refinement engine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineOptions {
    /// Monte Carlo descent paths for the statistics.
    pub samples: usize,
    pub seed: u64,
    /// Dyadic depth of every patch packing.
    pub levels: u32,
    /// Tile flatness as a fraction of the target's split margin.
    pub flatness: f64,
    /// Read the field as the extrusion `(u, 0) + w` for well distances.
    pub embed3d: bool,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions { samples: 20_000, seed: 7, levels: 20, flatness: 0.125, embed3d: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpenStatus {
    Converged,
    BudgetExhausted,
}

#[derive(Clone, Debug)]
pub struct OpenResult {
    pub field: PiecewiseField,
    pub metrics: Vec<StageMetrics>,
    pub status: OpenStatus,
    /// Sum of the per-round sup budgets actually used.
    pub sup_ledger: f64,
    pub split_failures: usize,
}

#[derive(Clone, Debug)]
pub struct IntegrateResult {
    pub field: PiecewiseField,
    /// One row per round, all stages.
    pub rounds: Vec<StageMetrics>,
    /// Last row of every stage.
    pub stages: Vec<StageMetrics>,
    pub sup_ledger: f64,
    pub split_failures: usize,
}

/// Datum cells as triangles with affine payloads (the refinement roots).
pub fn datum_roots(datum: &PiecewiseField) -> Result<Vec<Cell>, ConstructError> {
    let mut out = Vec::new();
    let mut push = |tri: [Vec2; 3], grad: Mat2, shift: Vec2, gen: u32| {
        let tri = if crate::geometry::region::polygon_area(&tri) < 0.0 { [tri[0], tri[2], tri[1]] } else { tri };
        let id = out.len() as u64 + 1;
        out.push(Cell::affine(id, Shape::Triangle { v: tri }, grad, shift, gen));
    };
    if datum.cells.is_empty() {
        let Datum::Affine { grad, shift } = &datum.datum else {
            return Err(ConstructError::InvalidInput("piecewise datum without cells".into()));
        };
        for t in datum.domain.triangulate() {
            push(t, *grad, *shift, 0);
        }
        return Ok(out);
    }
    for c in &datum.cells {
        let Payload::Affine { grad, shift, .. } = &c.payload else {
            return Err(ConstructError::InvalidInput(format!("datum cell {} is not affine", c.id)));
        };
        let outline = match &c.shape {
            Shape::Triangle { v } => v.to_vec(),
            Shape::Polygon { v } => v.clone(),
            _ => return Err(ConstructError::InvalidInput(format!("datum cell {} must be polygonal", c.id))),
        };
        let dom = crate::geometry::Domain2::Polygon { vertices: outline };
        for t in dom.triangulate() {
            push(t, *grad, *shift, c.generation);
        }
    }
    Ok(out)
}

/// Affine datum `x -> g x + t` on a domain.
pub fn affine_datum(domain: crate::geometry::Domain2, g: Mat2, t: Vec2) -> PiecewiseField {
    PiecewiseField::new(domain, Vec::new(), Datum::Affine { grad: g, shift: t })
}

fn witness(g: &Mat2) -> [f64; 3] {
    let t = TracelessMat2::project(g);
    [t.a1, t.a2, t.a3]
}

fn boundary_datum(datum: &PiecewiseField) -> Datum {
    if datum.cells.is_empty() {
        datum.datum.clone()
    } else {
        Datum::Piecewise { cells: datum.cells.clone() }
    }
}

/// Refine toward the open set `target` until the sampled bad fraction drops
/// below `eps` or `max_rounds` is reached; round `j` moves the field by at
/// most `eps / 2^j`.
pub fn construct_open(
    datum: &PiecewiseField,
    target: &Target2d,
    eps: f64,
    max_rounds: u32,
    opts: &RefineOptions,
) -> Result<OpenResult, ConstructError> {
    if !(eps > 0.0) {
        return Err(ConstructError::InvalidInput(format!("eps = {eps} must be positive")));
    }
    datum.domain.validate()?;
    let roots = datum_roots(datum)?;
    for c in &roots {
        let g = c.stored_grads()[0];
        if !target.contains(&g) {
            target.split(&g).map_err(|e| ConstructError::SplitUnavailable { witness: witness(&g), detail: e.to_string() })?;
        }
    }
    let stage = StagePlan { target: target.clone(), rounds: max_rounds, m: opts.flatness * target.nominal_margin(), budget: eps };
    let mut rf = Refinement { stages: vec![stage], final_round: max_rounds, levels: opts.levels, embed3d: opts.embed3d };
    let patches: Vec<Patch> = roots.iter().filter_map(Patch::from_cell).collect();
    let sampled = refine::sample_metrics(&rf, &patches, opts.samples, opts.seed);
    let stop = sampled.metrics.iter().position(|m| m.bad_fraction < eps);
    let (final_round, status) = match stop {
        Some(r) => (r as u32, OpenStatus::Converged),
        None => (max_rounds, OpenStatus::BudgetExhausted),
    };
    rf.final_round = final_round;
    let metrics: Vec<StageMetrics> = sampled.metrics.into_iter().take(final_round as usize + 1).collect();
    let sup_ledger = (1..=final_round).map(|g| rf.budget_of(g)).sum();
    let mut field = PiecewiseField::new(datum.domain.clone(), roots, boundary_datum(datum));
    field.embed3d = opts.embed3d;
    if final_round > 0 {
        field = field.with_refinement(rf);
    }
    Ok(OpenResult { field, metrics, status, sup_ledger, split_failures: sampled.split_failures })
}

/// Stage budgets: `eps_2 = eps / 2`, `eps_i = delta_i eps_{i-1}` with
/// `delta_i = min(delta_{i-1}, 2^-i)`.
pub fn stage_budgets(eps: f64, stages: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(stages);
    let mut e = eps / 2.0;
    let mut delta: f64 = 0.5;
    for s in 0..stages {
        if s > 0 {
            let i = s + 2;
            delta = delta.min((-(i as f64)).exp2());
            e *= delta;
        }
        out.push(e);
    }
    out
}

/// Staged refinement: stage `s` drives gradients from `U_s` into `U_{s+1}`.
pub fn convex_integrate(
    datum: &PiecewiseField,
    seq: &InApproximation,
    eps: f64,
    stages: usize,
    rounds: u32,
    opts: &RefineOptions,
) -> Result<IntegrateResult, ConstructError> {
    if seq.dimension != 2 {
        return Err(ConstructError::InvalidInput("the staged construction runs on planar sequences".into()));
    }
    if stages == 0 || stages + 1 > seq.depth {
        return Err(ConstructError::InvalidInput(format!(
            "stages = {stages} needs a sequence of depth at least {} (have {})",
            stages + 1,
            seq.depth
        )));
    }
    if !(eps > 0.0) {
        return Err(ConstructError::InvalidInput(format!("eps = {eps} must be positive")));
    }
    datum.domain.validate()?;
    let roots = datum_roots(datum)?;
    let bound = 3.0 / (2.0 * std::f64::consts::SQRT_2);
    let first = Target2d { seq: seq.clone(), index: 1 };
    for c in &roots {
        let g = c.stored_grads()[0];
        let e = 0.5 * (g + g.transpose());
        if e.norm() >= bound {
            return Err(ConstructError::PreconditionViolation(format!(
                "ess sup |e(v)| < 3/(2 sqrt 2) violated: |e(v)| = {} on cell {}",
                e.norm(),
                c.id
            )));
        }
        if !first.contains(&g) {
            return Err(ConstructError::PreconditionViolation(format!(
                "datum gradient of cell {} is not in U_1 (margin {})",
                c.id,
                first.margin(&g)
            )));
        }
    }
    let budgets = stage_budgets(eps, stages);
    let plans: Vec<StagePlan> = (0..stages)
        .map(|s| {
            let target = Target2d { seq: seq.clone(), index: s + 2 };
            let m = opts.flatness * target.nominal_margin();
            StagePlan { target, rounds, m, budget: budgets[s] }
        })
        .collect();
    let total = rounds * stages as u32;
    let rf = Refinement { stages: plans, final_round: total, levels: opts.levels, embed3d: opts.embed3d };
    let patches: Vec<Patch> = roots.iter().filter_map(Patch::from_cell).collect();
    let sampled = refine::sample_metrics(&rf, &patches, opts.samples, opts.seed);
    let stage_rows: Vec<StageMetrics> = (0..stages)
        .map(|s| sampled.metrics[((s + 1) as u32 * rounds) as usize])
        .collect();
    for w in stage_rows.windows(2) {
        if w[1].p95 > w[0].p95 + 1e-3 {
            return Err(ConstructError::StageRegression { stage: w[1].stage, before: w[0].p95, after: w[1].p95 });
        }
    }
    let sup_ledger = (1..=total).map(|g| rf.budget_of(g)).sum();
    let mut field = PiecewiseField::new(datum.domain.clone(), roots, boundary_datum(datum));
    field.embed3d = opts.embed3d;
    let field = field.with_refinement(rf);
    Ok(IntegrateResult {
        field,
        rounds: sampled.metrics,
        stages: stage_rows,
        sup_ledger,
        split_failures: sampled.split_failures,
    })
}
