//! Payload-independent audits and SVG rendering.
//!
//! The audit never trusts stored gradients: every piece gradient is derived
//! again from vertex coordinates and vertex values, and stored metadata is
//! only compared against the derived one in a separate check.

mod render;

pub use render::{render, RenderError, RenderMode};

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construct::refine::AuditPath;
use crate::construct::{embed, segment_distance, Patch};
use crate::geometry::region::{barycentric, dist_to_polygon_boundary};
use crate::geometry::{Cell, Payload, PiecewiseField, Shape};
use crate::kernel::{energy_v, Dense, Mat2, Mat3, Vec2, Vec3};
use crate::wells::{well_distance, WellSet};

/// What the field is audited against, on top of the structural checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditTarget {
    /// Structural checks only (divergence, trace, continuity, ledger).
    Datum,
    /// The `quantile` of the well distance over covered samples must not
    /// exceed `tol`.
    Wells { set: WellSet, tol: f64, quantile: f64 },
    /// Every piece gradient within `eps` of the segment `[a, b]`; pieces
    /// farther than `eps` from both ends are flagged and their measure must
    /// stay below `5/6 covered + residual + slack`.
    Segment { a: Mat2, b: Mat2, eps: f64, slack: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    Cell { id: u64 },
    Point { x: f64, y: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Worst offender (always present on failure).
    pub witness: Option<Witness>,
    /// Tolerance minus the worst value; negative on failure.
    pub margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureSource {
    /// Exact area recount over the explicit pieces.
    Ledger,
    /// Uniform interior samples.
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    pub good: f64,
    pub flagged: f64,
    pub residual: f64,
    pub source: MeasureSource,
    /// Largest `|u - datum|` seen at piece vertices and samples.
    pub sup_deviation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checks: Vec<Check>,
    pub measures: Measures,
    /// Distance to the audited well set or segment over covered samples.
    pub distance: Option<Quantiles>,
    /// Energy of the extruded strain over covered samples (planar fields
    /// are read as `(u, 0) + w`).
    pub energy: Option<Quantiles>,
    pub samples: usize,
    pub seed: u64,
    pub runtime: f64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// `key = value` lines; the runtime comes last so that everything above
    /// it is reproducible byte for byte.
    pub fn to_text(&self) -> String {
        let mut s = self.canonical_text();
        s.push_str(&format!("runtime_s = {:.6}\n", self.runtime));
        s
    }

    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        s.push_str("schema = microfield-audit/1\n");
        s.push_str(&format!("samples = {}\nseed = {}\n", self.samples, self.seed));
        s.push_str(&format!("passed = {}\n", self.passed()));
        for c in &self.checks {
            let w = match c.witness {
                Some(Witness::Cell { id }) => format!("cell {id}"),
                Some(Witness::Point { x, y }) => format!("point ({x:.17e}, {y:.17e})"),
                None => "-".into(),
            };
            let verdict = if c.pass { "pass" } else { "FAIL" };
            s.push_str(&format!("check.{} = {} margin={:.17e} witness={}\n", c.name, verdict, c.margin, w));
        }
        let m = &self.measures;
        let src = match m.source {
            MeasureSource::Ledger => "ledger",
            MeasureSource::Sampled => "sampled",
        };
        s.push_str(&format!(
            "measure.good = {:.17e}\nmeasure.flagged = {:.17e}\nmeasure.residual = {:.17e}\nmeasure.source = {}\nmeasure.sup_deviation = {:.17e}\n",
            m.good, m.flagged, m.residual, src, m.sup_deviation
        ));
        for (name, q) in [("distance", &self.distance), ("energy", &self.energy)] {
            if let Some(q) = q {
                s.push_str(&format!(
                    "{name}.p50 = {:.17e}\n{name}.p95 = {:.17e}\n{name}.max = {:.17e}\n",
                    q.p50, q.p95, q.max
                ));
            }
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    pub boundary_samples: usize,
    /// Cells whose edges are probed for continuity (all when fewer).
    pub continuity_cells: usize,
    /// Strict bound on `|u - datum|` (segment targets use their `eps`).
    pub sup_bound: Option<f64>,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions { boundary_samples: 1000, continuity_cells: 2000, sup_bound: None }
    }
}

pub fn audit(f: &PiecewiseField, target: &AuditTarget, samples: usize, seed: u64) -> AuditReport {
    audit_with(f, target, samples, seed, &AuditOptions::default())
}

/// Probe of the field at a point, with the gradient taken from the derived
/// piece data.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Probe {
    x: Vec2,
    value: Vec2,
    grad: Mat2,
    cell: Option<u64>,
}

fn piece_at(pieces: &[([Vec2; 3], Mat2)], x: &Vec2) -> Option<usize> {
    let mut best = None;
    let mut best_score = f64::NEG_INFINITY;
    for (k, (t, _)) in pieces.iter().enumerate() {
        let l = barycentric(t, x);
        let s = l[0].min(l[1]).min(l[2]);
        if s > best_score {
            best_score = s;
            best = Some(k);
        }
    }
    best
}

/// `(value, grad)` of a cell at `x` from geometry and vertex data only.
fn derived_eval(c: &Cell, x: &Vec2) -> (Vec2, Mat2) {
    if let Payload::Disk(d) = &c.payload {
        return d.eval_2d(x);
    }
    let pieces = c.derived_pieces();
    let Some(k) = piece_at(&pieces, x) else { return c.eval(x) };
    let (t, g) = &pieces[k];
    let v0 = piece_value0(c, k);
    (v0 + g * (x - t[0]), *g)
}

fn piece_value0(c: &Cell, k: usize) -> Vec2 {
    match (&c.shape, &c.payload) {
        (Shape::Triangle { .. }, Payload::Affine { values, .. }) => values[0],
        (Shape::Polygon { .. }, Payload::Affine { values, .. }) => values[0],
        (Shape::Tile { .. }, Payload::Tile(t)) => t.node_value(crate::geometry::ref_tile().tris[k][0]),
        _ => Vec2::zeros(),
    }
}

fn probe(f: &PiecewiseField, x: &Vec2) -> Probe {
    let tol = 1e-12 * (1.0 + x.norm());
    let hits = f.cells_at(x, tol);
    if let Some(c) = hits.first() {
        if let (Some(r), Shape::Triangle { .. }) = (&f.refinement, &c.shape) {
            let v = r.eval_in(c, x);
            return Probe { x: *x, value: v.value, grad: v.grad, cell: Some(c.id) };
        }
        let (value, grad) = derived_eval(c, x);
        return Probe { x: *x, value, grad, cell: Some(c.id) };
    }
    let (value, grad) = f.datum.eval(x);
    Probe { x: *x, value, grad, cell: None }
}

/// Gradient of the extruded field `(u, 0) + w`.
fn extruded(p: &Probe) -> Mat3 {
    embed(p.value, p.grad, &Vec3::new(p.x.x, p.x.y, 0.0)).1
}

fn quantiles(mut v: Vec<f64>) -> Option<Quantiles> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let q = |t: f64| v[((v.len() - 1) as f64 * t).round() as usize];
    Some(Quantiles { p50: q(0.5), p95: q(0.95), max: v[v.len() - 1] })
}

/// Distance of a probe to a well set, reading 3D sets through the extrusion.
fn probe_distance(p: &Probe, set: &WellSet) -> f64 {
    let a = if set.dimension() == 2 { Dense::Two(p.grad) } else { Dense::Three(extruded(p)) };
    well_distance(&a, set).unwrap_or(f64::INFINITY)
}

#[derive(Clone, Copy)]
struct Worst {
    value: f64,
    witness: Option<Witness>,
}

impl Worst {
    fn new() -> Self {
        Worst { value: 0.0, witness: None }
    }

    fn see(&mut self, v: f64, w: Witness) {
        // NaN counts as worst
        if v > self.value || (v.is_nan() && !self.value.is_nan()) {
            self.value = v;
            self.witness = Some(w);
        }
    }

    fn check(self, name: &str, tol: f64) -> Check {
        let pass = self.value <= tol;
        Check { name: name.into(), pass, witness: self.witness, margin: tol - self.value }
    }
}

fn point(x: &Vec2) -> Witness {
    Witness::Point { x: x.x, y: x.y }
}

pub fn audit_with(f: &PiecewiseField, target: &AuditTarget, samples: usize, seed: u64, opts: &AuditOptions) -> AuditReport {
    let start = Instant::now();
    let area = f.domain.area();
    let diam = f.domain.diameter();
    let mut checks = Vec::new();

    // divergence and payload consistency over every explicit piece
    let mut div = Worst::new();
    let mut meta = Worst::new();
    let mut sup_dev: f64 = 0.0;
    let mut sup_w = Worst::new();
    for c in &f.cells {
        let pieces = c.derived_pieces();
        let stored = c.stored_grads();
        for (k, (t, g)) in pieces.iter().enumerate() {
            div.see(g.trace().abs() / (1.0 + g.norm()), Witness::Cell { id: c.id });
            if let Some(s) = stored.get(k) {
                meta.see((s - g).norm() / (1.0 + g.norm()), Witness::Cell { id: c.id });
            }
            let v0 = piece_value0(c, k);
            for x in t {
                let d = (v0 + g * (x - t[0]) - f.datum.eval(x).0).norm();
                sup_dev = sup_dev.max(d);
                sup_w.see(d, Witness::Cell { id: c.id });
            }
        }
    }

    // interior samples, one stream per sample
    let probes: Vec<Probe> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let x = f.domain.sample_interior(&mut rng);
            probe(f, &x)
        })
        .collect();
    for p in &probes {
        if p.cell.is_some() {
            div.see(p.grad.trace().abs() / (1.0 + p.grad.norm()), point(&p.x));
        }
        let d = (p.value - f.datum.eval(&p.x).0).norm();
        sup_dev = sup_dev.max(d);
        sup_w.see(d, point(&p.x));
    }
    // below lazily refined roots, points are followed in patch-relative
    // coordinates (absolute ones cannot resolve deep patches)
    let mut lazy_jump = Worst::new();
    let samples_in: Vec<Probe> = match &f.refinement {
        None => probes.clone(),
        Some(rf) => {
            let paths: Vec<(Probe, Option<AuditPath>)> = probes
                .par_iter()
                .enumerate()
                .map(|(i, p)| {
                    let root = p.cell.and_then(|id| f.cells.iter().find(|c| c.id == id)).and_then(Patch::from_cell);
                    let Some(root) = root else { return (*p, None) };
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1a2);
                    rng.set_stream(i as u64);
                    let ap = rf.audit_path(&root, p.x - root.v0, &mut rng);
                    // root map at the leaf point; the path adds `ap.deviation`
                    let value = root.value0 + root.grad * (ap.point - root.v0);
                    (Probe { x: ap.point, value, grad: ap.grad, cell: p.cell }, Some(ap))
                })
                .collect();
            for (q, ap) in &paths {
                if let Some(ap) = ap {
                    div.see(ap.max_trace, point(&q.x));
                    meta.see(ap.max_mismatch, point(&q.x));
                    lazy_jump.see(ap.max_outline_jump, point(&q.x));
                    let d = ap.deviation + (q.value - f.datum.eval(&q.x).0).norm();
                    sup_dev = sup_dev.max(d);
                    sup_w.see(d, point(&q.x));
                    div.see(q.grad.trace().abs() / (1.0 + q.grad.norm()), point(&q.x));
                }
            }
            paths.into_iter().map(|(q, _)| q).collect()
        }
    };
    checks.push(div.check("divergence", 1e-12));
    checks.push(meta.check("payload_consistency", 1e-9));

    // boundary trace against the datum
    let datum_scale = 1.0 + f.datum.grad_norm() * diam + f.datum.eval(&Vec2::zeros()).0.norm();
    let mut trace = Worst::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb0);
    for _ in 0..opts.boundary_samples {
        let x = f.domain.boundary_point(rng.gen::<f64>());
        let p = probe(f, &x);
        trace.see((p.value - f.datum.eval(&x).0).norm(), point(&x));
    }
    checks.push(trace.check("boundary_trace", 1e-12 * datum_scale));

    let mut cont = continuity(f, seed, opts);
    if lazy_jump.value > 0.0 {
        let tau = f.tau_cont();
        let lazy = lazy_jump.check("continuity", tau);
        if lazy.margin < cont.margin {
            cont = lazy;
        }
    }
    checks.push(cont);

    // measure ledger
    let covered = f.covered_area();
    let ledger = ((covered + f.residual) - area).abs() / area.max(f64::MIN_POSITIVE);
    let mut led = Worst::new();
    led.see(ledger, Witness::Cell { id: f.cells.last().map_or(0, |c| c.id) });
    let mut led_check = led.check("measure_ledger", 1e-9);
    if led_check.pass {
        led_check.witness = None;
    }
    checks.push(led_check);

    let residual = f.residual / area;
    let covered_probes: Vec<&Probe> = samples_in.iter().filter(|p| p.cell.is_some()).collect();
    let energy = quantiles(
        covered_probes
            .iter()
            .map(|p| {
                let g = extruded(p);
                energy_v(&(0.5 * (g + g.transpose()))).map(|e| e.0).unwrap_or(f64::NAN)
            })
            .collect(),
    );
    let sampled_residual = 1.0 - covered_probes.len() as f64 / samples.max(1) as f64;
    let mut measures = Measures {
        good: 1.0 - sampled_residual,
        flagged: 0.0,
        residual: sampled_residual,
        source: MeasureSource::Sampled,
        sup_deviation: sup_dev,
    };
    let mut distance = None;

    match target {
        AuditTarget::Datum => {}
        AuditTarget::Wells { set, tol, quantile } => {
            let mut dists = Vec::with_capacity(covered_probes.len());
            let mut worst = Worst::new();
            let mut mismatch = None;
            for p in &covered_probes {
                if set.dimension() == 3 && !f.embed3d {
                    mismatch = Some(point(&p.x));
                }
                let d = probe_distance(p, set);
                worst.see(d, point(&p.x));
                dists.push(d);
            }
            let good = dists.iter().filter(|&&d| d <= *tol).count();
            measures.good = good as f64 / samples.max(1) as f64;
            measures.flagged = (dists.len() - good) as f64 / samples.max(1) as f64;
            let mut sorted = dists.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let qv = if sorted.is_empty() {
                0.0
            } else {
                sorted[((sorted.len() - 1) as f64 * quantile.clamp(0.0, 1.0)).round() as usize]
            };
            let witness = if qv > *tol { worst.witness } else { None };
            checks.push(Check { name: "well_distance".into(), pass: qv <= *tol, witness, margin: tol - qv });
            if let Some(w) = mismatch {
                checks.push(Check { name: "dimension".into(), pass: false, witness: Some(w), margin: -1.0 });
            }
            distance = quantiles(dists);
        }
        AuditTarget::Segment { a, b, eps, slack } => {
            let mut seg = Worst::new();
            let mut flagged_area = 0.0;
            let mut flagged_id = None;
            for c in &f.cells {
                for (t, g) in c.derived_pieces() {
                    seg.see(segment_distance(&g, a, b), Witness::Cell { id: c.id });
                    if (g - a).norm().min((g - b).norm()) >= *eps {
                        flagged_area += crate::geometry::region::polygon_area(&t).abs();
                        flagged_id.get_or_insert(c.id);
                    }
                }
            }
            for p in &covered_probes {
                seg.see(segment_distance(&p.grad, a, b), point(&p.x));
            }
            let mut sc = seg.check("segment_distance", *eps);
            // strict inequality
            sc.pass = sc.pass && sc.margin > 0.0;
            checks.push(sc);
            let flagged = flagged_area / area;
            let cov = covered / area;
            let bound = 5.0 / 6.0 * cov + residual + slack;
            checks.push(Check {
                name: "flagged_measure".into(),
                pass: flagged <= bound,
                witness: if flagged <= bound { None } else { flagged_id.map(|id| Witness::Cell { id }) },
                margin: bound - flagged,
            });
            let mut sc = sup_w.check("sup_deviation", *eps);
            sc.margin = eps - sup_dev;
            sc.pass = sup_dev < *eps;
            if sc.pass {
                sc.witness = None;
            }
            checks.push(sc);
            measures = Measures {
                good: cov - flagged,
                flagged,
                residual,
                source: MeasureSource::Ledger,
                sup_deviation: sup_dev,
            };
            distance = quantiles(covered_probes.iter().map(|p| segment_distance(&p.grad, a, b)).collect());
        }
    }

    if let (Some(b), false) = (opts.sup_bound, matches!(target, AuditTarget::Segment { .. })) {
        let mut sc = sup_w.check("sup_deviation", b);
        sc.margin = b - sup_dev;
        sc.pass = sup_dev < b;
        checks.push(sc);
    }

    // determinism: the first probes again, bit for bit
    let mut det = Worst::new();
    for (i, p) in probes.iter().take(64).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let x = f.domain.sample_interior(&mut rng);
        let q = probe(f, &x);
        if q != *p {
            det.see(1.0, point(&x));
        }
    }
    checks.push(det.check("determinism", 0.0));

    // a passing check carries no witness
    for c in &mut checks {
        if c.pass {
            c.witness = None;
        }
    }
    AuditReport { checks, measures, distance, energy, samples, seed, runtime: start.elapsed().as_secs_f64() }
}

/// Value jumps across piece edges and cell outlines, probed at third
/// points of every edge of a seeded subset of the cells.
fn continuity(f: &PiecewiseField, seed: u64, opts: &AuditOptions) -> Check {
    let tau = f.tau_cont();
    let n = f.cells.len();
    let picked: Vec<usize> = if n <= opts.continuity_cells {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0);
        let mut v: Vec<usize> = rand::seq::index::sample(&mut rng, n, opts.continuity_cells).into_vec();
        v.sort_unstable();
        v
    };
    let results: Vec<(f64, u64)> = picked
        .par_iter()
        .map(|&k| {
            let c = &f.cells[k];
            let own_pieces = c.derived_pieces();
            let own_v0: Vec<Vec2> = (0..own_pieces.len()).map(|q| piece_value0(c, q)).collect();
            let mut cache: HashMap<u64, Vec<([Vec2; 3], Mat2, Vec2)>> = HashMap::new();
            let mut worst: f64 = 0.0;
            let tol_c = 1e-10 * (1.0 + c.shape.diameter());
            for (x, own) in edge_points(c, &own_pieces, &own_v0) {
                let tol = tol_c * (1.0 + x.norm());
                let hits = f.cells_at(&x, tol);
                let mut others: Vec<Vec2> = Vec::new();
                for o in &hits {
                    if let Payload::Disk(d) = &o.payload {
                        others.push(d.eval_2d(&x).0);
                        continue;
                    }
                    let pieces = cache.entry(o.id).or_insert_with(|| {
                        o.derived_pieces().into_iter().enumerate().map(|(q, (t, g))| (t, g, piece_value0(o, q))).collect()
                    });
                    for (t, g, v0) in pieces.iter() {
                        let l = barycentric(t, &x);
                        let scale = (t[1] - t[0]).norm().max((t[2] - t[0]).norm()).max(f64::MIN_POSITIVE);
                        if l.iter().all(|&s| s >= -tol / scale) {
                            others.push(v0 + g * (x - t[0]));
                        }
                    }
                }
                let on_outline = match &c.shape {
                    Shape::Disk { center, radius } => ((x - center).norm() - radius).abs() <= tol,
                    s => dist_to_polygon_boundary(&s.outline(), &x) <= tol,
                };
                let neighbours = hits.iter().filter(|o| o.id != c.id).count();
                // on the domain boundary the trace check covers it
                if on_outline && neighbours == 0 && f.domain.boundary_distance(&x) > tol {
                    others.push(f.datum.eval(&x).0);
                }
                for v in others {
                    worst = worst.max((v - own).norm());
                }
            }
            (worst, c.id)
        })
        .collect();
    let mut w = Worst::new();
    for (v, id) in results {
        w.see(v, Witness::Cell { id });
    }
    w.check("continuity", tau)
}

/// Third points of every piece edge with the owning piece's value there.
fn edge_points(c: &Cell, pieces: &[([Vec2; 3], Mat2)], v0: &[Vec2]) -> Vec<(Vec2, Vec2)> {
    let mut out = Vec::new();
    match &c.payload {
        Payload::Disk(d) => {
            for k in 0..16 {
                let a = std::f64::consts::TAU * (k as f64 + 0.5) / 16.0;
                let x = d.center + Vec2::new(a.cos(), a.sin()) * d.radius;
                out.push((x, d.eval_2d(&x).0));
            }
        }
        _ => {
            // interior edges are shared by two pieces; probe each once
            let mut seen: Vec<(Vec2, Vec2)> = Vec::new();
            for ((t, g), v) in pieces.iter().zip(v0) {
                for i in 0..3 {
                    let (a, b) = (t[i], t[(i + 1) % 3]);
                    if seen.iter().any(|(p, q)| *p == b && *q == a) {
                        continue;
                    }
                    seen.push((a, b));
                    for s in [1.0 / 3.0, 2.0 / 3.0] {
                        let x = a + (b - a) * s;
                        out.push((x, v + g * (x - t[0])));
                    }
                }
            }
        }
    }
    out
}
