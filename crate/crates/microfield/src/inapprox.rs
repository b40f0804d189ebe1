//! Staged in-approximations `U_1, U_2, ...` of the well sets: membership with
//! margins, constructive splits between consecutive sets, and validation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kernel::{self, Dense, Mat2, Mat3, OgdenParams, TracelessMat2, TracelessMat3, Vec3};
use crate::laminate::{split_2d, LaminateNode};
use crate::wells::{well_distance, WellSet};
use crate::Tol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Family {
    Lin2d,
    Lin3d,
    NonlinCase1,
    NonlinCase2,
    NonlinCase3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Clause {
    A,
    B,
    C,
    D,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InapproxError {
    #[error("datum too large: {0}")]
    DatumTooLarge(String),
    #[error("index {index} outside 1..={depth}")]
    IndexOutOfRange { index: usize, depth: usize },
    #[error("validation clause ({clause:?}) failed: {detail}; witness {witness:?}")]
    ValidationFailure { clause: Clause, witness: Vec<f64>, detail: String },
}

/// Strict membership together with the smallest slack of the defining
/// inequalities (positive inside).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Membership {
    pub inside: bool,
    pub margin: f64,
}

impl Membership {
    fn from_margin(margin: f64) -> Self {
        Membership { inside: margin > 0.0, margin }
    }
}

/// Finite prefix of an in-approximation. Sequences are stored 0-based so that
/// `r[i]` is `r_i`; entries with index 0 are auxiliary (see the builders).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InApproximation {
    pub dimension: usize,
    pub family: Family,
    pub depth: usize,
    pub r: Vec<f64>,
    pub m: Vec<f64>,
    pub eta: Vec<f64>,
    pub theta: Vec<f64>,
    pub e: [f64; 3],
    pub target: WellSet,
}

const Q: f64 = 0.75;

impl InApproximation {
    /// Two-dimensional sequence from raw radii `r_0, r_1, ...` and skew bound `m`;
    /// no invariant is checked here.
    pub fn lin2d_from_radii(r: Vec<f64>, m: f64) -> Self {
        let depth = r.len().saturating_sub(2);
        InApproximation {
            dimension: 2,
            family: Family::Lin2d,
            depth,
            r,
            m: vec![m],
            eta: Vec::new(),
            theta: Vec::new(),
            e: [0.0; 3],
            target: WellSet::Linear2dK0 { m },
        }
    }

    pub fn m2(&self) -> f64 {
        self.m[0]
    }

    fn check_index(&self, i: usize) -> Result<(), InapproxError> {
        if i == 0 || i > self.depth {
            return Err(InapproxError::IndexOutOfRange { index: i, depth: self.depth });
        }
        Ok(())
    }

    /// Membership-level parameter `alpha_i` for the three-dimensional split.
    pub fn alpha(&self, i: usize) -> f64 {
        0.5 * (self.r[i] + self.r[i + 1])
    }

    /// Split radius used to push `U_i` into `U_{i+1}` (two dimensions).
    pub fn r_tilde(&self, i: usize) -> f64 {
        0.5 * (self.r[i] + self.r[i + 1])
    }

    fn upper(&self, i: usize) -> f64 {
        match self.family {
            Family::NonlinCase1 => 1.0 / (self.eta[i] * self.eta[i]),
            Family::NonlinCase2 => self.theta[i],
            Family::NonlinCase3 => 1.0 / self.eta[i].sqrt(),
            _ => f64::NAN,
        }
    }

    /// Uniform bound on the Frobenius norm of every member.
    pub fn declared_bound(&self) -> f64 {
        match self.family {
            Family::Lin2d => (2.0 * Q * Q + 2.0 * self.m2() * self.m2()).sqrt(),
            Family::Lin3d => {
                let mmax = self.m.iter().cloned().fold(0.0, f64::max);
                (1.5 + mmax * mmax).sqrt()
            }
            _ => {
                let up = (1..self.eta.len()).map(|i| self.upper(i)).fold(0.0, f64::max);
                3f64.sqrt() * up
            }
        }
    }
}

/// Two-dimensional construction: `r_0 = (max(3/8, M) + 3/4) / 2` and
/// `r_i = 3/4 - (3/4 - r_0) / 2^i` for `i >= 1`.
pub fn build_inapprox_2d(bound_m: f64, m: f64, depth: usize) -> Result<InApproximation, InapproxError> {
    if !(bound_m < Q) {
        return Err(InapproxError::DatumTooLarge(format!(
            "ess sup |a(v)| = {bound_m} must be below 3/4 (|e(v)| < 3/(2 sqrt 2))"
        )));
    }
    if !(m > Q) {
        return Err(InapproxError::DatumTooLarge(format!("m = {m} must exceed 3/4")));
    }
    if depth < 2 {
        return Err(InapproxError::DatumTooLarge("depth must be at least 2".into()));
    }
    let r0 = 0.5 * (bound_m.max(0.375) + Q);
    let r: Vec<f64> = (0..=depth + 1).map(|i| Q - (Q - r0) / 2f64.powi(i as i32)).collect();
    Ok(InApproximation::lin2d_from_radii(r, m))
}

fn tail_inv4(i: usize) -> f64 {
    let total = std::f64::consts::PI.powi(4) / 90.0;
    total - (1..=i).map(|j| 1.0 / (j as f64).powi(4)).sum::<f64>()
}

/// Three-dimensional construction. `r_i = 1/2 - s * sum_{j > i} j^{-4}` with
/// the scale `s` chosen so that `r_1` sits halfway between the datum bound and
/// `1/2`; `m_1 = 1.5 max(3/4, grad_bound)` and
/// `m_{i+1} = m_i + 4.04 sqrt(r_{i+1} - r_{i-1})` with `r_0 = 0`.
pub fn build_inapprox_3d(
    mu1_inf: f64,
    mu3_sup: f64,
    grad_bound: f64,
    depth: usize,
) -> Result<InApproximation, InapproxError> {
    let need = (-mu1_inf).max(0.5 * mu3_sup);
    if !(mu1_inf > -0.5) || !(mu3_sup < 1.0) || !(need < 0.5) {
        return Err(InapproxError::DatumTooLarge(format!(
            "need mu1 > -1/2 and mu3 < 1, got ess inf mu1 = {mu1_inf}, ess sup mu3 = {mu3_sup}"
        )));
    }
    if depth < 2 {
        return Err(InapproxError::DatumTooLarge("depth must be at least 2".into()));
    }
    let r1 = 0.5 * (need.max(0.0) + 0.5);
    let s = (0.5 - r1) / tail_inv4(1);
    let mut r = vec![0.0];
    r.extend((1..=depth + 2).map(|i| 0.5 - s * tail_inv4(i)));
    let mut m = vec![0.0, 1.5 * grad_bound.max(Q)];
    for i in 1..=depth + 1 {
        let step = 4.04 * (r[i + 1] - r[i - 1]).sqrt();
        m.push(m[i] + step);
    }
    Ok(InApproximation {
        dimension: 3,
        family: Family::Lin3d,
        depth,
        r,
        m,
        eta: Vec::new(),
        theta: Vec::new(),
        e: [0.0; 3],
        target: WellSet::Linear3dK0,
    })
}

/// Nonlinear construction for `det F = 1` wells; the case follows from which
/// of the well values coincide. `eta_i = e1 + (eta_1 - e1) / 2^{i-1}` and
/// `theta_i = e3 - (e3 - theta_1) / 2^{i-1}`.
pub fn build_inapprox_nonlinear(
    p: &OgdenParams,
    lam1_inf: f64,
    lam3_sup: f64,
    depth: usize,
) -> Result<InApproximation, InapproxError> {
    let tol = Tol::default();
    let [e1, e2, e3] = p.e;
    if !(lam1_inf > e1) || !(lam3_sup < e3) {
        return Err(InapproxError::DatumTooLarge(format!(
            "need ess inf lambda1 > e1 = {e1} and ess sup lambda3 < e3 = {e3}"
        )));
    }
    if depth < 2 {
        return Err(InapproxError::DatumTooLarge("depth must be at least 2".into()));
    }
    let family = if (e2 - e1).abs() <= tol.spectral {
        Family::NonlinCase1
    } else if (e3 - e2).abs() <= tol.spectral {
        Family::NonlinCase3
    } else {
        Family::NonlinCase2
    };
    let eta_cap = match family {
        Family::NonlinCase1 => lam1_inf.min(1.0 / lam3_sup.sqrt()),
        Family::NonlinCase3 => lam1_inf.min(1.0 / (lam3_sup * lam3_sup)),
        _ => lam1_inf,
    };
    if !(eta_cap > e1) {
        return Err(InapproxError::DatumTooLarge(format!(
            "no eta_1 in (e1, {eta_cap}) keeps the datum inside U_1"
        )));
    }
    let eta1 = 0.5 * (e1 + eta_cap);
    let theta1 = 0.5 * (lam3_sup + e3);
    let n = depth + 2;
    let mut eta = vec![f64::NAN];
    let mut theta = vec![f64::NAN];
    for i in 1..=n {
        let h = 2f64.powi(i as i32 - 1);
        eta.push(e1 + (eta1 - e1) / h);
        theta.push(e3 - (e3 - theta1) / h);
    }
    if family != Family::NonlinCase2 {
        theta.clear();
    }
    Ok(InApproximation {
        dimension: 3,
        family,
        depth,
        r: Vec::new(),
        m: Vec::new(),
        eta,
        theta,
        e: p.e,
        target: WellSet::NonlinearK { e: p.e },
    })
}

/// Strict membership in `U_i` with margin.
pub fn inapprox_member(x: &Dense, seq: &InApproximation, i: usize) -> Result<Membership, InapproxError> {
    seq.check_index(i)?;
    Ok(member_unchecked(x, seq, i))
}

fn member_unchecked(x: &Dense, seq: &InApproximation, i: usize) -> Membership {
    match (seq.family, x) {
        (Family::Lin2d, Dense::Two(m)) => {
            if m.trace().abs() > 1e-12 * (1.0 + m.norm()) {
                return Membership { inside: false, margin: -m.trace().abs() };
            }
            member_2d(&TracelessMat2::project(m), seq, i)
        }
        (Family::Lin3d, Dense::Three(m)) => {
            if m.trace().abs() > 1e-12 * (1.0 + m.norm()) {
                return Membership { inside: false, margin: -m.trace().abs() };
            }
            member_3d(&TracelessMat3::project(m), seq, i)
        }
        (Family::NonlinCase1 | Family::NonlinCase2 | Family::NonlinCase3, Dense::Three(f)) => {
            member_nonlinear(f, seq, i)
        }
        _ => Membership { inside: false, margin: f64::NEG_INFINITY },
    }
}

pub fn member_2d(t: &TracelessMat2, seq: &InApproximation, i: usize) -> Membership {
    let m = seq.m2();
    let a = t.sym_norm();
    let s3 = t.a3.abs();
    let cone = a - (s3 - m + Q);
    let radial = if i == 1 {
        seq.r[0] - a
    } else {
        (a - seq.r[i - 1]).min(seq.r[i] - a)
    };
    Membership::from_margin(radial.min(m - s3).min(cone))
}

pub fn member_3d(t: &TracelessMat3, seq: &InApproximation, i: usize) -> Membership {
    let [mu1, mu2, mu3] = kernel::sym_values(&t.sym_matrix());
    let skw = seq.m[i] - t.skw_norm();
    let (lo, hi) = (seq.r[i - 1], seq.r[i]);
    let margin = if i == 1 {
        (mu1 + hi).min(2.0 * hi - mu3)
    } else {
        let w1 = (mu1 + hi).min(-lo - mu1);
        let w2 = (mu2 + hi).min(-lo - mu2);
        let w3 = (mu3 - 2.0 * lo).min(2.0 * hi - mu3);
        w1.min(w2).min(w3)
    };
    Membership::from_margin(margin.min(skw))
}

fn member_nonlinear(f: &Mat3, seq: &InApproximation, i: usize) -> Membership {
    let det = f.determinant();
    if (det - 1.0).abs() > 1e-9 {
        return Membership { inside: false, margin: -(det - 1.0).abs() };
    }
    let l = match kernel::singular_values(f) {
        Ok(sv) => sv.values,
        Err(_) => return Membership { inside: false, margin: f64::NEG_INFINITY },
    };
    let eta = &seq.eta;
    let window = |x: f64, lo: f64, hi: f64| (x - lo).min(hi - x);
    let margin = if i == 1 {
        let up = seq.upper(1);
        l.iter().map(|&x| window(x, eta[1], up)).fold(f64::INFINITY, f64::min)
    } else {
        let w1 = window(l[0], eta[i], eta[i - 1]);
        match seq.family {
            Family::NonlinCase1 => {
                let (a, b) = (1.0 / eta[i - 1].powi(2), 1.0 / eta[i].powi(2));
                w1.min(window(l[1], eta[i], eta[i - 1])).min(window(l[2], a, b))
            }
            Family::NonlinCase2 => {
                let th = &seq.theta;
                let w2 = window(l[1], 1.0 / (eta[i - 1] * th[i]), 1.0 / (eta[i] * th[i - 1]));
                w1.min(w2).min(window(l[2], th[i - 1], th[i]))
            }
            _ => {
                let (a, b) = (1.0 / eta[i - 1].sqrt(), 1.0 / eta[i].sqrt());
                w1.min(window(l[1], a, b)).min(window(l[2], a, b))
            }
        }
    };
    Membership::from_margin(margin)
}

/// Box `{Lambda(F) in (eta_j, upper_j)}` contained in `U_j^{lc}`.
pub fn hull_box_member(f: &Mat3, seq: &InApproximation, j: usize) -> Membership {
    let det = f.determinant();
    if (det - 1.0).abs() > 1e-9 {
        return Membership { inside: false, margin: -(det - 1.0).abs() };
    }
    let Ok(sv) = kernel::singular_values(f) else {
        return Membership { inside: false, margin: f64::NEG_INFINITY };
    };
    let (lo, hi) = (seq.eta[j], seq.upper(j));
    let margin = sv.values.iter().map(|&x| (x - lo).min(hi - x)).fold(f64::INFINITY, f64::min);
    Membership::from_margin(margin)
}

/// Leaves (with weights) of the constructive decomposition of a member of
/// `U_i` into members of `U_{i+1}`; `None` for the nonlinear families, whose
/// inclusion is checked through the hull box.
pub fn split_member(x: &Dense, seq: &InApproximation, i: usize) -> Option<Vec<(Dense, f64)>> {
    match (seq.family, x) {
        (Family::Lin2d, Dense::Two(m)) => {
            let c = TracelessMat2::project(m);
            let (a, b, l) = split_2d(&c, seq.r_tilde(i), seq.m2()).ok()?;
            Some(vec![(Dense::Two(a.to_matrix()), 1.0 - l), (Dense::Two(b.to_matrix()), l)])
        }
        (Family::Lin3d, Dense::Three(m)) => {
            let a = TracelessMat3::project(m);
            let tree = LaminateNode::two_level_3d(&a, seq.alpha(i), seq.m[i + 1]).ok()?;
            Some(
                tree.leaves()
                    .into_iter()
                    .map(|n| match n.matrix {
                        kernel::TracelessMat::Three(t) => (Dense::Three(t.to_matrix()), n.weight),
                        kernel::TracelessMat::Two(t) => (Dense::Two(t.to_matrix()), n.weight),
                    })
                    .collect(),
            )
        }
        _ => None,
    }
}

/// Uniformly random rotation from a random unit quaternion.
pub fn random_rotation<R: Rng>(rng: &mut R) -> Mat3 {
    let q = loop {
        let v = nalgebra::Vector4::<f64>::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.05 && n <= 1.0 {
            break v / n;
        }
    };
    let uq = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
    uq.to_rotation_matrix().into_inner()
}

/// Sampling frame shared along a chain.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub rot: Mat3,
    pub rot2: Mat3,
    pub angle: f64,
    pub skew_dir: Vec3,
}

impl Frame {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let skew_dir = random_rotation(rng) * Vec3::x();
        Frame {
            rot: random_rotation(rng),
            rot2: random_rotation(rng),
            angle: rng.gen_range(0.0..std::f64::consts::TAU),
            skew_dir,
        }
    }
}

/// Candidate member of `U_i` at relative position `u` (coordinates in
/// `(0,1)`) within the set's parameter box. Returns `None` when the
/// candidate falls outside (cone, ordering).
pub fn member_at(seq: &InApproximation, i: usize, u: [f64; 4], fr: &Frame) -> Option<Dense> {
    let x = match seq.family {
        Family::Lin2d => {
            let m = seq.m2();
            let a = if i == 1 {
                seq.r[0] * u[0].sqrt()
            } else {
                seq.r[i - 1] + u[0] * (seq.r[i] - seq.r[i - 1])
            };
            let a3 = (2.0 * u[1] - 1.0) * m;
            let t = TracelessMat2::new(a * fr.angle.cos(), a * fr.angle.sin(), a3);
            Dense::Two(t.to_matrix())
        }
        Family::Lin3d => {
            let (lo, hi) = (seq.r[i - 1], seq.r[i]);
            let (mu1, mu2) = if i == 1 {
                let mu1 = -hi + u[0] * hi;
                let mu2 = mu1 + u[1] * (2.0 * hi - mu1);
                (mu1, mu2)
            } else {
                (-hi + u[0] * (hi - lo), -hi + u[1] * (hi - lo))
            };
            let mu3 = -mu1 - mu2;
            let d = Mat3::from_diagonal(&Vec3::new(mu1, mu2, mu3));
            let sym = fr.rot * d * fr.rot.transpose();
            let k = fr.skew_dir * (u[2] * seq.m[i]);
            let skw = TracelessMat3 { s: [0.0; 5], k: [k.x, k.y, k.z] }.skw_matrix();
            let sym_t = TracelessMat3::project(&sym);
            Dense::Three(sym_t.sym_matrix() + skw)
        }
        _ => {
            let eta = &seq.eta;
            let lerp = |lo: f64, hi: f64, t: f64| lo + t * (hi - lo);
            let (l1, l2, l3) = if i == 1 {
                let up = seq.upper(1);
                let l1 = lerp(eta[1], up, u[0]);
                let l2 = lerp(eta[1], up, u[1]);
                (l1, l2, 1.0 / (l1 * l2))
            } else {
                match seq.family {
                    Family::NonlinCase1 => {
                        let l1 = lerp(eta[i], eta[i - 1], u[0]);
                        let l2 = lerp(eta[i], eta[i - 1], u[1]);
                        (l1, l2, 1.0 / (l1 * l2))
                    }
                    Family::NonlinCase2 => {
                        let th = &seq.theta;
                        let l1 = lerp(eta[i], eta[i - 1], u[0]);
                        let l3 = lerp(th[i - 1], th[i], u[1]);
                        (l1, 1.0 / (l1 * l3), l3)
                    }
                    _ => {
                        let l1 = lerp(eta[i], eta[i - 1], u[0]);
                        let (a, b) = (1.0 / eta[i - 1].sqrt(), 1.0 / eta[i].sqrt());
                        let l2 = lerp(a, b, u[1]);
                        (l1, l2, 1.0 / (l1 * l2))
                    }
                }
            };
            let d = Mat3::from_diagonal(&Vec3::new(l1, l2, l3));
            Dense::Three(fr.rot * d * fr.rot2)
        }
    };
    member_unchecked(&x, seq, i).inside.then_some(x)
}

pub fn sample_member<R: Rng>(seq: &InApproximation, i: usize, rng: &mut R) -> Option<Dense> {
    for _ in 0..1000 {
        let fr = Frame::random(rng);
        let u = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
        if let Some(x) = member_at(seq, i, u, &fr) {
            return Some(x);
        }
    }
    None
}

/// Outcome of the alternating-sequence check (odd sets replaced by hulls).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterexampleCheck {
    /// Distance to the wells of the constant chain `G, G, ...` through the odd sets.
    pub constant_distance: f64,
    /// `G` was verified to lie in every odd hull `U_{2k+1}^{lc}`.
    pub constant_in_odd_hulls: bool,
    /// Distances along the even subsequence of a full chain.
    pub even_distances: Vec<f64>,
    /// The constant chain converges to a point off the wells, so the limit
    /// condition fails for the alternating sequence.
    pub condition3_fails: bool,
    /// The even subsequence still converges.
    pub weak_condition_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub family: Family,
    pub samples: usize,
    pub declared_bound: f64,
    pub sampled_sup: f64,
    pub inclusion_min_margin: f64,
    pub recombination_error: f64,
    pub chains: usize,
    pub worst_chain_increase: f64,
    pub final_distance_p95: f64,
    pub counterexample: CounterexampleCheck,
}

fn witness(x: &Dense) -> Vec<f64> {
    match x {
        Dense::Two(m) => m.as_slice().to_vec(),
        Dense::Three(m) => m.as_slice().to_vec(),
    }
}

fn dense_sub(a: &Dense, b: &Dense) -> f64 {
    match (a, b) {
        (Dense::Two(x), Dense::Two(y)) => (x - y).norm(),
        (Dense::Three(x), Dense::Three(y)) => (x - y).norm(),
        _ => f64::INFINITY,
    }
}

fn dense_norm(a: &Dense) -> f64 {
    match a {
        Dense::Two(x) => x.norm(),
        Dense::Three(x) => x.norm(),
    }
}

fn combine(parts: &[(Dense, f64)]) -> Dense {
    match parts[0].0 {
        Dense::Two(_) => {
            let mut s = Mat2::zeros();
            for (d, w) in parts {
                if let Dense::Two(m) = d {
                    s += *w * m;
                }
            }
            Dense::Two(s)
        }
        Dense::Three(_) => {
            let mut s = Mat3::zeros();
            for (d, w) in parts {
                if let Dense::Three(m) = d {
                    s += *w * m;
                }
            }
            Dense::Three(s)
        }
    }
}

fn fail(clause: Clause, x: &Dense, detail: String) -> InapproxError {
    InapproxError::ValidationFailure { clause, witness: witness(x), detail }
}

/// Structural part of clause (c): the parameter sequences must converge
/// monotonically toward the wells.
fn check_sequences(seq: &InApproximation) -> Result<(), InapproxError> {
    let none = Dense::Two(Mat2::zeros());
    let strictly_up = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    match seq.family {
        Family::Lin2d => {
            if seq.r.len() < seq.depth + 2 || !strictly_up(&seq.r) || seq.r.iter().any(|&x| !(x < Q)) {
                return Err(fail(
                    Clause::C,
                    &none,
                    format!("radii must increase strictly toward 3/4, got {:?}", seq.r),
                ));
            }
        }
        Family::Lin3d => {
            if !strictly_up(&seq.r[1..]) || seq.r.iter().any(|&x| !(x < 0.5)) {
                return Err(fail(Clause::C, &none, format!("radii must increase toward 1/2: {:?}", seq.r)));
            }
            for i in 1..seq.m.len() - 1 {
                if !(seq.m[i + 1] > seq.m[i] + 4.0 * (seq.r[i + 1] - seq.r[i - 1]).sqrt()) {
                    return Err(fail(Clause::C, &none, format!("skew bound gap fails at i = {i}")));
                }
            }
        }
        _ => {
            let down = seq.eta[1..].windows(2).all(|w| w[1] < w[0]);
            if !down || seq.eta[1..].iter().any(|&x| !(x > seq.e[0])) {
                return Err(fail(Clause::C, &none, format!("eta must decrease toward e1: {:?}", seq.eta)));
            }
            if seq.family == Family::NonlinCase2 {
                let th = &seq.theta[1..];
                if !strictly_up(th) || th.iter().any(|&x| !(x < seq.e[2])) {
                    return Err(fail(Clause::C, &none, "theta must increase toward e3".into()));
                }
            }
        }
    }
    Ok(())
}

/// Checks boundedness (a), inclusion in the next hull (b), monotone
/// convergence of chains (c), and the alternating-sequence regression (d).
pub fn validate_inapprox(seq: &InApproximation, samples: usize, seed: u64) -> Result<ValidationReport, InapproxError> {
    if seq.depth < 2 {
        return Err(InapproxError::IndexOutOfRange { index: 2, depth: seq.depth });
    }
    check_sequences(seq)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = seq.declared_bound();
    let mut sup: f64 = 0.0;
    let mut min_margin = f64::INFINITY;
    let mut recomb: f64 = 0.0;
    let slack = 1e-3;

    for i in 1..=seq.depth {
        for _ in 0..samples {
            let Some(x) = sample_member(seq, i, &mut rng) else {
                return Err(fail(Clause::A, &Dense::Two(Mat2::zeros()), format!("U_{i} appears empty")));
            };
            let n = dense_norm(&x);
            sup = sup.max(n);
            if !(n <= bound) {
                return Err(fail(Clause::A, &x, format!("|F| = {n} exceeds declared bound {bound}")));
            }
            if i == seq.depth {
                continue;
            }
            match split_member(&x, seq, i) {
                Some(leaves) => {
                    recomb = recomb.max(dense_sub(&combine(&leaves), &x));
                    for (leaf, _) in &leaves {
                        let mb = member_unchecked(leaf, seq, i + 1);
                        if !mb.inside {
                            return Err(fail(Clause::B, &x, format!("split leaf leaves U_{} (margin {})", i + 1, mb.margin)));
                        }
                        min_margin = min_margin.min(mb.margin);
                    }
                }
                None => {
                    let Dense::Three(f) = x else { unreachable!() };
                    if matches!(seq.family, Family::Lin2d | Family::Lin3d) {
                        return Err(fail(Clause::B, &x, format!("no split from U_{i}")));
                    }
                    let mb = hull_box_member(&f, seq, i + 1);
                    if !mb.inside {
                        return Err(fail(Clause::B, &x, format!("not in the hull box of U_{}", i + 1)));
                    }
                    min_margin = min_margin.min(mb.margin);
                }
            }
        }
    }

    // clause (c): coherent chains from U_2 on
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut finals = Vec::new();
    let mut chains = 0;
    'chain: for _ in 0..samples {
        for _attempt in 0..100 {
            let fr = Frame::random(&mut rng);
            let u: [f64; 4] = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
            let pts: Option<Vec<Dense>> = (2..=seq.depth).map(|i| member_at(seq, i, u, &fr)).collect();
            let Some(pts) = pts else { continue };
            let d: Vec<f64> = pts.iter().map(|x| well_distance(x, &seq.target).unwrap_or(f64::NAN)).collect();
            for k in 1..d.len() {
                let inc = d[k] - d[k - 1];
                worst = worst.max(inc);
                if !(inc <= slack) {
                    return Err(fail(Clause::C, &pts[k], format!("distance rises from {} to {}", d[k - 1], d[k])));
                }
            }
            finals.push(*d.last().unwrap());
            chains += 1;
            continue 'chain;
        }
    }
    finals.sort_by(f64::total_cmp);
    let p95 = finals.get(((finals.len() as f64) * 0.95) as usize).copied().unwrap_or(f64::NAN);

    let counterexample = counterexample_check(seq, &mut rng)?;
    if !counterexample.condition3_fails || !counterexample.weak_condition_holds {
        return Err(fail(Clause::D, &Dense::Two(Mat2::zeros()), format!("{counterexample:?}")));
    }

    Ok(ValidationReport {
        family: seq.family,
        samples,
        declared_bound: bound,
        sampled_sup: sup,
        inclusion_min_margin: min_margin,
        recombination_error: recomb,
        chains,
        worst_chain_increase: worst,
        final_distance_p95: p95,
        counterexample,
    })
}

/// Does `x` decompose, by repeated constructive splits, into members of `U_j`?
fn reaches(x: &Dense, seq: &InApproximation, from: usize, j: usize) -> bool {
    if from == j {
        return member_unchecked(x, seq, j).inside;
    }
    match split_member(x, seq, from) {
        Some(leaves) => leaves.iter().all(|(l, _)| reaches(l, seq, from + 1, j)),
        None => false,
    }
}

fn counterexample_check<R: Rng>(seq: &InApproximation, rng: &mut R) -> Result<CounterexampleCheck, InapproxError> {
    let g = sample_member(seq, 1, rng)
        .ok_or_else(|| fail(Clause::D, &Dense::Two(Mat2::zeros()), "U_1 empty".into()))?;
    let constant_distance = well_distance(&g, &seq.target).unwrap_or(f64::NAN);
    let odd_limit = seq.depth.min(5);
    let mut in_hulls = true;
    for j in (3..=odd_limit).step_by(2) {
        let ok = match (&g, seq.family) {
            (Dense::Three(f), Family::NonlinCase1 | Family::NonlinCase2 | Family::NonlinCase3) => {
                hull_box_member(f, seq, j).inside
            }
            _ => reaches(&g, seq, 1, j),
        };
        in_hulls &= ok;
    }
    let fr = Frame::random(rng);
    let u: [f64; 4] = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
    let mut even = Vec::new();
    for i in (2..=seq.depth).step_by(2) {
        let x = member_at(seq, i, u, &fr).or_else(|| sample_member(seq, i, rng));
        if let Some(x) = x {
            even.push(well_distance(&x, &seq.target).unwrap_or(f64::NAN));
        }
    }
    let weak = even.windows(2).all(|w| w[1] <= w[0] + 1e-3) && even.last().map_or(false, |&d| d < constant_distance);
    Ok(CounterexampleCheck {
        constant_distance,
        constant_in_odd_hulls: in_hulls,
        even_distances: even,
        condition3_fails: in_hulls && constant_distance > 1e-6,
        weak_condition_holds: weak,
    })
}
