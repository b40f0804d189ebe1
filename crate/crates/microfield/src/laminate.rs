//! Rank-one laminate splits and sampled lamination hulls.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kernel::{
    self, rank_one_2d, rank_one_dense3, Mat2, Mat3, TracelessMat, TracelessMat2, TracelessMat3,
    Vec3,
};
use crate::Tol;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LaminateError {
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
}

fn violation<T>(msg: String) -> Result<T, LaminateError> {
    Err(LaminateError::PreconditionViolation(msg))
}

/// First-order split of `C` into `A`, `B` with `|a| = |b| = r_tilde` and
/// `C = (1 - lambda) A + lambda B`. Returns `(A, B, lambda)`.
///
/// Inputs with `c3 < 0` are mirrored in the skew coordinate, split, and
/// mirrored back.
pub fn split_2d(
    c: &TracelessMat2,
    r_tilde: f64,
    m: f64,
) -> Result<(TracelessMat2, TracelessMat2, f64), LaminateError> {
    if c.a3 < 0.0 {
        let (a, b, l) = split_2d(&c.mirrored(), r_tilde, m)?;
        return Ok((a.mirrored(), b.mirrored(), l));
    }
    let nc = c.sym_norm();
    if !(nc > 0.0) {
        return violation("|c| > 0 (the split direction is c/|c|)".into());
    }
    if !(nc < r_tilde) {
        return violation(format!("|c| = {nc} < r_tilde = {r_tilde}"));
    }
    if !(c.a3 < m) {
        return violation(format!("|c3| = {} < m = {m}", c.a3));
    }
    if c.a3 > m - 0.75 && !(nc >= c.a3 - m + 0.75) {
        return violation(format!(
            "cone exclusion |c| >= |c3| - m + 3/4 fails: {nc} < {}",
            c.a3 - m + 0.75
        ));
    }
    let dir = c.sym_coords() / nc;
    let a = TracelessMat2::from_parts(dir * r_tilde, c.a3 - nc + r_tilde);
    let b = TracelessMat2::from_parts(-dir * r_tilde, c.a3 - nc - r_tilde);
    let lambda = (r_tilde - nc) / (2.0 * r_tilde);
    Ok((a, b, lambda))
}

/// One level of the three-dimensional split; `C = (plus + minus) / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split3 {
    pub plus: TracelessMat3,
    pub minus: TracelessMat3,
    /// `delta` for the first level, `epsilon` for the second.
    pub amplitude: f64,
}

/// Moves the lowest symmetric eigenvalue to `-alpha`:
/// `B± = A ± 2 delta v1 v3^T`, `delta = sqrt((alpha + mu1)(alpha + mu3))`.
pub fn split_3d_first(a: &TracelessMat3, alpha: f64) -> Result<Split3, LaminateError> {
    split_3d_first_with(a, alpha, &Tol::default())
}

pub fn split_3d_first_with(a: &TracelessMat3, alpha: f64, tol: &Tol) -> Result<Split3, LaminateError> {
    let sd = kernel::eig_sym(&a.sym_matrix()).expect("symmetric by construction");
    let [mu1, _, mu3] = sd.values;
    if mu1 < -alpha - tol.spectral {
        return violation(format!("mu1(sym A) = {mu1} > -alpha = {}", -alpha));
    }
    let delta = ((alpha + mu1).max(0.0) * (alpha + mu3).max(0.0)).sqrt();
    let v1 = sd.frame.column(0).into_owned();
    let v3 = sd.frame.column(2).into_owned();
    Ok(perturb(a, &v1, &v3, delta))
}

/// Moves the two upper symmetric eigenvalues of `B` (lowest already at
/// `-alpha`) to `(-alpha, 2 alpha)`: `C± = B ± 2 eps v2 v3^T`.
pub fn split_3d_second(b: &TracelessMat3, alpha: f64, m_next: f64) -> Result<Split3, LaminateError> {
    split_3d_second_with(b, alpha, m_next, &Tol::default())
}

pub fn split_3d_second_with(
    b: &TracelessMat3,
    alpha: f64,
    m_next: f64,
    tol: &Tol,
) -> Result<Split3, LaminateError> {
    let sd = kernel::eig_sym(&b.sym_matrix()).expect("symmetric by construction");
    let [mu1, mu2, mu3] = sd.values;
    if (mu1 + alpha).abs() > tol.spectral.max(1e-9) * (1.0 + alpha) {
        return violation(format!("mu1(sym B) = {mu1} must equal -alpha = {}", -alpha));
    }
    if mu3 > 2.0 * alpha + tol.spectral {
        return violation(format!("mu3(sym B) = {mu3} < 2 alpha = {}", 2.0 * alpha));
    }
    let eps = ((2.0 * alpha - mu2).max(0.0) * (2.0 * alpha - mu3).max(0.0)).sqrt();
    let v2 = sd.frame.column(1).into_owned();
    let v3 = sd.frame.column(2).into_owned();
    let out = perturb(b, &v2, &v3, eps);
    let skw = out.plus.skw_norm().max(out.minus.skw_norm());
    if !(skw < m_next) {
        return violation(format!("|skw C| = {skw} < m_next = {m_next}"));
    }
    Ok(out)
}

fn perturb(a: &TracelessMat3, u: &Vec3, v: &Vec3, amp: f64) -> Split3 {
    let p = TracelessMat3::project(&(2.0 * amp * u * v.transpose()));
    Split3 { plus: *a + p, minus: *a - p, amplitude: amp }
}

/// Node of a laminate tree. `weight` is the volume fraction of the node in
/// the root; `lambda` the weight of the second child.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaminateNode {
    pub matrix: TracelessMat,
    pub weight: f64,
    pub level: u32,
    pub lambda: Option<f64>,
    pub children: Vec<LaminateNode>,
}

impl LaminateNode {
    pub fn leaf(matrix: TracelessMat, weight: f64, level: u32) -> Self {
        LaminateNode { matrix, weight, level, lambda: None, children: Vec::new() }
    }

    pub fn split_2d(c: &TracelessMat2, r_tilde: f64, m: f64) -> Result<Self, LaminateError> {
        let (a, b, l) = split_2d(c, r_tilde, m)?;
        Ok(LaminateNode {
            matrix: (*c).into(),
            weight: 1.0,
            level: 0,
            lambda: Some(l),
            children: vec![
                Self::leaf(a.into(), 1.0 - l, 1),
                Self::leaf(b.into(), l, 1),
            ],
        })
    }

    /// Two-level tree: four leaves with equal weights.
    pub fn two_level_3d(a: &TracelessMat3, alpha: f64, m_next: f64) -> Result<Self, LaminateError> {
        let first = split_3d_first(a, alpha)?;
        let mut children = Vec::new();
        for b in [first.plus, first.minus] {
            let second = split_3d_second(&b, alpha, m_next)?;
            children.push(LaminateNode {
                matrix: b.into(),
                weight: 0.5,
                level: 1,
                lambda: Some(0.5),
                children: vec![
                    Self::leaf(second.plus.into(), 0.25, 2),
                    Self::leaf(second.minus.into(), 0.25, 2),
                ],
            });
        }
        Ok(LaminateNode { matrix: (*a).into(), weight: 1.0, level: 0, lambda: Some(0.5), children })
    }

    pub fn leaves(&self) -> Vec<&LaminateNode> {
        if self.children.is_empty() {
            return vec![self];
        }
        self.children.iter().flat_map(|c| c.leaves()).collect()
    }

    /// Largest recombination error and whether every split is rank-one.
    pub fn check(&self) -> (f64, bool) {
        if self.children.is_empty() {
            return (0.0, true);
        }
        let l = self.lambda.unwrap_or(0.5);
        let (x, y) = (&self.children[0].matrix, &self.children[1].matrix);
        let tol = Tol::default();
        let (err, rank1) = match (&self.matrix, x, y) {
            (TracelessMat::Two(p), TracelessMat::Two(a), TracelessMat::Two(b)) => {
                let r = (1.0 - l) * a.to_matrix() + l * b.to_matrix() - p.to_matrix();
                (r.norm(), rank_one_2d(a, b, &tol).rank <= 1)
            }
            (TracelessMat::Three(p), TracelessMat::Three(a), TracelessMat::Three(b)) => {
                let r = (1.0 - l) * a.to_matrix() + l * b.to_matrix() - p.to_matrix();
                let d = a.to_matrix() - b.to_matrix();
                (r.norm(), rank_one_dense3(&d, &tol).rank <= 1)
            }
            _ => (f64::INFINITY, false),
        };
        self.children.iter().map(|c| c.check()).fold((err, rank1), |(e, ok), (ce, cok)| {
            (e.max(ce), ok && cok)
        })
    }
}

/// Sampled lamination hull of order `order` generated from `seeds`: pairs of
/// rank-one connected points are interpolated at random weights.
pub fn hull_expand_2d(seeds: &[Mat2], order: usize, samples: usize, seed: u64) -> Vec<Mat2> {
    let tol = Tol::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<Mat2> = seeds.to_vec();
    for _ in 0..order.min(3) {
        let prev = pool.clone();
        let mut made = 0;
        let mut tries = 0;
        while made < samples && tries < samples * 50 && prev.len() >= 2 {
            tries += 1;
            let i = rng.gen_range(0..prev.len());
            let j = rng.gen_range(0..prev.len());
            let (a, b) = (TracelessMat2::project(&prev[i]), TracelessMat2::project(&prev[j]));
            if rank_one_2d(&a, &b, &tol).rank != 1 {
                continue;
            }
            let t: f64 = rng.gen();
            pool.push((1.0 - t) * prev[i] + t * prev[j]);
            made += 1;
        }
    }
    pool
}

/// Same for 3x3 seeds. When `k_values` is given, level-one connections are
/// solved for: from `A` with `A^T A` having the prescribed singular values,
/// `B = A (I + c d^T)` with `c` orthogonal to `d` keeps `det` and the two
/// remaining invariants of `B^T B`.
pub fn hull_expand_3d(
    seeds: &[Mat3],
    order: usize,
    samples: usize,
    seed: u64,
    k_values: Option<[f64; 3]>,
) -> Vec<Mat3> {
    let tol = Tol::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // (matrix, family): points in a family are pairwise rank-one connected
    let mut pool: Vec<(Mat3, usize)> = seeds.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    let mut next_family = seeds.len();
    for level in 0..order.min(3) {
        let prev = pool.clone();
        let mut members: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
        for (k, (_, fam)) in prev.iter().enumerate() {
            members.entry(*fam).or_default().push(k);
        }
        let mut made = 0;
        let mut tries = 0;
        while made < samples && tries < samples * 50 && !prev.is_empty() {
            tries += 1;
            if level == 0 && k_values.is_some() {
                let (a, _) = prev[rng.gen_range(0..prev.len())];
                let d = random_unit(&mut rng);
                let mut targets = connections(&a, &d);
                if targets.is_empty() {
                    // tangential roots (repeated singular values): solve the
                    // twin equation against another well member instead
                    let e = k_values.expect("checked above");
                    let g = crate::inapprox::random_rotation(&mut rng)
                        * Mat3::from_diagonal(&Vec3::from(e))
                        * crate::inapprox::random_rotation(&mut rng);
                    targets = twins(&a, &g);
                }
                if targets.is_empty() {
                    continue;
                }
                let fam = next_family;
                next_family += 1;
                for b in targets {
                    let t: f64 = rng.gen();
                    pool.push(((1.0 - t) * a + t * b, fam));
                    made += 1;
                }
                pool.push((a, fam));
                continue;
            }
            let i = rng.gen_range(0..prev.len());
            let j = if k_values.is_some() {
                let fam = &members[&prev[i].1];
                fam[rng.gen_range(0..fam.len())]
            } else {
                rng.gen_range(0..prev.len())
            };
            let d = prev[i].0 - prev[j].0;
            if rank_one_dense3(&d, &tol).rank != 1 {
                continue;
            }
            let t: f64 = rng.gen();
            pool.push(((1.0 - t) * prev[i].0 + t * prev[j].0, prev[i].1));
            made += 1;
        }
    }
    pool.into_iter().map(|(m, _)| m).collect()
}

/// Both `B = (I + a n^T) F` with `B = Q G` for a rotation `Q`, when the
/// middle eigenvalue of `F^-T G^T G F^-1` is one.
fn twins(f: &Mat3, g: &Mat3) -> Vec<Mat3> {
    let Some(fi) = f.try_inverse() else { return Vec::new() };
    let h = g * fi;
    let Ok(sd) = crate::kernel::eig_sym(&(h.transpose() * h)) else { return Vec::new() };
    let [l1, l2, l3] = sd.values;
    if (l2 - 1.0).abs() > 1e-9 || l3 - l1 < 1e-9 {
        return Vec::new();
    }
    let (e1, e3) = (sd.frame.column(0).into_owned(), sd.frame.column(2).into_owned());
    let gap = l3 - l1;
    let scale = (l3.sqrt() - l1.sqrt()) / gap.sqrt();
    [1.0, -1.0]
        .iter()
        .map(|&k| {
            let a = e1 * (l3 * (1.0 - l1) / gap).max(0.0).sqrt() + e3 * (k * (l1 * (l3 - 1.0) / gap).max(0.0).sqrt());
            let n = (e1 * -(1.0 - l1).max(0.0).sqrt() + e3 * (k * (l3 - 1.0).max(0.0).sqrt())) * scale;
            (Mat3::identity() + a * n.transpose()) * f
        })
        .collect()
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn second_invariant(m: &Mat3) -> f64 {
    0.5 * (m.trace().powi(2) - (m * m).trace())
}

/// All `B = A (I + rho w d^T)` with `w` unit, `w . d = 0`, `rho != 0`, and
/// `B^T B` isospectral to `A^T A`.
fn connections(a: &Mat3, d: &Vec3) -> Vec<Mat3> {
    let c = a.transpose() * a;
    let i2 = second_invariant(&c);
    let (u1, u2) = {
        let pick = if d.x.abs() < 0.6 { Vec3::x() } else { Vec3::y() };
        let u1 = (pick - d * d.dot(&pick)).normalize();
        (u1, d.cross(&u1))
    };
    let cand = |phi: f64| -> Option<(f64, Mat3)> {
        let w = u1 * phi.cos() + u2 * phi.sin();
        let den = w.dot(&(c * w));
        if den.abs() < 1e-300 {
            return None;
        }
        // the first invariant is preserved by this choice of rho
        let rho = -2.0 * w.dot(&(c * d)) / den;
        let b = a * (Mat3::identity() + rho * w * d.transpose());
        Some((rho, b))
    };
    let f = |phi: f64| -> Option<f64> {
        cand(phi).map(|(_, b)| second_invariant(&(b.transpose() * b)) - i2)
    };
    let n = 720;
    let mut out = Vec::new();
    let step = std::f64::consts::PI / n as f64;
    let mut prev = f(0.0);
    for k in 1..=n {
        let phi = k as f64 * step;
        let cur = f(phi);
        if let (Some(p), Some(q)) = (prev, cur) {
            if p * q < 0.0 {
                let (mut lo, mut hi, mut flo) = (phi - step, phi, p);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let fm = f(mid).unwrap_or(0.0);
                    if fm * flo <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                }
                if let Some((rho, b)) = cand(0.5 * (lo + hi)) {
                    let bb = b.transpose() * b;
                    let ok = (second_invariant(&bb) - i2).abs() < 1e-9 * (1.0 + i2.abs());
                    if rho.abs() > 1e-6 && ok {
                        out.push(b);
                    }
                }
            }
        }
        prev = cur;
    }
    out
}
