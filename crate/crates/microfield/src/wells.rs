//! Well sets and their distance functionals.

use serde::{Deserialize, Serialize};

use crate::kernel::{self, Dense, KernelError, Mat2, Mat3, TracelessMat2};
use crate::Tol;

/// Zero sets of the energy densities, plus the hull and ball variants used
/// as intermediate targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WellSet {
    /// `det F = 1` and singular values equal to `e`.
    NonlinearK { e: [f64; 3] },
    /// Trace-free 2x2 with `|a| = 3/4` and `|a3| <= m`.
    Linear2dK0 { m: f64 },
    /// Trace-free 3x3 whose symmetric part has spectrum `(-1/2, -1/2, 1)`.
    Linear3dK0,
    /// Symmetric spectrum `(-alpha, -alpha, 2 alpha)` and `|skw| < m`.
    Kalpha { alpha: f64, m: f64 },
    /// `det F = 1` with all singular values in `[e1, e3]`.
    HullNonlinear { e: [f64; 3] },
    /// Symmetric trace-free 2x2 strains of norm at most `3 / (2 sqrt 2)`.
    Ball2dQce,
}

impl WellSet {
    pub fn dimension(&self) -> usize {
        match self {
            WellSet::Linear2dK0 { .. } | WellSet::Ball2dQce => 2,
            _ => 3,
        }
    }
}

fn dims(a: &Dense) -> usize {
    match a {
        Dense::Two(_) => 2,
        Dense::Three(_) => 3,
    }
}

/// Distance-like margin, zero exactly on the closure of the well.
pub fn well_distance(a: &Dense, w: &WellSet) -> Result<f64, KernelError> {
    if dims(a) != w.dimension() {
        return Err(KernelError::DimensionMismatch);
    }
    match (a, w) {
        (Dense::Two(m), WellSet::Linear2dK0 { m: skew_bound }) => {
            let t = TracelessMat2::project(m);
            Ok(dist_k0_2d(&t, *skew_bound))
        }
        (Dense::Two(m), WellSet::Ball2dQce) => {
            let s = 0.5 * (m + m.transpose());
            let r = 3.0 / (2.0 * std::f64::consts::SQRT_2);
            Ok((s.norm() - r).max(0.0))
        }
        (Dense::Three(m), WellSet::Linear3dK0) => Ok(spectrum_gap(m, [-0.5, -0.5, 1.0])),
        (Dense::Three(m), WellSet::Kalpha { alpha, m: bound }) => {
            let al = *alpha;
            let skw = 0.5 * (m - m.transpose());
            Ok(spectrum_gap(m, [-al, -al, 2.0 * al]) + (skw.norm() - bound).max(0.0))
        }
        (Dense::Three(f), WellSet::NonlinearK { e }) => {
            let sv = kernel::singular_values(f)?;
            let d: f64 = (0..3).map(|i| (sv.values[i] - e[i]).powi(2)).sum();
            Ok(d.sqrt())
        }
        (Dense::Three(f), WellSet::HullNonlinear { e }) => {
            let sv = kernel::singular_values(f)?;
            let d: f64 = sv
                .values
                .iter()
                .map(|&l| ((e[0] - l).max(0.0) + (l - e[2]).max(0.0)).powi(2))
                .sum();
            Ok(d.sqrt() + (f.determinant() - 1.0).abs())
        }
        _ => Err(KernelError::DimensionMismatch),
    }
}

pub fn dist_k0_2d(t: &TracelessMat2, m: f64) -> f64 {
    (t.sym_norm() - 0.75).abs() + (t.a3.abs() - m).max(0.0)
}

fn spectrum_gap(m: &Mat3, target: [f64; 3]) -> f64 {
    let s = 0.5 * (m + m.transpose());
    let mu = kernel::eig_sym(&s).map(|sd| sd.values).unwrap_or([f64::NAN; 3]);
    (0..3).map(|i| (mu[i] - target[i]).powi(2)).sum::<f64>().sqrt()
}

/// Membership in the closure of `w` up to `tol`.
pub fn in_well(a: &Dense, w: &WellSet, tol: &Tol) -> bool {
    match well_distance(a, w) {
        Ok(d) => d <= tol.spectral.max(1e-9),
        Err(_) => false,
    }
}

/// The matrix `E` with a single unit entry in the upper right corner.
pub fn matrix_e() -> Mat2 {
    Mat2::new(0.0, 1.0, 0.0, 0.0)
}
