//! Trace-free matrix coordinates, closed-form spectra and energy densities.

mod energy;
mod spectral;
mod traceless;

pub use energy::{
    energy_v, energy_v_with, energy_vnc, energy_vqce_2d, energy_w, energy_w_with, energy_wn,
    energy_wn_with, l_n_sqrt, u_n, OgdenParams,
};
pub(crate) use energy::sym_values;
pub use spectral::{
    eig_sym, singular_values, singular_values_any, singular_values_with, spd_power,
    spd_trace_power, SpectralData, SymEigen,
};
pub use traceless::{skw_basis, sym_basis, sym_skw, Dense, TracelessMat, TracelessMat2, TracelessMat3};

pub type Mat2 = nalgebra::Matrix2<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

use crate::Tol;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("matrix is not symmetric (asymmetry {asym:e})")]
    NonSymmetricInput { asym: f64 },
    #[error("matrix is not trace-free (trace {trace:e})")]
    NonTracelessInput { trace: f64 },
    #[error("det F = {det} must be positive")]
    SingularInput { det: f64 },
    #[error("det F = {det} violates the determinant constraint")]
    DeterminantViolation { det: f64 },
    #[error("director has norm {norm}, expected 1")]
    NonUnitDirector { norm: f64 },
    #[error("director-dependent density needs the nematic parameter a")]
    MissingNematicParameter,
    #[error("invalid material parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch")]
    DimensionMismatch,
}

/// Result of [`rank_one_connection`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankOneReport {
    /// 0, 1 or 2 (2 also stands for "at least 2" in three dimensions).
    pub rank: u8,
    /// `(a3 - b3)^2 - |a - b|^2` in two dimensions.
    pub identity_residual: Option<f64>,
    /// Singular values of `A - B`, ascending.
    pub singular: [f64; 3],
}

impl RankOneReport {
    pub fn is_rank_one(&self) -> bool {
        self.rank == 1
    }
}

pub fn rank_one_connection(a: &TracelessMat, b: &TracelessMat) -> Result<RankOneReport, KernelError> {
    rank_one_connection_with(a, b, &Tol::default())
}

pub fn rank_one_connection_with(
    a: &TracelessMat,
    b: &TracelessMat,
    tol: &Tol,
) -> Result<RankOneReport, KernelError> {
    match (a, b) {
        (TracelessMat::Two(a), TracelessMat::Two(b)) => Ok(rank_one_2d(a, b, tol)),
        (TracelessMat::Three(a), TracelessMat::Three(b)) => {
            Ok(rank_one_dense3(&(a.to_matrix() - b.to_matrix()), tol))
        }
        _ => Err(KernelError::DimensionMismatch),
    }
}

pub(crate) fn rank_one_2d(a: &TracelessMat2, b: &TracelessMat2, tol: &Tol) -> RankOneReport {
    let d = *a - *b;
    let sym2 = d.a1 * d.a1 + d.a2 * d.a2;
    let skw2 = d.a3 * d.a3;
    let residual = skw2 - sym2;
    // singular values of [[d1, d2 + d3], [d2 - d3, -d1]] are | |d3| -+ |d| |
    let s_sym = sym2.sqrt();
    let s_skw = skw2.sqrt();
    let lo = (s_skw - s_sym).abs();
    let hi = s_skw + s_sym;
    let rank = if hi <= tol.rank {
        0
    } else if residual.abs() <= tol.rank * (sym2 + skw2).max(1.0) {
        1
    } else {
        2
    };
    RankOneReport { rank, identity_residual: Some(residual), singular: [0.0, lo, hi] }
}

pub(crate) fn rank_one_dense3(d: &Mat3, tol: &Tol) -> RankOneReport {
    let sv = singular_values_any(d, tol);
    let [l1, l2, l3] = sv.values;
    let rank = if l3 <= tol.rank {
        0
    } else if l2 <= tol.rank * l3 {
        1
    } else {
        2
    };
    RankOneReport { rank, identity_residual: None, singular: [l1, l2, l3] }
}
