use serde::{Deserialize, Serialize};

use super::spectral::{eig3, singular_values_with, spd_trace_power};
use super::{KernelError, Mat2, Mat3, Vec3};
use crate::Tol;

/// Ogden-type material constants with the well singular values `e`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OgdenParams {
    pub c: Vec<f64>,
    pub gamma: Vec<f64>,
    pub e: [f64; 3],
    /// Nematic parameter; when present `e = (a^{-1/6}, a^{-1/6}, a^{1/3})`.
    pub a: Option<f64>,
    pub c_vol: f64,
}

impl OgdenParams {
    pub fn new(c: Vec<f64>, gamma: Vec<f64>, e: [f64; 3], c_vol: f64) -> Result<Self, KernelError> {
        let p = OgdenParams { c, gamma, e, a: None, c_vol };
        p.validate()?;
        Ok(p)
    }

    pub fn nematic(a: f64, c: Vec<f64>, gamma: Vec<f64>, c_vol: f64) -> Result<Self, KernelError> {
        if !(a > 1.0) {
            return Err(KernelError::InvalidParams(format!("nematic parameter a = {a} must exceed 1")));
        }
        let e1 = a.powf(-1.0 / 6.0);
        let p = OgdenParams { c, gamma, e: [e1, e1, a.cbrt()], a: Some(a), c_vol };
        p.validate()?;
        Ok(p)
    }

    pub fn terms(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let bad = |m: String| Err(KernelError::InvalidParams(m));
        if self.c.is_empty() || self.c.len() != self.gamma.len() {
            return bad("c and gamma must be non-empty and of equal length".into());
        }
        if self.c.iter().any(|&c| !(c > 0.0)) {
            return bad("all c_i must be positive".into());
        }
        if self.gamma.iter().any(|&g| !(g >= 2.0)) {
            return bad("all gamma_i must be at least 2".into());
        }
        let [e1, e2, e3] = self.e;
        if !(e1 > 0.0 && e1 <= e2 && e2 <= e3 && e1 < e3) {
            return bad(format!("e = {:?} must be positive, ordered, with e1 < e3", self.e));
        }
        if ((e1 * e2 * e3) - 1.0).abs() > 1e-9 {
            return bad(format!("e1 e2 e3 = {} must equal 1", e1 * e2 * e3));
        }
        if !(self.c_vol > 0.0) {
            return bad("c_vol must be positive".into());
        }
        Ok(())
    }

    /// `sum c_i gamma_i`
    pub fn stiffness(&self) -> f64 {
        self.c.iter().zip(&self.gamma).map(|(c, g)| c * g).sum()
    }
}

/// Spontaneous strain `U_n = (3 n n^T - I) / 2`.
pub fn u_n(n: &Vec3) -> Mat3 {
    1.5 * n * n.transpose() - 0.5 * Mat3::identity()
}

fn check_unit(n: &Vec3, tol: &Tol) -> Result<(), KernelError> {
    let norm = n.norm();
    if (norm - 1.0).abs() > tol.sym {
        return Err(KernelError::NonUnitDirector { norm });
    }
    Ok(())
}

/// `W(F) = sum c_i / gamma_i * (sum_j (lambda_j / e_j)^gamma_i - 3)`.
pub fn energy_w(f: &Mat3, p: &OgdenParams) -> Result<f64, KernelError> {
    energy_w_with(f, p, &Tol::default())
}

pub fn energy_w_with(f: &Mat3, p: &OgdenParams, tol: &Tol) -> Result<f64, KernelError> {
    let det = f.determinant();
    if (det - 1.0).abs() > tol.det {
        return Err(KernelError::DeterminantViolation { det });
    }
    let sv = singular_values_with(f, tol)?;
    let mut w = 0.0;
    for (c, g) in p.c.iter().zip(&p.gamma) {
        let s: f64 = (0..3).map(|j| (sv.values[j] / p.e[j]).powf(*g)).sum();
        w += c / g * (s - 3.0);
    }
    Ok(w)
}

/// Square roots of the step tensor `L_n` and of its inverse. Only the
/// uniaxial (nematic) case has a director-dependent step tensor.
pub fn l_n_sqrt(n: &Vec3, p: &OgdenParams) -> Result<(Mat3, Mat3), KernelError> {
    let a = p.a.ok_or(KernelError::MissingNematicParameter)?;
    let nn = n * n.transpose();
    let perp = Mat3::identity() - nn;
    let e3 = a.cbrt();
    let e1 = a.powf(-1.0 / 6.0);
    Ok((nn * e3 + perp * e1, nn / e3 + perp / e1))
}

/// Director-dependent density. In compressible mode the volumetric factor
/// `(det F)^{-gamma/3}` and the penalty `c_vol (t^2 - 1 - 2 log t)` apply.
pub fn energy_wn(f: &Mat3, n: &Vec3, p: &OgdenParams, compressible: bool) -> Result<f64, KernelError> {
    energy_wn_with(f, n, p, compressible, &Tol::default())
}

pub fn energy_wn_with(
    f: &Mat3,
    n: &Vec3,
    p: &OgdenParams,
    compressible: bool,
    tol: &Tol,
) -> Result<f64, KernelError> {
    check_unit(n, tol)?;
    let det = f.determinant();
    if compressible {
        if det <= 0.0 {
            return Err(KernelError::DeterminantViolation { det });
        }
    } else if (det - 1.0).abs() > tol.det {
        return Err(KernelError::DeterminantViolation { det });
    }
    let (_, l_inv_half) = l_n_sqrt(n, p)?;
    let m = l_inv_half * f * f.transpose() * l_inv_half;
    let m = 0.5 * (m + m.transpose());
    let mut w = 0.0;
    for (c, g) in p.c.iter().zip(&p.gamma) {
        let tr = spd_trace_power(&m, 0.5 * g);
        let vol = if compressible { det.powf(-g / 3.0) } else { 1.0 };
        w += c / g * (vol * tr - 3.0);
    }
    if compressible {
        w += p.c_vol * (det * det - 1.0 - 2.0 * det.ln());
    }
    Ok(w)
}

/// Closed form of `min_n |E - U_n|^2` with the minimising director.
pub fn energy_v(e: &Mat3) -> Result<(f64, Vec3), KernelError> {
    energy_v_with(e, &Tol::default())
}

pub fn energy_v_with(e: &Mat3, tol: &Tol) -> Result<(f64, Vec3), KernelError> {
    let sd = super::spectral::SymEigen::eig_sym_with(e, tol)?;
    let tr = e.trace();
    if tr.abs() > tol.sym * (1.0 + e.norm()) {
        return Err(KernelError::NonTracelessInput { trace: tr });
    }
    let [m1, m2, m3] = sd.values;
    let v = (m1 + 0.5).powi(2) + (m2 + 0.5).powi(2) + (m3 - 1.0).powi(2);
    Ok((v, sd.frame.column(2).into_owned()))
}

/// Squared Frobenius distance to the strain ball of radius `3 / (2 sqrt 2)`.
pub fn energy_vqce_2d(e: &Mat2) -> Result<f64, KernelError> {
    let tol = Tol::default();
    let tr = e.trace();
    if tr.abs() > tol.sym * (1.0 + e.norm()) {
        return Err(KernelError::NonTracelessInput { trace: tr });
    }
    let asym = (e[(0, 1)] - e[(1, 0)]).abs();
    if asym > tol.sym * (1.0 + e.norm()) {
        return Err(KernelError::NonSymmetricInput { asym });
    }
    let r = 3.0 / (2.0 * std::f64::consts::SQRT_2);
    Ok((e.norm() - r).max(0.0).powi(2))
}

/// Quadratic limit of the compressible density around `U_n`.
pub fn energy_vnc(e: &Mat3, n: &Vec3, p: &OgdenParams) -> Result<f64, KernelError> {
    check_unit(n, &Tol::default())?;
    let k = p.stiffness();
    let d = e - u_n(n);
    let tr = e.trace();
    Ok(0.5 * k * d.norm_squared() + (-k / 6.0 + 2.0 * p.c_vol) * tr * tr)
}

/// Eigenvalues of a symmetric 3x3 without validation, for internal use.
pub(crate) fn sym_values(e: &Mat3) -> [f64; 3] {
    eig3(e, 1e-9).values
}
