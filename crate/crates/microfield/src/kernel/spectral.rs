use nalgebra::SMatrix;

use super::{KernelError, Mat2, Mat3, Vec3};
use crate::Tol;

/// Ascending eigenvalues (or singular values) with orthonormal columns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralData<const N: usize> {
    pub values: [f64; N],
    pub frame: SMatrix<f64, N, N>,
}

impl<const N: usize> SpectralData<N> {
    pub fn reconstruct(&self) -> SMatrix<f64, N, N> {
        let mut d = SMatrix::<f64, N, N>::zeros();
        for i in 0..N {
            d[(i, i)] = self.values[i];
        }
        self.frame * d * self.frame.transpose()
    }
}

/// Symmetric matrices with a closed-form eigensolver.
pub trait SymEigen: Sized {
    type Out;
    fn eig_sym_with(&self, tol: &Tol) -> Result<Self::Out, KernelError>;
}

impl SymEigen for Mat2 {
    type Out = SpectralData<2>;
    fn eig_sym_with(&self, tol: &Tol) -> Result<SpectralData<2>, KernelError> {
        check_symmetric(self.as_slice(), 2, self.norm(), tol.sym)?;
        Ok(eig2(self))
    }
}

impl SymEigen for Mat3 {
    type Out = SpectralData<3>;
    fn eig_sym_with(&self, tol: &Tol) -> Result<SpectralData<3>, KernelError> {
        check_symmetric(self.as_slice(), 3, self.norm(), tol.sym)?;
        Ok(eig3(self, tol.spectral))
    }
}

pub fn eig_sym<M: SymEigen>(e: &M) -> Result<M::Out, KernelError> {
    e.eig_sym_with(&Tol::default())
}

fn check_symmetric(col_major: &[f64], n: usize, norm: f64, tau: f64) -> Result<(), KernelError> {
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((col_major[i * n + j] - col_major[j * n + i]).abs());
        }
    }
    if asym > tau * (1.0 + norm) {
        return Err(KernelError::NonSymmetricInput { asym });
    }
    Ok(())
}

pub(crate) fn eig2(m: &Mat2) -> SpectralData<2> {
    let a = m[(0, 0)];
    let d = m[(1, 1)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let mean = 0.5 * (a + d);
    let h = 0.5 * (a - d);
    let r = h.hypot(b);
    if r == 0.0 {
        return SpectralData { values: [a, d], frame: Mat2::identity() };
    }
    let theta = 0.5 * b.atan2(h);
    let (s, c) = theta.sin_cos();
    let vmax = canonical_sign2(c, s);
    let vmin = canonical_sign2(-s, c);
    SpectralData {
        values: [mean - r, mean + r],
        frame: Mat2::new(vmin.0, vmax.0, vmin.1, vmax.1),
    }
}

fn canonical_sign2(x: f64, y: f64) -> (f64, f64) {
    let lead = if x.abs() > 1e-12 { x } else { y };
    if lead < 0.0 {
        (-x, -y)
    } else {
        (x, y)
    }
}

fn canonical_sign3(v: Vec3) -> Vec3 {
    let lead = v.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(0.0);
    if lead < 0.0 {
        -v
    } else {
        v
    }
}

/// Eigenvector for an isolated eigenvalue from cross products of the rows
/// of `m - lambda I`; the longest one is the best conditioned.
fn isolated_vector(m: &Mat3, lambda: f64) -> Vec3 {
    let s = m - Mat3::identity() * lambda;
    let r0 = s.row(0).transpose();
    let r1 = s.row(1).transpose();
    let r2 = s.row(2).transpose();
    let cands = [r0.cross(&r1), r0.cross(&r2), r1.cross(&r2)];
    let best = cands
        .iter()
        .max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))
        .copied()
        .unwrap();
    let n = best.norm();
    if n == 0.0 {
        Vec3::x()
    } else {
        best / n
    }
}

/// Any two unit vectors completing `v` to an orthonormal basis.
fn complement(v: &Vec3) -> (Vec3, Vec3) {
    let pick = if v.x.abs() <= v.y.abs() && v.x.abs() <= v.z.abs() {
        Vec3::x()
    } else if v.y.abs() <= v.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let u1 = (pick - v * v.dot(&pick)).normalize();
    let u2 = v.cross(&u1);
    (u1, u2)
}

pub(crate) fn eig3(m: &Mat3, tau_spec: f64) -> SpectralData<3> {
    let m = 0.5 * (m + m.transpose());
    let scale = m.amax();
    if scale == 0.0 {
        return SpectralData { values: [0.0; 3], frame: Mat3::identity() };
    }
    let b = m / scale;
    let q = b.trace() / 3.0;
    let p1 = b[(0, 1)].powi(2) + b[(0, 2)].powi(2) + b[(1, 2)].powi(2);
    let p2 = (b[(0, 0)] - q).powi(2) + (b[(1, 1)] - q).powi(2) + (b[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p <= 1e-15 {
        let values = [b[(0, 0)] * scale, b[(1, 1)] * scale, b[(2, 2)] * scale];
        return sorted(values, Mat3::identity(), tau_spec * scale);
    }
    let c = (b - Mat3::identity() * q) / p;
    let r = (0.5 * c.determinant()).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let mid = 3.0 * q - hi - lo;
    let iso = if hi - mid >= mid - lo { hi } else { lo };

    // deflate: the isolated pair is accurate, the remaining 2x2 block is
    // solved in closed form
    let v = isolated_vector(&b, iso);
    let (u1, u2) = complement(&v);
    let bu1 = b * u1;
    let bu2 = b * u2;
    let block = Mat2::new(u1.dot(&bu1), u1.dot(&bu2), u2.dot(&bu1), u2.dot(&bu2));
    let sub = eig2(&block);
    let w0 = u1 * sub.frame[(0, 0)] + u2 * sub.frame[(1, 0)];
    let w1 = u1 * sub.frame[(0, 1)] + u2 * sub.frame[(1, 1)];
    let lv = v.dot(&(b * v));
    let values = [lv * scale, sub.values[0] * scale, sub.values[1] * scale];
    let frame = Mat3::from_columns(&[v, w0, w1]);
    sorted(values, frame, tau_spec * scale)
}

fn sorted(values: [f64; 3], frame: Mat3, tau: f64) -> SpectralData<3> {
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut vals = [0.0; 3];
    let mut cols = [Vec3::zeros(); 3];
    for (k, &i) in idx.iter().enumerate() {
        vals[k] = values[i];
        cols[k] = canonical_sign3(frame.column(i).into_owned());
    }
    canonical_clusters(&vals, &mut cols, tau);
    SpectralData { values: vals, frame: Mat3::from_columns(&cols) }
}

/// Inside a cluster of equal eigenvalues the frame is arbitrary; replace it
/// by a reproducible basis (projected coordinate axes, Gram-Schmidt, then
/// lexicographic order).
fn canonical_clusters(vals: &[f64; 3], cols: &mut [Vec3; 3], tau: f64) {
    let tau = tau.max(1e-14);
    let eq01 = (vals[1] - vals[0]).abs() <= tau;
    let eq12 = (vals[2] - vals[1]).abs() <= tau;
    if eq01 && eq12 {
        *cols = [Vec3::x(), Vec3::y(), Vec3::z()];
        return;
    }
    let (i, j) = if eq01 {
        (0, 1)
    } else if eq12 {
        (1, 2)
    } else {
        return;
    };
    let k = 3 - i - j;
    let n = cols[k];
    let mut basis: Vec<Vec3> = Vec::with_capacity(2);
    for e in [Vec3::x(), Vec3::y(), Vec3::z()] {
        let mut w = e - n * n.dot(&e);
        for b in &basis {
            w -= b * b.dot(&w);
        }
        if w.norm() > 1e-6 {
            basis.push(w.normalize());
        }
        if basis.len() == 2 {
            break;
        }
    }
    let mut pair = [canonical_sign3(basis[0]), canonical_sign3(basis[1])];
    pair.sort_by(|a, b| {
        b.x.total_cmp(&a.x)
            .then(b.y.total_cmp(&a.y))
            .then(b.z.total_cmp(&a.z))
    });
    cols[i] = pair[0];
    cols[j] = pair[1];
}

/// Ordered singular values of `F` with left singular vectors, from the
/// eigen-decomposition of `F F^T`.
pub fn singular_values(f: &Mat3) -> Result<SpectralData<3>, KernelError> {
    singular_values_with(f, &Tol::default())
}

pub fn singular_values_with(f: &Mat3, tol: &Tol) -> Result<SpectralData<3>, KernelError> {
    let det = f.determinant();
    if det <= 0.0 {
        return Err(KernelError::SingularInput { det });
    }
    Ok(singular_values_any(f, tol))
}

/// Singular values of an arbitrary 3x3 matrix (no sign conditions).
pub fn singular_values_any(f: &Mat3, tol: &Tol) -> SpectralData<3> {
    let g = f * f.transpose();
    let sd = eig3(&g, tol.spectral);
    SpectralData { values: sd.values.map(|v| v.max(0.0).sqrt()), frame: sd.frame }
}

/// Spectral power of a symmetric positive definite matrix.
pub fn spd_power(m: &Mat3, exponent: f64) -> Mat3 {
    let sd = eig3(m, 0.0);
    let mut d = Mat3::zeros();
    for i in 0..3 {
        d[(i, i)] = sd.values[i].max(0.0).powf(exponent);
    }
    sd.frame * d * sd.frame.transpose()
}

/// `tr(M^p)` for symmetric positive definite `M`.
pub fn spd_trace_power(m: &Mat3, exponent: f64) -> f64 {
    let sd = eig3(m, 0.0);
    sd.values.iter().map(|v| v.max(0.0).powf(exponent)).sum()
}
