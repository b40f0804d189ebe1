use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::{KernelError, Mat2, Mat3, Vec2, Vec3};

/// Trace-free 2x2 matrix `[[a1, a2 + a3], [a2 - a3, -a1]]`.
///
/// `(a1, a2)` is the symmetric part, `a3` the skew part. Zero trace is a
/// property of the representation, not of the stored floats.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TracelessMat2 {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl TracelessMat2 {
    pub const ZERO: Self = TracelessMat2 { a1: 0.0, a2: 0.0, a3: 0.0 };

    pub const fn new(a1: f64, a2: f64, a3: f64) -> Self {
        TracelessMat2 { a1, a2, a3 }
    }

    /// Symmetric coordinates `a` and skew coordinate `a3`.
    pub fn from_parts(a: Vec2, a3: f64) -> Self {
        TracelessMat2 { a1: a.x, a2: a.y, a3 }
    }

    /// Coordinates of a dense matrix, rejecting a trace larger than `tau`.
    pub fn from_matrix(m: &Mat2, tau: f64) -> Result<Self, KernelError> {
        let tr = m.trace();
        if tr.abs() > tau * (1.0 + m.norm()) {
            return Err(KernelError::NonTracelessInput { trace: tr });
        }
        Ok(Self::project(m))
    }

    /// Orthogonal projection onto the trace-free matrices.
    pub fn project(m: &Mat2) -> Self {
        TracelessMat2 {
            a1: 0.5 * (m[(0, 0)] - m[(1, 1)]),
            a2: 0.5 * (m[(0, 1)] + m[(1, 0)]),
            a3: 0.5 * (m[(0, 1)] - m[(1, 0)]),
        }
    }

    pub fn to_matrix(&self) -> Mat2 {
        Mat2::new(self.a1, self.a2 + self.a3, self.a2 - self.a3, -self.a1)
    }

    pub fn sym_coords(&self) -> Vec2 {
        Vec2::new(self.a1, self.a2)
    }

    /// `|a|`, so that the Frobenius norm of the symmetric part is `sqrt(2)|a|`.
    pub fn sym_norm(&self) -> f64 {
        self.a1.hypot(self.a2)
    }

    pub fn sym_matrix(&self) -> Mat2 {
        Mat2::new(self.a1, self.a2, self.a2, -self.a1)
    }

    pub fn skw_matrix(&self) -> Mat2 {
        Mat2::new(0.0, self.a3, -self.a3, 0.0)
    }

    pub fn frobenius(&self) -> f64 {
        (2.0 * (self.a1 * self.a1 + self.a2 * self.a2 + self.a3 * self.a3)).sqrt()
    }

    pub fn det(&self) -> f64 {
        -self.a1 * self.a1 - self.a2 * self.a2 + self.a3 * self.a3
    }

    /// Reflect the skew coordinate.
    pub fn mirrored(&self) -> Self {
        TracelessMat2 { a3: -self.a3, ..*self }
    }

    pub fn dot(&self, o: &Self) -> f64 {
        2.0 * (self.a1 * o.a1 + self.a2 * o.a2 + self.a3 * o.a3)
    }
}

impl Add for TracelessMat2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        TracelessMat2::new(self.a1 + o.a1, self.a2 + o.a2, self.a3 + o.a3)
    }
}

impl Sub for TracelessMat2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        TracelessMat2::new(self.a1 - o.a1, self.a2 - o.a2, self.a3 - o.a3)
    }
}

impl Neg for TracelessMat2 {
    type Output = Self;
    fn neg(self) -> Self {
        TracelessMat2::new(-self.a1, -self.a2, -self.a3)
    }
}

impl Mul<TracelessMat2> for f64 {
    type Output = TracelessMat2;
    fn mul(self, m: TracelessMat2) -> TracelessMat2 {
        TracelessMat2::new(self * m.a1, self * m.a2, self * m.a3)
    }
}

const INV_SQRT6: f64 = 0.408_248_290_463_863_016_4;

/// Orthonormal basis of the symmetric trace-free 3x3 matrices.
pub fn sym_basis() -> [Mat3; 5] {
    let r = FRAC_1_SQRT_2;
    let s = INV_SQRT6;
    [
        Mat3::new(r, 0.0, 0.0, 0.0, -r, 0.0, 0.0, 0.0, 0.0),
        Mat3::new(s, 0.0, 0.0, 0.0, s, 0.0, 0.0, 0.0, -2.0 * s),
        Mat3::new(0.0, r, 0.0, r, 0.0, 0.0, 0.0, 0.0, 0.0),
        Mat3::new(0.0, 0.0, r, 0.0, 0.0, 0.0, r, 0.0, 0.0),
        Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, r, 0.0, r, 0.0),
    ]
}

/// Orthonormal basis of the skew 3x3 matrices, slots (12), (13), (23).
pub fn skw_basis() -> [Mat3; 3] {
    let r = FRAC_1_SQRT_2;
    [
        Mat3::new(0.0, r, 0.0, -r, 0.0, 0.0, 0.0, 0.0, 0.0),
        Mat3::new(0.0, 0.0, r, 0.0, 0.0, 0.0, -r, 0.0, 0.0),
        Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, r, 0.0, -r, 0.0),
    ]
}

/// Trace-free 3x3 matrix in orthonormal coordinates: five symmetric, three skew.
///
/// Because both bases are orthonormal for the Frobenius product,
/// `|A|^2 = |s|^2 + |k|^2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TracelessMat3 {
    pub s: [f64; 5],
    pub k: [f64; 3],
}

impl TracelessMat3 {
    pub const ZERO: Self = TracelessMat3 { s: [0.0; 5], k: [0.0; 3] };

    pub fn from_matrix(m: &Mat3, tau: f64) -> Result<Self, KernelError> {
        let tr = m.trace();
        if tr.abs() > tau * (1.0 + m.norm()) {
            return Err(KernelError::NonTracelessInput { trace: tr });
        }
        Ok(Self::project(m))
    }

    pub fn project(m: &Mat3) -> Self {
        let mut s = [0.0; 5];
        let mut k = [0.0; 3];
        for (c, b) in s.iter_mut().zip(sym_basis().iter()) {
            *c = m.dot(b);
        }
        for (c, b) in k.iter_mut().zip(skw_basis().iter()) {
            *c = m.dot(b);
        }
        TracelessMat3 { s, k }
    }

    pub fn to_matrix(&self) -> Mat3 {
        self.sym_matrix() + self.skw_matrix()
    }

    pub fn sym_matrix(&self) -> Mat3 {
        let r = FRAC_1_SQRT_2;
        let s = &self.s;
        let d0 = r * s[0] + INV_SQRT6 * s[1];
        let d1 = -r * s[0] + INV_SQRT6 * s[1];
        // the diagonal is filled so that its sum is zero to the last bit
        let d2 = -(d0 + d1);
        Mat3::new(
            d0,
            r * s[2],
            r * s[3],
            r * s[2],
            d1,
            r * s[4],
            r * s[3],
            r * s[4],
            d2,
        )
    }

    pub fn skw_matrix(&self) -> Mat3 {
        let r = FRAC_1_SQRT_2;
        let k = &self.k;
        Mat3::new(
            0.0,
            r * k[0],
            r * k[1],
            -r * k[0],
            0.0,
            r * k[2],
            -r * k[1],
            -r * k[2],
            0.0,
        )
    }

    /// Frobenius norm of the skew part.
    pub fn skw_norm(&self) -> f64 {
        Vec3::new(self.k[0], self.k[1], self.k[2]).norm()
    }

    pub fn frobenius(&self) -> f64 {
        let s2: f64 = self.s.iter().map(|x| x * x).sum();
        let k2: f64 = self.k.iter().map(|x| x * x).sum();
        (s2 + k2).sqrt()
    }

    pub fn scale(&self, t: f64) -> Self {
        let mut out = *self;
        out.s.iter_mut().for_each(|x| *x *= t);
        out.k.iter_mut().for_each(|x| *x *= t);
        out
    }
}

impl Add for TracelessMat3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut out = self;
        for i in 0..5 {
            out.s[i] += o.s[i];
        }
        for i in 0..3 {
            out.k[i] += o.k[i];
        }
        out
    }
}

impl Sub for TracelessMat3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + o.scale(-1.0)
    }
}

/// Either dimension, for operations that accept both.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TracelessMat {
    Two(TracelessMat2),
    Three(TracelessMat3),
}

/// Dense matrix of either dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Dense {
    Two(Mat2),
    Three(Mat3),
}

impl TracelessMat {
    pub fn to_dense(&self) -> Dense {
        match self {
            TracelessMat::Two(a) => Dense::Two(a.to_matrix()),
            TracelessMat::Three(a) => Dense::Three(a.to_matrix()),
        }
    }
}

impl From<TracelessMat2> for TracelessMat {
    fn from(a: TracelessMat2) -> Self {
        TracelessMat::Two(a)
    }
}

impl From<TracelessMat3> for TracelessMat {
    fn from(a: TracelessMat3) -> Self {
        TracelessMat::Three(a)
    }
}

/// Symmetric and skew parts; `sym + skw` reproduces `A`.
pub fn sym_skw(a: &TracelessMat) -> (Dense, Dense) {
    match a {
        TracelessMat::Two(a) => (Dense::Two(a.sym_matrix()), Dense::Two(a.skw_matrix())),
        TracelessMat::Three(a) => (Dense::Three(a.sym_matrix()), Dense::Three(a.skw_matrix())),
    }
}
