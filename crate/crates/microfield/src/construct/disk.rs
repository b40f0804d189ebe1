use serde::{Deserialize, Serialize};

use super::ConstructError;
use crate::geometry::{vitali_pack, Cell, Datum, Domain2, Generator, Payload, PiecewiseField, Shape};
use crate::kernel::{Mat2, Mat3, Vec2, Vec3};

/// `u(x) = sign (3/4) log(|y|^2 / r^2) (-y2, y1)` with `y = x - center`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormDiskField {
    pub center: Vec2,
    pub radius: f64,
    pub sign: f64,
    pub embed3d: bool,
}

impl ClosedFormDiskField {
    /// Planar part `(u, grad u)`; the center itself is a removable point for
    /// the value (0) and singular for the gradient (returned as zero).
    pub fn eval_2d(&self, x: &Vec2) -> (Vec2, Mat2) {
        let y = x - self.center;
        let rho2 = y.norm_squared();
        if rho2 == 0.0 {
            return (Vec2::zeros(), Mat2::zeros());
        }
        let s = self.sign;
        let f = 0.75 * s * (rho2 / (self.radius * self.radius)).ln();
        let k = 1.5 * s / rho2;
        let (y1, y2) = (y.x, y.y);
        let u = Vec2::new(-y2, y1) * f;
        let g = Mat2::new(-k * y1 * y2, -f - k * y2 * y2, f + k * y1 * y1, k * y1 * y2);
        (u, g)
    }

    /// Full field `(u~, 0) + w` and its gradient on the cylinder over the disk.
    pub fn eval_3d(&self, x: &Vec3) -> (Vec3, Mat3) {
        let (u, g) = self.eval_2d(&Vec2::new(x.x, x.y));
        embed(u, g, x)
    }
}

/// Adds `w = (x1/4, x2/4, -x3/2)` to a planar field read on `omega x R`.
pub fn embed(u: Vec2, g: Mat2, x: &Vec3) -> (Vec3, Mat3) {
    let v = Vec3::new(u.x + 0.25 * x.x, u.y + 0.25 * x.y, -0.5 * x.z);
    let mut m = Mat3::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(&g);
    m[(0, 0)] += 0.25;
    m[(1, 1)] += 0.25;
    m[(2, 2)] = -0.5;
    (v, m)
}

pub fn explicit_disk_solution(r: f64, sign: f64) -> Result<PiecewiseField, ConstructError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(ConstructError::NonPositiveRadius(r));
    }
    let sign = if sign < 0.0 { -1.0 } else { 1.0 };
    let d = ClosedFormDiskField { center: Vec2::zeros(), radius: r, sign, embed3d: true };
    let domain = Domain2::Disk { center: Vec2::zeros(), radius: r };
    let cell = Cell {
        id: 1,
        shape: Shape::Disk { center: Vec2::zeros(), radius: r },
        payload: Payload::Disk(d),
        generation: 0,
    };
    let mut f = PiecewiseField::new(domain, vec![cell], Datum::zero());
    f.residual = 0.0;
    f.embed3d = true;
    Ok(f)
}

/// Packing parameters shared by the constructions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackParams {
    pub target: f64,
    pub min_scale: f64,
    pub seed: u64,
}

impl Default for PackParams {
    fn default() -> Self {
        PackParams { target: 0.99, min_scale: 1e-4, seed: 0 }
    }
}

/// Disks of a Vitali packing, each carrying the rescaled closed-form field;
/// zero planar displacement on the residual set.
pub fn general_domain_solution(domain: &Domain2, pack: &PackParams) -> Result<PiecewiseField, ConstructError> {
    let cover = vitali_pack(domain, &Generator::Disk, pack.target, pack.min_scale, pack.seed)?;
    let cells: Vec<Cell> = cover
        .placements
        .iter()
        .enumerate()
        .map(|(k, p)| Cell {
            id: k as u64 + 1,
            shape: Shape::Disk { center: p.center, radius: p.scale },
            payload: Payload::Disk(ClosedFormDiskField {
                center: p.center,
                radius: p.scale,
                sign: 1.0,
                embed3d: true,
            }),
            generation: 0,
        })
        .collect();
    let mut f = PiecewiseField::new(domain.clone(), cells, Datum::zero());
    f.embed3d = true;
    Ok(f)
}
