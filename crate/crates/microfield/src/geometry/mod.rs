//! Domains, cells, piecewise-affine fields and packings.

pub mod lattice;
pub mod region;
pub mod tile;
pub(crate) mod vitali;

use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::construct::{ClosedFormDiskField, Refinement};
use crate::kernel::{Mat2, Vec2};

pub use region::Region;
pub use tile::{affine_grad, ref_tile, RefTile};
pub use vitali::{vitali_pack, CellCover, Generator, PackStatus, Placement};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("delta must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("point ({0}, {1}) lies outside the domain")]
    OutOfDomain(f64, f64),
    #[error("invalid packing parameters: {0}")]
    InvalidPacking(String),
}

/// Planar domain: a simple counterclockwise polygon or a disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain2 {
    Polygon { vertices: Vec<Vec2> },
    Disk { center: Vec2, radius: f64 },
}

impl Domain2 {
    pub fn unit_square() -> Self {
        Domain2::Polygon {
            vertices: vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        match self {
            Domain2::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(GeometryError::InvalidDomain("polygon needs at least 3 vertices".into()));
                }
                if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
                    return Err(GeometryError::InvalidDomain("non-finite vertex".into()));
                }
                if region::polygon_area(vertices) <= 0.0 {
                    return Err(GeometryError::InvalidDomain(
                        "polygon must be counterclockwise with positive area".into(),
                    ));
                }
                if !region::is_simple(vertices) {
                    return Err(GeometryError::InvalidDomain("polygon self-intersects".into()));
                }
                Ok(())
            }
            Domain2::Disk { radius, center } => {
                if !(*radius > 0.0) || !center.iter().all(|c| c.is_finite()) {
                    return Err(GeometryError::InvalidDomain(format!("disk radius {radius} must be positive")));
                }
                Ok(())
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Domain2::Polygon { vertices } => region::polygon_area(vertices),
            Domain2::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
        }
    }

    pub fn contains(&self, x: &Vec2, tol: f64) -> bool {
        match self {
            Domain2::Polygon { vertices } => region::point_in_polygon(vertices, x, tol),
            Domain2::Disk { center, radius } => (x - center).norm() <= radius + tol,
        }
    }

    /// Distance from an interior point to the boundary.
    pub fn boundary_distance(&self, x: &Vec2) -> f64 {
        match self {
            Domain2::Polygon { vertices } => region::dist_to_polygon_boundary(vertices, x),
            Domain2::Disk { center, radius } => (radius - (x - center).norm()).abs(),
        }
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        match self {
            Domain2::Polygon { vertices } => region::bbox(vertices),
            Domain2::Disk { center, radius } => {
                (center - Vec2::new(*radius, *radius), center + Vec2::new(*radius, *radius))
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (hi - lo).norm()
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            Domain2::Polygon { vertices } => {
                let n = vertices.len();
                (0..n).map(|i| (vertices[(i + 1) % n] - vertices[i]).norm()).sum()
            }
            Domain2::Disk { radius, .. } => 2.0 * std::f64::consts::PI * radius,
        }
    }

    /// Point at arclength fraction `t` in `[0, 1)` along the boundary.
    pub fn boundary_point(&self, t: f64) -> Vec2 {
        match self {
            Domain2::Disk { center, radius } => {
                let a = std::f64::consts::TAU * t;
                center + Vec2::new(a.cos(), a.sin()) * *radius
            }
            Domain2::Polygon { vertices } => {
                let n = vertices.len();
                let mut s = t.rem_euclid(1.0) * self.perimeter();
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let l = (b - a).norm();
                    if s <= l || i == n - 1 {
                        return a + (b - a) * (s / l).min(1.0);
                    }
                    s -= l;
                }
                vertices[0]
            }
        }
    }

    pub fn sample_interior<R: Rng>(&self, rng: &mut R) -> Vec2 {
        let (lo, hi) = self.bbox();
        loop {
            let p = Vec2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
            if self.contains(&p, 0.0) {
                return p;
            }
        }
    }

    /// Triangulation by ear clipping (polygons) or an inscribed fan (disks).
    pub fn triangulate(&self) -> Vec<[Vec2; 3]> {
        match self {
            Domain2::Polygon { vertices } => ear_clip(vertices),
            Domain2::Disk { center, radius } => {
                let n = 64;
                (0..n)
                    .map(|k| {
                        let a0 = std::f64::consts::TAU * k as f64 / n as f64;
                        let a1 = std::f64::consts::TAU * (k + 1) as f64 / n as f64;
                        [
                            *center,
                            center + Vec2::new(a0.cos(), a0.sin()) * *radius,
                            center + Vec2::new(a1.cos(), a1.sin()) * *radius,
                        ]
                    })
                    .collect()
            }
        }
    }

    /// The domain in other coordinates `y = m (x - origin)`.
    pub fn region_in(&self, m: &Mat2, origin: &Vec2) -> Region {
        match self {
            Domain2::Polygon { vertices } => {
                Region::polygon(vertices.iter().map(|v| m * (v - origin)).collect())
            }
            Domain2::Disk { center, radius } => {
                // |x - c| <= r  <=>  (y - y_c)^T (m m^T)^{-1} (y - y_c) <= r^2
                let mi = m.try_inverse().unwrap_or_else(Mat2::identity);
                let q = mi.transpose() * mi / (radius * radius);
                Region::Ellipse { center: m * (center - origin), q }
            }
        }
    }
}

fn ear_clip(poly: &[Vec2]) -> Vec<[Vec2; 3]> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut out = Vec::new();
    let mut guard = 0;
    while idx.len() > 3 && guard < 10 * poly.len() * poly.len() {
        guard += 1;
        let n = idx.len();
        let mut clipped = false;
        for k in 0..n {
            let (ip, ic, inx) = (idx[(k + n - 1) % n], idx[k], idx[(k + 1) % n]);
            let (a, b, c) = (poly[ip], poly[ic], poly[inx]);
            if region::cross(&(b - a), &(c - b)) <= 0.0 {
                continue;
            }
            let tri = [a, b, c];
            let blocked = idx.iter().any(|&j| {
                j != ip && j != ic && j != inx && region::in_triangle(&tri, &poly[j], 0.0)
            });
            if !blocked {
                out.push(tri);
                idx.remove(k);
                clipped = true;
                break;
            }
        }
        if !clipped {
            break;
        }
    }
    if idx.len() == 3 {
        out.push([poly[idx[0]], poly[idx[1]], poly[idx[2]]]);
    }
    out
}

/// Cell geometry.  `Tile` is the image `origin + basis (y - V1)` of the
/// rhombus made of the reference triangle and its point reflection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Triangle { v: [Vec2; 3] },
    Polygon { v: Vec<Vec2> },
    Disk { center: Vec2, radius: f64 },
    Tile { origin: Vec2, basis: Mat2 },
}

impl Shape {
    pub fn area(&self) -> f64 {
        match self {
            Shape::Triangle { v } => region::polygon_area(v),
            Shape::Polygon { v } => region::polygon_area(v),
            Shape::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Shape::Tile { basis, .. } => basis.determinant().abs() * 2.0 * tile::SQRT3,
        }
    }

    /// Polygonal outline (rhombus corners for tiles, none for disks).
    pub fn outline(&self) -> Vec<Vec2> {
        match self {
            Shape::Triangle { v } => v.to_vec(),
            Shape::Polygon { v } => v.clone(),
            Shape::Disk { center, radius } => (0..48)
                .map(|k| {
                    let a = std::f64::consts::TAU * k as f64 / 48.0;
                    center + Vec2::new(a.cos(), a.sin()) * *radius
                })
                .collect(),
            Shape::Tile { origin, basis } => {
                let e = tile::lattice_edges();
                let h = basis * e;
                vec![
                    *origin,
                    origin + h.column(0),
                    origin + h.column(0) + h.column(1),
                    origin + h.column(1),
                ]
            }
        }
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        match self {
            Shape::Disk { center, radius } => {
                (center - Vec2::new(*radius, *radius), center + Vec2::new(*radius, *radius))
            }
            _ => region::bbox(&self.outline()),
        }
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (hi - lo).norm()
    }

    pub fn contains(&self, x: &Vec2, tol: f64) -> bool {
        match self {
            Shape::Triangle { v } => region::point_in_polygon(v, x, tol),
            Shape::Polygon { v } => region::point_in_polygon(v, x, tol),
            Shape::Disk { center, radius } => (x - center).norm() <= radius + tol,
            Shape::Tile { .. } => region::point_in_polygon(&self.outline(), x, tol),
        }
    }

    /// Rhombus lattice coordinates of `x` inside a tile.
    pub fn tile_coords(&self, x: &Vec2) -> Option<Vec2> {
        match self {
            Shape::Tile { origin, basis } => {
                let h = basis * tile::lattice_edges();
                h.try_inverse().map(|hi| hi * (x - origin))
            }
            _ => None,
        }
    }

    /// Physical positions of the ten tile nodes.
    pub fn tile_nodes(&self) -> Option<[Vec2; 10]> {
        match self {
            Shape::Tile { origin, basis } => {
                let t = ref_tile();
                let v1 = t.nodes[0];
                Some(t.nodes.map(|y| origin + basis * (y - v1)))
            }
            _ => None,
        }
    }

    /// Tile nodes relative to `V1`, free of the origin's rounding.
    pub fn tile_offsets(&self) -> Option<[Vec2; 10]> {
        match self {
            Shape::Tile { basis, .. } => {
                let t = ref_tile();
                let v1 = t.nodes[0];
                Some(t.nodes.map(|y| basis * (y - v1)))
            }
            _ => None,
        }
    }
}

/// Oscillating tile payload: base affine map plus the full field at the ten
/// tile nodes, stored as the value at `V1` and increments from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TilePayload {
    pub grad: Mat2,
    pub shift: Vec2,
    pub amp: f64,
    pub anchor: Vec2,
    pub increments: [Vec2; 10],
    /// Stored gradients of the fourteen sub-triangles (metadata only).
    pub sub_grads: Vec<Mat2>,
}

impl TilePayload {
    pub fn node_value(&self, k: usize) -> Vec2 {
        self.anchor + self.increments[k]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    /// `u(x) = grad x + shift`; `values` are the vertex values of the shape.
    Affine { grad: Mat2, shift: Vec2, values: Vec<Vec2> },
    Disk(ClosedFormDiskField),
    Tile(TilePayload),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: u64,
    pub shape: Shape,
    pub payload: Payload,
    pub generation: u32,
}

impl Cell {
    /// Affine cell with vertex values filled in.
    pub fn affine(id: u64, shape: Shape, grad: Mat2, shift: Vec2, generation: u32) -> Self {
        let values = shape.outline().iter().map(|v| grad * v + shift).collect();
        let values = if matches!(shape, Shape::Disk { .. }) { Vec::new() } else { values };
        Cell { id, shape, payload: Payload::Affine { grad, shift, values }, generation }
    }

    /// Payload evaluation `(u, grad u)` at a point of the cell.
    pub fn eval(&self, x: &Vec2) -> (Vec2, Mat2) {
        match &self.payload {
            Payload::Affine { grad, shift, .. } => (grad * x + shift, *grad),
            Payload::Disk(d) => d.eval_2d(x),
            Payload::Tile(t) => {
                let ab = self.shape.tile_coords(x).unwrap_or_else(Vec2::zeros);
                let ab = Vec2::new(ab.x.clamp(0.0, 1.0), ab.y.clamp(0.0, 1.0));
                let rt = ref_tile();
                let k = rt.locate(&ab);
                let nodes = self.shape.tile_nodes().expect("tile shape");
                let tri = rt.tris[k].map(|i| nodes[i]);
                let vals = rt.tris[k].map(|i| t.node_value(i));
                let l = region::barycentric(&tri, x);
                let u = vals[0] * l[0] + vals[1] * l[1] + vals[2] * l[2];
                let g = t.sub_grads.get(k).copied().unwrap_or(t.grad);
                (u, g)
            }
        }
    }

    /// Gradients re-derived from geometry and vertex data only, one per
    /// affine piece, with the piece's vertices.
    pub fn derived_pieces(&self) -> Vec<([Vec2; 3], Mat2)> {
        match (&self.shape, &self.payload) {
            (Shape::Triangle { v }, Payload::Affine { values, .. }) if values.len() == 3 => {
                vec![(*v, affine_grad(v, &[values[0], values[1], values[2]]))]
            }
            (Shape::Polygon { v }, Payload::Affine { values, .. }) if values.len() == v.len() => {
                // fan from the first vertex; every fan triangle must agree
                (1..v.len() - 1)
                    .map(|i| {
                        let p = [v[0], v[i], v[i + 1]];
                        (p, affine_grad(&p, &[values[0], values[i], values[i + 1]]))
                    })
                    .collect()
            }
            (Shape::Tile { .. }, Payload::Tile(t)) => {
                let nodes = self.shape.tile_nodes().expect("tile shape");
                let rel = self.shape.tile_offsets().expect("tile shape");
                let rt = ref_tile();
                rt.tris
                    .iter()
                    .map(|tr| {
                        let g = affine_grad(&tr.map(|i| rel[i]), &tr.map(|i| t.increments[i]));
                        (tr.map(|i| nodes[i]), g)
                    })
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    /// Stored (metadata) gradients, aligned with [`Cell::derived_pieces`].
    pub fn stored_grads(&self) -> Vec<Mat2> {
        match &self.payload {
            Payload::Affine { grad, values, .. } => {
                let n = match &self.shape {
                    Shape::Polygon { v } if values.len() == v.len() => v.len() - 2,
                    Shape::Triangle { .. } if values.len() == 3 => 1,
                    _ => 0,
                };
                vec![*grad; n]
            }
            Payload::Tile(t) => t.sub_grads.clone(),
            Payload::Disk(_) => Vec::new(),
        }
    }
}

/// Boundary datum of a construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Datum {
    Affine { grad: Mat2, shift: Vec2 },
    Piecewise { cells: Vec<Cell> },
}

impl Datum {
    pub fn zero() -> Self {
        Datum::Affine { grad: Mat2::zeros(), shift: Vec2::zeros() }
    }

    pub fn eval(&self, x: &Vec2) -> (Vec2, Mat2) {
        match self {
            Datum::Affine { grad, shift } => (grad * x + shift, *grad),
            Datum::Piecewise { cells } => {
                let tol = 1e-12 * (1.0 + x.norm());
                cells
                    .iter()
                    .filter(|c| c.shape.contains(x, tol))
                    .min_by_key(|c| c.id)
                    .or_else(|| {
                        cells.iter().min_by(|a, b| {
                            let da = dist_to_shape(&a.shape, x);
                            let db = dist_to_shape(&b.shape, x);
                            da.total_cmp(&db)
                        })
                    })
                    .map(|c| c.eval(x))
                    .unwrap_or((Vec2::zeros(), Mat2::zeros()))
            }
        }
    }

    /// Largest gradient norm, used in continuity tolerances.
    pub fn grad_norm(&self) -> f64 {
        match self {
            Datum::Affine { grad, .. } => grad.norm(),
            Datum::Piecewise { cells } => cells
                .iter()
                .map(|c| c.stored_grads().iter().map(|g| g.norm()).fold(0.0, f64::max))
                .fold(0.0, f64::max),
        }
    }
}

fn dist_to_shape(s: &Shape, x: &Vec2) -> f64 {
    match s {
        Shape::Disk { center, radius } => ((x - center).norm() - radius).max(0.0),
        _ => {
            if s.contains(x, 0.0) {
                0.0
            } else {
                region::dist_to_polygon_boundary(&s.outline(), x)
            }
        }
    }
}

/// Result of [`field_eval`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldValue {
    pub value: Vec2,
    pub grad: Mat2,
    pub cell: Option<u64>,
    pub residual: bool,
    /// Refinement depth below the located cell (0 for explicit cells).
    pub depth: u32,
}

#[derive(Clone, Debug, Default)]
struct GridIndex {
    lo: Vec2,
    inv: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl GridIndex {
    fn build(domain: &Domain2, cells: &[Cell]) -> Self {
        let (lo, hi) = domain.bbox();
        let ext = (hi - lo).max().max(1e-300);
        let n = cells.len().max(1) as f64;
        let g = (domain.area() / n).sqrt().max(ext / 1024.0) * 1.5;
        let nx = (((hi.x - lo.x) / g).ceil() as usize).clamp(1, 1024);
        let ny = (((hi.y - lo.y) / g).ceil() as usize).clamp(1, 1024);
        let inv = 1.0 / g;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (k, c) in cells.iter().enumerate() {
            let (clo, chi) = c.shape.bbox();
            let i0 = (((clo.x - lo.x) * inv).floor().max(0.0) as usize).min(nx - 1);
            let i1 = (((chi.x - lo.x) * inv).floor().max(0.0) as usize).min(nx - 1);
            let j0 = (((clo.y - lo.y) * inv).floor().max(0.0) as usize).min(ny - 1);
            let j1 = (((chi.y - lo.y) * inv).floor().max(0.0) as usize).min(ny - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(k as u32);
                }
            }
        }
        GridIndex { lo, inv, nx, ny, buckets }
    }

    fn candidates(&self, x: &Vec2) -> &[u32] {
        let i = ((x.x - self.lo.x) * self.inv).floor();
        let j = ((x.y - self.lo.y) * self.inv).floor();
        if i < 0.0 || j < 0.0 {
            return &[];
        }
        let (i, j) = ((i as usize).min(self.nx - 1), (j as usize).min(self.ny - 1));
        &self.buckets[j * self.nx + i]
    }
}

/// A piecewise-affine (or closed-form) displacement field on a planar domain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PiecewiseField {
    pub domain: Domain2,
    pub cells: Vec<Cell>,
    /// Measure of the domain not covered by `cells`.
    pub residual: f64,
    pub datum: Datum,
    /// Adds `w = (x1/4, x2/4, -x3/2)` when the field is read as a 3D field on `domain x R`.
    pub embed3d: bool,
    /// Lazily evaluated refinement below the explicit cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement: Option<Refinement>,
    #[serde(skip)]
    index: OnceLock<GridIndex>,
}

impl PartialEq for PiecewiseField {
    fn eq(&self, o: &Self) -> bool {
        self.domain == o.domain
            && self.cells == o.cells
            && self.residual == o.residual
            && self.datum == o.datum
            && self.embed3d == o.embed3d
            && self.refinement == o.refinement
    }
}

impl PiecewiseField {
    pub fn new(domain: Domain2, cells: Vec<Cell>, datum: Datum) -> Self {
        let covered: f64 = cells.iter().map(|c| c.shape.area()).sum();
        let residual = (domain.area() - covered).max(0.0);
        PiecewiseField { domain, cells, residual, datum, embed3d: false, refinement: None, index: OnceLock::new() }
    }

    pub fn with_refinement(mut self, r: Refinement) -> Self {
        self.refinement = Some(r);
        self
    }

    pub fn covered_area(&self) -> f64 {
        self.cells.iter().map(|c| c.shape.area()).sum()
    }

    /// Continuity tolerance `1e-9 (1 + |G| diam)`.
    pub fn tau_cont(&self) -> f64 {
        let g = self
            .cells
            .iter()
            .flat_map(|c| c.stored_grads())
            .map(|g| g.norm())
            .fold(self.datum.grad_norm(), f64::max);
        crate::tol::tau_cont(g, self.domain.diameter())
    }

    fn index(&self) -> &GridIndex {
        self.index.get_or_init(|| GridIndex::build(&self.domain, &self.cells))
    }

    /// Every explicit cell containing `x` (closed), in id order.
    pub fn cells_at(&self, x: &Vec2, tol: f64) -> Vec<&Cell> {
        let mut v: Vec<&Cell> = self
            .index()
            .candidates(x)
            .iter()
            .map(|&k| &self.cells[k as usize])
            .filter(|c| c.shape.contains(x, tol))
            .collect();
        v.sort_by_key(|c| c.id);
        v
    }
}

/// Evaluate the field at `x`: lowest-id containing cell, or the datum on the
/// residual set.
pub fn field_eval(f: &PiecewiseField, x: &Vec2) -> Result<FieldValue, GeometryError> {
    let scale = 1.0 + x.norm();
    if !f.domain.contains(x, 1e-12 * scale) {
        return Err(GeometryError::OutOfDomain(x.x, x.y));
    }
    let hits = f.cells_at(x, 1e-12 * scale);
    if let Some(c) = hits.first() {
        if let Some(r) = &f.refinement {
            return Ok(r.eval_in(c, x));
        }
        let (value, grad) = c.eval(x);
        return Ok(FieldValue { value, grad, cell: Some(c.id), residual: false, depth: 0 });
    }
    let (value, grad) = f.datum.eval(x);
    Ok(FieldValue { value, grad, cell: None, residual: true, depth: 0 })
}

/// The seven-cell oscillation on the reference triangle with interior nodal
/// displacements scaled by `delta`.
pub fn reference_triangle_field(delta: f64) -> Result<PiecewiseField, GeometryError> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(GeometryError::NonPositiveDelta(delta));
    }
    let n = tile::reference_nodes();
    let d = tile::reference_displacements();
    let cells = tile::TRIANGLES
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let p = t.map(|i| n[i]);
            let u = t.map(|i| d[i] * delta);
            let grad = affine_grad(&p, &u);
            let shift = u[0] - grad * p[0];
            Cell {
                id: k as u64 + 1,
                shape: Shape::Triangle { v: p },
                payload: Payload::Affine { grad, shift, values: u.to_vec() },
                generation: 0,
            }
        })
        .collect();
    let domain = Domain2::Polygon { vertices: vec![n[0], n[1], n[2]] };
    Ok(PiecewiseField::new(domain, cells, Datum::zero()))
}
