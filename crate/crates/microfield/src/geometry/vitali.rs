//! Greedy multiscale packings of a domain by copies of a generator.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lattice;
use super::{Domain2, GeometryError};
use crate::kernel::{Mat2, Vec2};

/// Shape being packed.  A parallelogram generator is the unit cell
/// `{basis (s, t) : s, t in [0, 1]}`; placements use dyadic scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Generator {
    Disk,
    Parallelogram { basis: Mat2 },
}

/// A scaled copy: disks use `center` and radius `scale`; parallelograms
/// occupy `center + scale * basis * ([0,1]^2 - (1/2, 1/2))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub center: Vec2,
    pub scale: f64,
    pub orientation: Mat2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PackStatus {
    Reached,
    TargetUnreachable { achieved: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCover {
    pub generator: Generator,
    pub placements: Vec<Placement>,
    pub covered_fraction: f64,
    pub status: PackStatus,
    /// For parallelogram covers: lattice origin and dyadic levels of the placements.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<u32>,
}

impl CellCover {
    pub fn placement_area(&self, p: &Placement) -> f64 {
        match &self.generator {
            Generator::Disk => std::f64::consts::PI * p.scale * p.scale,
            Generator::Parallelogram { basis } => basis.determinant().abs() * p.scale * p.scale,
        }
    }

    /// Corners of a parallelogram placement.
    pub fn corners(&self, p: &Placement) -> Option<[Vec2; 4]> {
        let Generator::Parallelogram { basis } = &self.generator else {
            return None;
        };
        let h = basis * p.scale;
        let o = p.center - (h.column(0) + h.column(1)) * 0.5;
        Some([o, o + h.column(0), o + h.column(0) + h.column(1), o + h.column(1)])
    }
}

pub fn vitali_pack(
    domain: &Domain2,
    generator: &Generator,
    target: f64,
    min_scale: f64,
    seed: u64,
) -> Result<CellCover, GeometryError> {
    domain.validate()?;
    if !(target > 0.0 && target < 1.0) {
        return Err(GeometryError::InvalidPacking(format!("target {target} must lie in (0, 1)")));
    }
    if !(min_scale > 0.0) {
        return Err(GeometryError::InvalidPacking(format!("min_scale {min_scale} must be positive")));
    }
    match generator {
        Generator::Disk => Ok(pack_disks(domain, target, min_scale, seed)),
        Generator::Parallelogram { basis } => {
            if basis.determinant().abs() <= 0.0 {
                return Err(GeometryError::InvalidPacking("degenerate parallelogram".into()));
            }
            Ok(pack_lattice(domain, basis, target, min_scale, seed, 4_000_000).0)
        }
    }
}

struct DiskHash {
    cell: f64,
    map: HashMap<(i64, i64), Vec<u32>>,
}

impl DiskHash {
    fn insert(&mut self, k: u32, c: &Vec2, r: f64) {
        let (i0, j0) = self.key(&(c - Vec2::new(r, r)));
        let (i1, j1) = self.key(&(c + Vec2::new(r, r)));
        for j in j0..=j1 {
            for i in i0..=i1 {
                self.map.entry((i, j)).or_default().push(k);
            }
        }
    }
    fn key(&self, p: &Vec2) -> (i64, i64) {
        ((p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64)
    }
    /// Largest radius at `p` avoiding placed disks, capped at `cap`.
    fn room(&self, p: &Vec2, cap: f64, disks: &[(Vec2, f64)]) -> f64 {
        let (i0, j0) = self.key(&(p - Vec2::new(cap, cap)));
        let (i1, j1) = self.key(&(p + Vec2::new(cap, cap)));
        let mut room = cap;
        for j in j0..=j1 {
            for i in i0..=i1 {
                if let Some(v) = self.map.get(&(i, j)) {
                    for &k in v {
                        let (c, r) = disks[k as usize];
                        room = room.min((p - c).norm() - r);
                    }
                }
            }
        }
        room
    }
}

/// Approximate Chebyshev center: best point of a grid, refined locally.
fn chebyshev_center(domain: &Domain2) -> (Vec2, f64) {
    if let Domain2::Disk { center, radius } = domain {
        return (*center, *radius);
    }
    let (lo, hi) = domain.bbox();
    let mut best = (lo, f64::NEG_INFINITY);
    let n = 64;
    for j in 0..=n {
        for i in 0..=n {
            let p = lo + (hi - lo).component_mul(&Vec2::new(i as f64 / n as f64, j as f64 / n as f64));
            if domain.contains(&p, 0.0) {
                let d = domain.boundary_distance(&p);
                if d > best.1 {
                    best = (p, d);
                }
            }
        }
    }
    let mut step = (hi - lo).max() / n as f64;
    for _ in 0..40 {
        let mut improved = false;
        for dir in [Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(0.0, -1.0)] {
            let p = best.0 + dir * step;
            if domain.contains(&p, 0.0) {
                let d = domain.boundary_distance(&p);
                if d > best.1 {
                    best = (p, d);
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

fn pack_disks(domain: &Domain2, target: f64, min_scale: f64, seed: u64) -> CellCover {
    let area = domain.area();
    let shrink = 1.0 - 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c0, r0) = chebyshev_center(domain);
    let mut disks: Vec<(Vec2, f64)> = vec![(c0, r0 * shrink)];
    let mut covered = std::f64::consts::PI * (r0 * shrink).powi(2);
    let mut hash = DiskHash { cell: (r0 / 32.0).max(min_scale), map: HashMap::new() };
    hash.insert(0, &c0, r0 * shrink);
    let (lo, hi) = domain.bbox();
    let mut rho = r0 * 0.5;
    while covered / area < target && rho >= min_scale {
        let spacing = 0.5 * rho;
        let off = Vec2::new(rng.gen::<f64>(), rng.gen::<f64>()) * spacing;
        let nx = ((hi.x - lo.x) / spacing).ceil() as i64 + 1;
        let ny = ((hi.y - lo.y) / spacing).ceil() as i64 + 1;
        let cap = 2.0 * rho;
        let mut cands: Vec<(f64, Vec2)> = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let p = lo + off + Vec2::new(i as f64, j as f64) * spacing;
                if !domain.contains(&p, 0.0) {
                    continue;
                }
                let room = hash.room(&p, cap, &disks).min(domain.boundary_distance(&p));
                if room >= rho {
                    cands.push((room, p));
                }
            }
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.y.total_cmp(&b.1.y)).then(a.1.x.total_cmp(&b.1.x)));
        for (_, p) in cands {
            let room = hash.room(&p, cap, &disks).min(domain.boundary_distance(&p));
            if room < rho {
                continue;
            }
            let r = room * shrink;
            hash.insert(disks.len() as u32, &p, r);
            disks.push((p, r));
            covered += std::f64::consts::PI * r * r;
            if covered / area >= target {
                break;
            }
        }
        rho *= 0.75;
    }
    let frac = covered / area;
    CellCover {
        generator: Generator::Disk,
        placements: disks
            .into_iter()
            .map(|(c, r)| Placement { center: c, scale: r, orientation: Mat2::identity() })
            .collect(),
        covered_fraction: frac,
        status: if frac >= target { PackStatus::Reached } else { PackStatus::TargetUnreachable { achieved: frac } },
        levels: Vec::new(),
    }
}

/// Dyadic lattice packing; the lattice is anchored at the first polygon
/// vertex (or the disk's lowest point) plus a seeded sub-cell offset.
pub(crate) fn pack_lattice(
    domain: &Domain2,
    basis: &Mat2,
    target: f64,
    min_scale: f64,
    seed: u64,
    cap: usize,
) -> (CellCover, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchor = match domain {
        Domain2::Polygon { vertices } => vertices[0],
        Domain2::Disk { center, radius } => center - Vec2::new(0.0, *radius),
    };
    let off = Vec2::new(rng.gen::<f64>(), rng.gen::<f64>());
    let binv = basis.try_inverse().expect("checked non-degenerate");
    let region = domain.region_in(&binv, &anchor);
    let region = match region {
        super::Region::Polygon { pts, .. } => super::Region::polygon(pts.iter().map(|p| p + off).collect()),
        super::Region::Ellipse { center, q } => super::Region::Ellipse { center: center + off, q },
    };
    let l_max = ((1.0 / min_scale).log2().ceil().max(0.0) as u32).min(40);
    let (cells, capped) = lattice::enumerate(&region, 0, l_max, cap);
    let area = domain.area();
    let unit = basis.determinant().abs();
    let mut placements = Vec::new();
    let mut levels = Vec::new();
    let mut covered = 0.0;
    let mut current = u32::MAX;
    for c in &cells {
        if c.level != current {
            if covered / area >= target {
                break;
            }
            current = c.level;
        }
        let s = c.side();
        let o = c.corner() - off;
        let center = anchor + basis * (o + Vec2::new(0.5, 0.5) * s);
        placements.push(Placement { center, scale: s, orientation: *basis });
        levels.push(c.level);
        covered += unit * s * s;
    }
    let frac = covered / area;
    let cover = CellCover {
        generator: Generator::Parallelogram { basis: *basis },
        placements,
        covered_fraction: frac,
        status: if frac >= target { PackStatus::Reached } else { PackStatus::TargetUnreachable { achieved: frac } },
        levels,
    };
    (cover, capped)
}
