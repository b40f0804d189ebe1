//! Dyadic quadtree packing in lattice coordinates.
//!
//! A region is given in coordinates where the tile lattice is the integer
//! grid.  At level `l` the candidate cells are the squares of side `2^-l`; a
//! cell is placed when it lies inside the region, its level is admissible
//! (`l >= l_min`) and no ancestor was placed.  The union of placed cells down
//! to `l_max` equals the union of inside cells at level `l_max`, which is what
//! the row scans below measure.

use crate::kernel::Vec2;

use super::region::{CellClass, Region};

/// Horizontal chord `[lo, hi]` of a convex counterclockwise polygon at height `y`.
pub fn chord(pts: &[Vec2], y: f64) -> Option<(f64, f64)> {
    let n = pts.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let (ymin, ymax) = if a.y <= b.y { (a.y, b.y) } else { (b.y, a.y) };
        if y < ymin || y > ymax {
            continue;
        }
        if a.y == b.y {
            lo = lo.min(a.x.min(b.x));
            hi = hi.max(a.x.max(b.x));
        } else {
            let x = a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x);
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Number of level-`l` cells inside a convex polygon.
pub fn inside_count(pts: &[Vec2], level: u32) -> u64 {
    let s = (-(level as f64)).exp2();
    let inv = 1.0 / s;
    let (ymin, ymax) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
    let j0 = (ymin * inv).floor() as i64;
    let j1 = (ymax * inv).ceil() as i64;
    let mut total = 0u64;
    let mut prev = chord(pts, j0 as f64 * s);
    for j in j0..j1 {
        let next = chord(pts, (j + 1) as f64 * s);
        if let (Some((l0, h0)), Some((l1, h1))) = (prev, next) {
            let lo = l0.max(l1);
            let hi = h0.min(h1);
            let i0 = (lo * inv).ceil();
            let i1 = (hi * inv).floor();
            if i1 > i0 {
                total += (i1 - i0) as u64;
            }
        }
        prev = next;
    }
    total
}

/// Covered area fraction of a convex polygon at level `l_max`.
pub fn coverage(pts: &[Vec2], l_max: u32) -> f64 {
    let area = super::region::polygon_area(pts);
    let s = (-(l_max as f64)).exp2();
    inside_count(pts, l_max) as f64 * s * s / area
}

/// Per-level inside counts `0..=l_max`.
pub fn inside_profile(pts: &[Vec2], l_max: u32) -> Vec<u64> {
    (0..=l_max).map(|l| inside_count(pts, l)).collect()
}

/// Number of placed cells given a per-level inside profile.
pub fn placed_from_profile(profile: &[u64], l_min: u32) -> f64 {
    let lm = l_min as usize;
    if lm >= profile.len() {
        return 0.0;
    }
    let mut total = profile[lm] as f64;
    for l in lm + 1..profile.len() {
        total += profile[l] as f64 - 4.0 * profile[l - 1] as f64;
    }
    total
}

fn corners_inside(pts: &[Vec2], x0: f64, y0: f64, s: f64) -> bool {
    let n = pts.len();
    let c = [
        Vec2::new(x0, y0),
        Vec2::new(x0 + s, y0),
        Vec2::new(x0 + s, y0 + s),
        Vec2::new(x0, y0 + s),
    ];
    c.iter().all(|q| {
        (0..n).all(|i| {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            (b.x - a.x) * (q.y - a.y) - (b.y - a.y) * (q.x - a.x) >= 0.0
        })
    })
}

/// Placed cell `(level, i, j)` containing `p`, for a convex polygon.
pub fn locate_convex(pts: &[Vec2], p: &Vec2, l_min: u32, l_max: u32) -> Option<(u32, i64, i64)> {
    for l in 0..=l_max {
        let sc = (l as f64).exp2();
        let i = (p.x * sc).floor();
        let j = (p.y * sc).floor();
        let s = 1.0 / sc;
        if corners_inside(pts, i * s, j * s, s) {
            if l >= l_min {
                return Some((l, i as i64, j as i64));
            }
            let sm = (l_min as f64).exp2();
            return Some((l_min, (p.x * sm).floor() as i64, (p.y * sm).floor() as i64));
        }
    }
    None
}

/// A placed quadtree cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatticeCell {
    pub level: u32,
    pub i: i64,
    pub j: i64,
}

impl LatticeCell {
    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }
    pub fn corner(&self) -> Vec2 {
        Vec2::new(self.i as f64, self.j as f64) * self.side()
    }
}

/// Enumerate placed cells of an arbitrary simple region.  Returns the cells
/// in deterministic (level, row, column) order and whether the cap was hit.
pub fn enumerate(region: &Region, l_min: u32, l_max: u32, cap: usize) -> (Vec<LatticeCell>, bool) {
    let (lo, hi) = region.bbox();
    let mut out = Vec::new();
    let mut frontier: Vec<LatticeCell> = Vec::new();
    for j in lo.y.floor() as i64..hi.y.ceil() as i64 {
        for i in lo.x.floor() as i64..hi.x.ceil() as i64 {
            frontier.push(LatticeCell { level: 0, i, j });
        }
    }
    let mut capped = false;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for c in frontier {
            let s = c.side();
            let o = c.corner();
            match region.classify(o.x, o.y, s) {
                CellClass::Outside => {}
                CellClass::Inside => {
                    if c.level >= l_min {
                        out.push(c);
                    } else {
                        let k = 1i64 << (l_min - c.level);
                        for dj in 0..k {
                            for di in 0..k {
                                out.push(LatticeCell { level: l_min, i: c.i * k + di, j: c.j * k + dj });
                            }
                        }
                    }
                }
                CellClass::Partial => {
                    if c.level < l_max {
                        for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                            next.push(LatticeCell { level: c.level + 1, i: 2 * c.i + di, j: 2 * c.j + dj });
                        }
                    }
                }
            }
            if out.len() > cap {
                capped = true;
                break;
            }
        }
        if capped {
            break;
        }
        frontier = next;
    }
    out.sort_by_key(|c| (c.level, c.j, c.i));
    (out, capped)
}
