//! Planar predicates shared by packing, evaluation and audits.

use crate::kernel::Vec2;

pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Signed area (positive for counterclockwise order).
pub fn polygon_area(p: &[Vec2]) -> f64 {
    let n = p.len();
    (0..n).map(|i| cross(&p[i], &p[(i + 1) % n])).sum::<f64>() * 0.5
}

pub fn polygon_centroid(p: &[Vec2]) -> Vec2 {
    let n = p.len();
    let mut c = Vec2::zeros();
    let mut a = 0.0;
    for i in 0..n {
        let w = cross(&p[i], &p[(i + 1) % n]);
        a += w;
        c += (p[i] + p[(i + 1) % n]) * w;
    }
    c / (3.0 * a)
}

/// Closed point-in-polygon test: crossing number plus an explicit boundary check.
pub fn point_in_polygon(p: &[Vec2], x: &Vec2, tol: f64) -> bool {
    let n = p.len();
    let mut inside = false;
    for i in 0..n {
        let a = p[i];
        let b = p[(i + 1) % n];
        if dist_point_segment(x, &a, &b) <= tol {
            return true;
        }
        if (a.y > x.y) != (b.y > x.y) {
            let t = (x.y - a.y) / (b.y - a.y);
            if x.x < a.x + t * (b.x - a.x) {
                inside = !inside;
            }
        }
    }
    inside
}

pub fn dist_point_segment(x: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let d = b - a;
    let l2 = d.norm_squared();
    if l2 == 0.0 {
        return (x - a).norm();
    }
    let t = ((x - a).dot(&d) / l2).clamp(0.0, 1.0);
    (x - (a + d * t)).norm()
}

pub fn dist_to_polygon_boundary(p: &[Vec2], x: &Vec2) -> f64 {
    let n = p.len();
    (0..n)
        .map(|i| dist_point_segment(x, &p[i], &p[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Proper crossing of two open segments.
pub fn segments_cross(a: &Vec2, b: &Vec2, c: &Vec2, d: &Vec2) -> bool {
    let o1 = cross(&(b - a), &(c - a));
    let o2 = cross(&(b - a), &(d - a));
    let o3 = cross(&(d - c), &(a - c));
    let o4 = cross(&(d - c), &(b - c));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

pub fn is_convex_ccw(p: &[Vec2]) -> bool {
    let n = p.len();
    (0..n).all(|i| cross(&(p[(i + 1) % n] - p[i]), &(p[(i + 2) % n] - p[(i + 1) % n])) >= 0.0)
}

pub fn is_simple(p: &[Vec2]) -> bool {
    let n = p.len();
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(&p[i], &p[(i + 1) % n], &p[j], &p[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Barycentric coordinates of `x` in triangle `t`.
pub fn barycentric(t: &[Vec2; 3], x: &Vec2) -> [f64; 3] {
    let d = cross(&(t[1] - t[0]), &(t[2] - t[0]));
    let l1 = cross(&(x - t[0]), &(t[2] - t[0])) / d;
    let l2 = cross(&(t[1] - t[0]), &(x - t[0])) / d;
    [1.0 - l1 - l2, l1, l2]
}

pub fn in_triangle(t: &[Vec2; 3], x: &Vec2, tol: f64) -> bool {
    barycentric(t, x).iter().all(|&l| l >= -tol)
}

/// A closed convex or simple region in some planar coordinates, used by the
/// lattice packer to classify candidate cells.
#[derive(Clone, Debug)]
pub enum Region {
    /// Counterclockwise polygon with a flag for convexity.
    Polygon { pts: Vec<Vec2>, convex: bool },
    /// `{x : (x - c)^T Q (x - c) <= 1}`
    Ellipse { center: Vec2, q: crate::kernel::Mat2 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellClass {
    Inside,
    Outside,
    Partial,
}

impl Region {
    pub fn polygon(pts: Vec<Vec2>) -> Self {
        let convex = is_convex_ccw(&pts);
        Region::Polygon { pts, convex }
    }

    pub fn contains(&self, x: &Vec2) -> bool {
        match self {
            Region::Polygon { pts, convex } => {
                if *convex {
                    let n = pts.len();
                    (0..n).all(|i| cross(&(pts[(i + 1) % n] - pts[i]), &(x - pts[i])) >= 0.0)
                } else {
                    point_in_polygon(pts, x, 0.0)
                }
            }
            Region::Ellipse { center, q } => {
                let d = x - center;
                d.dot(&(q * d)) <= 1.0
            }
        }
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        match self {
            Region::Polygon { pts, .. } => bbox(pts),
            Region::Ellipse { center, q } => {
                let inv = q.try_inverse().unwrap_or_else(crate::kernel::Mat2::identity);
                let hx = inv[(0, 0)].max(0.0).sqrt();
                let hy = inv[(1, 1)].max(0.0).sqrt();
                (center - Vec2::new(hx, hy), center + Vec2::new(hx, hy))
            }
        }
    }

    /// Classify the axis-aligned square `[x0, x0 + s] x [y0, y0 + s]`.
    pub fn classify(&self, x0: f64, y0: f64, s: f64) -> CellClass {
        let c = [
            Vec2::new(x0, y0),
            Vec2::new(x0 + s, y0),
            Vec2::new(x0 + s, y0 + s),
            Vec2::new(x0, y0 + s),
        ];
        let inside = c.iter().filter(|p| self.contains(p)).count();
        match self {
            Region::Polygon { pts, convex } => {
                let vertex_in = pts
                    .iter()
                    .any(|p| p.x > x0 && p.x < x0 + s && p.y > y0 && p.y < y0 + s);
                let n = pts.len();
                let crosses = || {
                    (0..n).any(|i| {
                        let (a, b) = (pts[i], pts[(i + 1) % n]);
                        (0..4).any(|k| segments_cross(&a, &b, &c[k], &c[(k + 1) % 4]))
                    })
                };
                if inside == 4 {
                    if *convex || (!vertex_in && !crosses()) {
                        return CellClass::Inside;
                    }
                    return CellClass::Partial;
                }
                if inside == 0 && !vertex_in {
                    // separated unless an edge passes through the square
                    let (lo, hi) = bbox(pts);
                    if lo.x >= x0 + s || hi.x <= x0 || lo.y >= y0 + s || hi.y <= y0 {
                        return CellClass::Outside;
                    }
                    if !crosses() {
                        return CellClass::Outside;
                    }
                }
                CellClass::Partial
            }
            Region::Ellipse { center, q } => {
                if inside == 4 {
                    return CellClass::Inside;
                }
                // nearest point of the square to the center, in the ellipse metric
                // the check below is conservative: outside only if the whole
                // square avoids the ellipse's bounding box or the closest point is out
                let p = Vec2::new(center.x.clamp(x0, x0 + s), center.y.clamp(y0, y0 + s));
                let d = p - center;
                if inside == 0 && d.dot(&(q * d)) > 1.0 && !ellipse_meets_square(center, q, x0, y0, s) {
                    return CellClass::Outside;
                }
                CellClass::Partial
            }
        }
    }
}

fn ellipse_meets_square(center: &Vec2, q: &crate::kernel::Mat2, x0: f64, y0: f64, s: f64) -> bool {
    // sample the square boundary finely; only used to confirm separation
    let n = 16;
    for k in 0..=n {
        let t = s * k as f64 / n as f64;
        for p in [
            Vec2::new(x0 + t, y0),
            Vec2::new(x0 + t, y0 + s),
            Vec2::new(x0, y0 + t),
            Vec2::new(x0 + s, y0 + t),
        ] {
            let d = p - center;
            if d.dot(&(q * d)) <= 1.0 {
                return true;
            }
        }
    }
    false
}

pub fn bbox(pts: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = -lo;
    for p in pts {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}
