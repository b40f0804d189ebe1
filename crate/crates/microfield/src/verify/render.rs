use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{piece_value0, probe, probe_distance};
use crate::construct::StageMetrics;
use crate::geometry::{Payload, PiecewiseField, Shape};
use crate::kernel::Vec2;
use crate::wells::WellSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RenderMode {
    /// Pieces drawn at `x + magnification u(x)`.
    DeformedMesh { magnification: f64 },
    /// Grid of `resolution^2` probes colored by log-binned well distance.
    Heatmap { set: WellSet, resolution: usize },
    /// p95 distance and bad fraction against the global round.
    StageDecay { metrics: Vec<StageMetrics> },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderError {
    #[error("cannot render a {requested}-dimensional quantity of a {field}-dimensional field")]
    UnrenderableDimension { field: usize, requested: usize },
}

const SIZE: f64 = 800.0;
/// Pieces drawn at most; larger fields are truncated in id order.
const MAX_PIECES: usize = 60_000;
/// Heatmap bins per decade over `[1e-12, 1]`.
const BINS: usize = 12;

struct Frame {
    lo: Vec2,
    scale: f64,
}

impl Frame {
    fn new(lo: Vec2, hi: Vec2) -> Self {
        let ext = (hi - lo).max().max(1e-300);
        let pad = 0.05 * ext;
        let lo = lo - Vec2::new(pad, pad);
        Frame { lo, scale: SIZE / (ext + 2.0 * pad) }
    }

    fn map(&self, p: &Vec2) -> (f64, f64) {
        ((p.x - self.lo.x) * self.scale, SIZE - (p.y - self.lo.y) * self.scale)
    }

    fn path(&self, pts: &[Vec2]) -> String {
        let mut s = String::new();
        for (k, p) in pts.iter().enumerate() {
            let (x, y) = self.map(p);
            let _ = write!(s, "{}{:.3},{:.3}", if k == 0 { "M" } else { " L" }, x, y);
        }
        s.push_str(" Z");
        s
    }
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {SIZE} {SIZE}\" width=\"{SIZE}\" height=\"{SIZE}\">\n<title>{title}</title>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn outline(f: &PiecewiseField, fr: &Frame) -> String {
    let pts = match &f.domain {
        crate::geometry::Domain2::Polygon { vertices } => vertices.clone(),
        d => (0..128).map(|k| d.boundary_point(k as f64 / 128.0)).collect(),
    };
    format!("<path d=\"{}\" fill=\"none\" stroke=\"#555\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n", fr.path(&pts))
}

/// Deterministic SVG document for a planar field.
pub fn render(f: &PiecewiseField, mode: &RenderMode) -> Result<String, RenderError> {
    let (lo, hi) = f.domain.bbox();
    match mode {
        RenderMode::DeformedMesh { magnification } => Ok(deformed(f, *magnification, Frame::new(lo, hi))),
        RenderMode::Heatmap { set, resolution } => {
            if set.dimension() == 3 && !f.embed3d {
                return Err(RenderError::UnrenderableDimension { field: 2, requested: 3 });
            }
            Ok(heatmap(f, set, (*resolution).max(1), Frame::new(lo, hi)))
        }
        RenderMode::StageDecay { metrics } => Ok(decay(metrics)),
    }
}

fn deformed(f: &PiecewiseField, s: f64, fr: Frame) -> String {
    let mut out = header("deformed mesh");
    out.push_str(&outline(f, &fr));
    let mut drawn = 0usize;
    out.push_str("<g fill=\"#cfe0f5\" fill-opacity=\"0.6\" stroke=\"#1f3b73\" stroke-width=\"0.6\">\n");
    'cells: for c in &f.cells {
        if let Payload::Disk(d) = &c.payload {
            for frac in [1.0, 0.75, 0.5, 0.25] {
                let pts: Vec<Vec2> = (0..64)
                    .map(|k| {
                        let a = std::f64::consts::TAU * k as f64 / 64.0;
                        let x = d.center + Vec2::new(a.cos(), a.sin()) * (d.radius * frac);
                        x + d.eval_2d(&x).0 * s
                    })
                    .collect();
                let _ = writeln!(out, "<path d=\"{}\"/>", fr.path(&pts));
            }
            drawn += 1;
            continue;
        }
        for (k, (t, g)) in c.derived_pieces().iter().enumerate() {
            if drawn >= MAX_PIECES {
                break 'cells;
            }
            let v0 = piece_value0(c, k);
            let pts: Vec<Vec2> = t.iter().map(|x| x + (v0 + g * (x - t[0])) * s).collect();
            let _ = writeln!(out, "<path d=\"{}\"/>", fr.path(&pts));
            drawn += 1;
        }
    }
    out.push_str("</g>\n");
    let _ = writeln!(
        out,
        "<text x=\"12\" y=\"22\" font-family=\"monospace\" font-size=\"14\">magnification s = {s}</text>"
    );
    if matches!(f.cells.first().map(|c| &c.shape), Some(Shape::Tile { .. })) && drawn >= MAX_PIECES {
        let _ = writeln!(out, "<text x=\"12\" y=\"40\" font-family=\"monospace\" font-size=\"12\">first {MAX_PIECES} pieces</text>");
    }
    out.push_str("</svg>\n");
    out
}

fn bin_color(bin: usize) -> String {
    // blue (small distance) to red
    let t = bin as f64 / BINS as f64;
    let r = (40.0 + 215.0 * t).round() as u8;
    let g = (90.0 + 80.0 * (1.0 - (2.0 * t - 1.0).abs())).round() as u8;
    let b = (230.0 - 200.0 * t).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Log bin of a distance over `[1e-12, 1]`.
pub(crate) fn distance_bin(d: f64) -> usize {
    if !(d > 1e-12) {
        return 0;
    }
    let t = (d.log10() + 12.0).clamp(0.0, 12.0);
    ((t / 12.0 * BINS as f64).floor() as usize).min(BINS - 1) + 1
}

fn heatmap(f: &PiecewiseField, set: &WellSet, n: usize, fr: Frame) -> String {
    let mut out = header("well-distance heatmap");
    let (lo, hi) = f.domain.bbox();
    let hx = (hi.x - lo.x) / n as f64;
    let hy = (hi.y - lo.y) / n as f64;
    let w = hx * fr.scale;
    let hgt = hy * fr.scale;
    for j in 0..n {
        for i in 0..n {
            let x = Vec2::new(lo.x + (i as f64 + 0.5) * hx, lo.y + (j as f64 + 0.5) * hy);
            if !f.domain.contains(&x, 0.0) {
                continue;
            }
            let p = probe(f, &x);
            if p.cell.is_none() {
                continue;
            }
            let bin = distance_bin(probe_distance(&p, set));
            let (px, py) = fr.map(&Vec2::new(lo.x + i as f64 * hx, lo.y + (j + 1) as f64 * hy));
            let _ = writeln!(
                out,
                "<rect x=\"{px:.3}\" y=\"{py:.3}\" width=\"{w:.3}\" height=\"{hgt:.3}\" fill=\"{}\"/>",
                bin_color(bin)
            );
        }
    }
    out.push_str(&outline(f, &fr));
    for b in 0..=BINS {
        let y = 60.0 + 18.0 * b as f64;
        let label = if b == 0 { "&lt;= 1e-12".to_string() } else { format!("&lt;= 1e{}", b as i32 - 12) };
        let _ = writeln!(
            out,
            "<rect x=\"700\" y=\"{y}\" width=\"16\" height=\"16\" fill=\"{}\"/><text x=\"720\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">{label}</text>",
            bin_color(b),
            y + 12.0
        );
    }
    out.push_str("</svg>\n");
    out
}

fn decay(metrics: &[StageMetrics]) -> String {
    let mut out = header("stage decay");
    let (x0, x1, y0, y1) = (70.0, SIZE - 30.0, SIZE - 60.0, 40.0);
    let floor = 1e-6f64;
    let ymap = |v: f64| {
        let t = (v.max(floor).log10() - floor.log10()) / (0.0 - floor.log10());
        y0 + (y1 - y0) * t.clamp(0.0, 1.0)
    };
    let n = metrics.len().max(2) - 1;
    let xmap = |k: usize| x0 + (x1 - x0) * k as f64 / n as f64;
    let _ = writeln!(out, "<path d=\"M{x0},{y1} L{x0},{y0} L{x1},{y0}\" fill=\"none\" stroke=\"black\"/>");
    for e in 0..=6 {
        let v = 10f64.powi(-e);
        let y = ymap(v);
        let _ = writeln!(
            out,
            "<text x=\"8\" y=\"{:.3}\" font-family=\"monospace\" font-size=\"11\">1e-{e}</text><path d=\"M{x0},{y:.3} L{x1},{y:.3}\" stroke=\"#ddd\"/>",
            y + 4.0
        );
    }
    let series = |get: &dyn Fn(&StageMetrics) -> f64, color: &str| {
        let mut s = String::new();
        for (k, m) in metrics.iter().enumerate() {
            let _ = write!(s, "{}{:.3},{:.3}", if k == 0 { "M" } else { " L" }, xmap(k), ymap(get(m)));
        }
        format!("<path d=\"{s}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n")
    };
    if !metrics.is_empty() {
        out.push_str(&series(&|m| m.p95, "#c0392b"));
        out.push_str(&series(&|m| m.bad_fraction, "#2c6fbb"));
        for (k, m) in metrics.iter().enumerate() {
            let last = metrics.get(k + 1).map_or(true, |n| n.stage != m.stage);
            if last {
                let _ = writeln!(
                    out,
                    "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"4\" fill=\"#c0392b\"/>",
                    xmap(k),
                    ymap(m.p95)
                );
            }
        }
    }
    let _ = writeln!(
        out,
        "<text x=\"{x0}\" y=\"24\" font-family=\"monospace\" font-size=\"13\"><tspan fill=\"#c0392b\">p95 distance</tspan>  <tspan fill=\"#2c6fbb\">bad fraction</tspan>  (round on x, log scale)</text>"
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_are_logarithmic() {
        assert_eq!(distance_bin(0.0), 0);
        assert_eq!(distance_bin(1e-13), 0);
        assert_eq!(distance_bin(5e-12), 1);
        assert_eq!(distance_bin(0.5), BINS);
        assert_eq!(distance_bin(10.0), BINS);
    }
}
