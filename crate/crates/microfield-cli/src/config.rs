//! Scenario files: TOML with an explicit schema tag.

use std::path::{Path, PathBuf};

use microfield::construct::PackParams;
use microfield::geometry::Domain2;
use microfield::{TracelessMat2, Vec2};
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const SCHEMA: &str = "microfield/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Construction {
    ExplicitDisk,
    GeneralDomain,
    Pompe,
    OpenRefine,
    Integrate,
}

impl Construction {
    pub fn name(self) -> &'static str {
        match self {
            Construction::ExplicitDisk => "explicit-disk",
            Construction::GeneralDomain => "general-domain",
            Construction::Pompe => "pompe",
            Construction::OpenRefine => "open-refine",
            Construction::Integrate => "integrate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub name: String,
    pub construction: Construction,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "Domain2::unit_square")]
    pub domain: Domain2,
    #[serde(default)]
    pub datum: DatumSpec,
    #[serde(default)]
    pub inapprox: InapproxSpec,
    #[serde(default)]
    pub budget: BudgetSpec,
    #[serde(default)]
    pub pompe: PompeSpec,
    #[serde(default)]
    pub disk: DiskSpec,
    #[serde(default)]
    pub pack: PackSpec,
    #[serde(default)]
    pub audit: AuditSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Affine datum `x -> A x + t` with `A = [[a1, a2 + a3], [a2 - a3, -a1]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatumSpec {
    pub a: [f64; 3],
    pub shift: [f64; 2],
}

impl Default for DatumSpec {
    fn default() -> Self {
        DatumSpec { a: [0.5, 0.0, 0.0], shift: [0.0, 0.0] }
    }
}

impl DatumSpec {
    pub fn matrix(&self) -> microfield::Mat2 {
        TracelessMat2::new(self.a[0], self.a[1], self.a[2]).to_matrix()
    }

    pub fn shift(&self) -> Vec2 {
        Vec2::new(self.shift[0], self.shift[1])
    }
}

/// Parameters of the planar sequence driving the refinement. `dimension = 3`
/// runs the same stages on the extrusion `(u, 0) + w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InapproxSpec {
    pub dimension: usize,
    pub bound_m: f64,
    pub m: f64,
    pub depth: usize,
}

impl Default for InapproxSpec {
    fn default() -> Self {
        InapproxSpec { dimension: 2, bound_m: 0.5, m: 2.0, depth: 6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSpec {
    pub eps: f64,
    pub stages: usize,
    pub rounds: u32,
    /// Target index of `open-refine`.
    pub target: usize,
    pub samples: usize,
    pub levels: u32,
    pub flatness: f64,
    /// Final p95 well distance the integrate audit accepts.
    pub p95: f64,
}

impl Default for BudgetSpec {
    fn default() -> Self {
        BudgetSpec {
            eps: 0.05,
            stages: 4,
            rounds: 24,
            target: 2,
            samples: 20_000,
            levels: 20,
            flatness: 0.125,
            p95: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PompeSpec {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub lambda: f64,
    pub eps: f64,
    /// Allowed excess of the flagged measure over `5/6 covered + residual`.
    pub slack: f64,
}

impl Default for PompeSpec {
    fn default() -> Self {
        // A - B = E
        PompeSpec { a: [0.0, 0.25, 0.25], b: [0.0, -0.25, -0.25], lambda: 0.5, eps: 0.1, slack: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiskSpec {
    pub radius: f64,
    pub sign: f64,
}

impl Default for DiskSpec {
    fn default() -> Self {
        DiskSpec { radius: 1.0, sign: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PackSpec {
    pub target: f64,
    pub min_scale: f64,
    pub seed: u64,
}

impl Default for PackSpec {
    fn default() -> Self {
        let p = PackParams::default();
        PackSpec { target: p.target, min_scale: p.min_scale, seed: p.seed }
    }
}

impl PackSpec {
    pub fn params(&self) -> PackParams {
        PackParams { target: self.target, min_scale: self.min_scale, seed: self.seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSpec {
    pub samples: usize,
    pub boundary: usize,
    pub continuity_cells: usize,
}

impl Default for AuditSpec {
    fn default() -> Self {
        AuditSpec { samples: 10_000, boundary: 1_000, continuity_cells: 2_000 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    /// Also write an SVG: `mesh`, `heatmap` or `decay`.
    pub render: Option<String>,
}

impl Scenario {
    pub fn default_for(c: Construction) -> Self {
        Scenario {
            schema: SCHEMA.into(),
            name: c.name().into(),
            construction: c,
            seed: 7,
            domain: match c {
                Construction::ExplicitDisk => Domain2::Disk { center: Vec2::zeros(), radius: 1.0 },
                _ => Domain2::unit_square(),
            },
            datum: DatumSpec::default(),
            inapprox: InapproxSpec::default(),
            budget: BudgetSpec::default(),
            pompe: PompeSpec::default(),
            disk: DiskSpec::default(),
            pack: PackSpec::default(),
            audit: AuditSpec::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|f| Failure::config(format!("{}: {}", path.display(), f.message)))
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let s: Scenario = toml::from_str(text).map_err(|e| Failure::config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Semantic checks that do not depend on the mathematics of the
    /// construction (those surface as precondition failures).
    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |m: String| Err(Failure::config(m));
        if self.schema != SCHEMA {
            return bad(format!("schema = {:?} is not supported; expected {SCHEMA:?}", self.schema));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("name = {:?} must be a non-empty file stem", self.name));
        }
        self.domain.validate().map_err(|e| Failure::config(format!("[domain] {e}")))?;
        let b = &self.budget;
        if !(b.eps > 0.0) {
            return bad(format!("[budget] eps = {} must be positive", b.eps));
        }
        if b.stages == 0 || b.rounds == 0 {
            return bad("[budget] stages and rounds must be at least 1".into());
        }
        if b.samples == 0 {
            return bad("[budget] samples must be at least 1".into());
        }
        if !(b.flatness > 0.0 && b.flatness <= 1.0) {
            return bad(format!("[budget] flatness = {} must lie in (0, 1]", b.flatness));
        }
        if !matches!(self.inapprox.dimension, 2 | 3) {
            return bad(format!("[inapprox] dimension = {} must be 2 or 3", self.inapprox.dimension));
        }
        if !(self.pack.target > 0.0 && self.pack.target < 1.0) {
            return bad(format!("[pack] target = {} must lie in (0, 1)", self.pack.target));
        }
        if !(self.pack.min_scale > 0.0) {
            return bad("[pack] min_scale must be positive".into());
        }
        if !(self.pompe.eps > 0.0) {
            return bad(format!("[pompe] eps = {} must be positive", self.pompe.eps));
        }
        if let Some(r) = &self.output.render {
            if !matches!(r.as_str(), "mesh" | "heatmap" | "decay") {
                return bad(format!("[output] render = {r:?} must be mesh, heatmap or decay"));
            }
        }
        Ok(())
    }
}
