//! `microfield`: scenario runner for the constructions and audits.
//!
//! Exit codes: 0 success, 2 configuration error, 3 violated precondition of
//! a construction, 4 audit failure.

mod config;
mod dump;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use microfield::construct::{
    affine_datum, construct_open, convex_integrate, explicit_disk_solution, general_domain_solution,
    pompe_construct, ConstructError, RefineOptions, StageMetrics, Target2d,
};
use microfield::geometry::PiecewiseField;
use microfield::inapprox::{build_inapprox_2d, build_inapprox_3d, build_inapprox_nonlinear, validate_inapprox, InapproxError};
use microfield::kernel::{energy_v, energy_vnc, energy_vqce_2d, energy_w, energy_wn, OgdenParams};
use microfield::laminate::{split_2d, split_3d_first, split_3d_second};
use microfield::verify::{audit_with, render, AuditOptions, AuditReport, AuditTarget, RenderMode};
use microfield::wells::WellSet;
use microfield::{Mat2, Mat3, TracelessMat2, TracelessMat3, Vec3};

use config::{Construction, Scenario};

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(m: impl Into<String>) -> Self {
        Failure { code: 2, message: m.into() }
    }

    pub fn precondition(m: impl Into<String>) -> Self {
        Failure { code: 3, message: m.into() }
    }

    pub fn audit(m: impl Into<String>) -> Self {
        Failure { code: 4, message: m.into() }
    }
}

impl From<ConstructError> for Failure {
    fn from(e: ConstructError) -> Self {
        match e {
            ConstructError::PreconditionViolation(m) => Failure::precondition(m),
            ConstructError::InvalidInput(_) => Failure::config(e.to_string()),
            ConstructError::StageRegression { .. } => Failure::audit(e.to_string()),
            ConstructError::Inapprox(InapproxError::ValidationFailure { .. }) => Failure::audit(e.to_string()),
            _ => Failure::precondition(e.to_string()),
        }
    }
}

impl From<InapproxError> for Failure {
    fn from(e: InapproxError) -> Self {
        match e {
            InapproxError::ValidationFailure { .. } => Failure::audit(e.to_string()),
            _ => Failure::precondition(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "microfield", version, about = "Constructions and audits of microstructured divergence-free fields")]
struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory for artifacts.
    #[arg(long, global = true, env = "MICROFIELD_OUT_DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate an energy density on a matrix.
    Energy(EnergyArgs),
    /// Run any scenario file.
    Run(ScenarioArgs),
    /// Closed-form solution on a disk.
    ExplicitDisk(ScenarioArgs),
    /// Disk packing of a polygon carrying rescaled disk solutions.
    GeneralDomain(ScenarioArgs),
    /// Rank-one oscillation between two matrices.
    Pompe(ScenarioArgs),
    /// Refinement toward a single open target.
    OpenRefine(ScenarioArgs),
    /// Staged refinement toward the wells.
    Integrate(ScenarioArgs),
    /// Rank-one splits of a single matrix.
    Laminate(LaminateArgs),
    /// Build and validate an in-approximation.
    Inapprox(InapproxArgs),
    /// Audit a field dump.
    Audit(AuditArgs),
    /// Render a field dump or a metrics table as SVG.
    Render(RenderArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (TOML, `schema = "microfield/1"`); defaults apply without one.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    samples: Option<usize>,
    /// Datum coordinates `a1,a2,a3`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    datum: Option<Vec<f64>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Density {
    /// Linearized relaxed density of a trace-free symmetric 3x3 strain.
    V,
    /// Quadratic limit around a director.
    Vnc,
    /// Relaxed planar density of a trace-free symmetric 2x2 strain.
    Vqce,
    /// Nonlinear density of a 3x3 deformation gradient.
    W,
    /// Director-dependent density.
    Wn,
}

#[derive(Args)]
struct EnergyArgs {
    #[arg(long, value_enum)]
    density: Density,
    /// Row-major entries (4 or 9).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    matrix: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    director: Option<Vec<f64>>,
    /// Nematic parameter `a > 1`.
    #[arg(long, default_value_t = 2.0)]
    nematic: f64,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    c: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    gamma: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    c_vol: f64,
    #[arg(long)]
    compressible: bool,
}

#[derive(Args)]
struct LaminateArgs {
    /// `a1,a2,a3` in two dimensions, or 9 row-major entries with `--split3d`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    matrix: Vec<f64>,
    #[arg(long)]
    split3d: bool,
    /// Split radius (two dimensions).
    #[arg(long, default_value_t = 0.703125)]
    r_tilde: f64,
    /// Skew bound (two dimensions).
    #[arg(long, default_value_t = 2.0)]
    m: f64,
    #[arg(long, default_value_t = 0.475)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    m_next: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeqFamily {
    Lin2d,
    Lin3d,
    Nonlinear,
}

#[derive(Args)]
struct InapproxArgs {
    #[arg(long, value_enum, default_value = "lin2d")]
    family: SeqFamily,
    #[arg(long, default_value_t = 6)]
    depth: usize,
    /// Datum bound `M` (lin2d).
    #[arg(long, default_value_t = 0.5)]
    bound_m: f64,
    /// Skew bound (lin2d).
    #[arg(long, default_value_t = 2.0)]
    m: f64,
    /// `ess inf mu1`, `ess sup mu3` and the gradient bound (lin3d).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-0.3,0.6,1.0")]
    datum3d: Vec<f64>,
    /// Well values `e1,e2,e3` (nonlinear).
    #[arg(long, value_delimiter = ',', default_value = "0.8,1.0,1.25")]
    wells: Vec<f64>,
    /// `ess inf lambda1, ess sup lambda3` (nonlinear).
    #[arg(long, value_delimiter = ',', default_value = "0.9,1.1")]
    lambdas: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetKind {
    Datum,
    Linear2d,
    Linear3d,
    Segment,
}

#[derive(Args)]
struct AuditArgs {
    /// Field dump to audit.
    field: PathBuf,
    #[arg(long, value_enum, default_value = "datum")]
    target: TargetKind,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 1.0)]
    quantile: f64,
    /// Skew bound of the planar wells.
    #[arg(long, default_value_t = 2.0)]
    m: f64,
    /// Segment ends `a1,a2,a3`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    a: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    b: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.01)]
    slack: f64,
    #[arg(long)]
    sup_bound: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1_000)]
    boundary: usize,
    #[arg(long, default_value_t = 2_000)]
    continuity_cells: usize,
    /// Print the runtime-free report (as written next to scenario dumps).
    #[arg(long)]
    canonical: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Mesh,
    Heatmap,
    Decay,
}

#[derive(Args)]
struct RenderArgs {
    /// Field dump (mesh, heatmap) or metrics table (decay).
    input: PathBuf,
    #[arg(long, value_enum, default_value = "mesh")]
    mode: Mode,
    #[arg(long, default_value_t = 1.0)]
    magnification: f64,
    #[arg(long, default_value_t = 200)]
    resolution: usize,
    /// Heatmap wells: planar with this skew bound, or `--linear3d`.
    #[arg(long, default_value_t = 2.0)]
    m: f64,
    #[arg(long)]
    linear3d: bool,
    /// Output file (default: next to the input).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let kind = match f.code {
                2 => "config error",
                3 => "precondition violated",
                4 => "audit failed",
                _ => "error",
            };
            eprintln!("{kind}: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.cmd {
        Cmd::Energy(a) => energy(a),
        Cmd::Run(a) => scenario(cli, a, None),
        Cmd::ExplicitDisk(a) => scenario(cli, a, Some(Construction::ExplicitDisk)),
        Cmd::GeneralDomain(a) => scenario(cli, a, Some(Construction::GeneralDomain)),
        Cmd::Pompe(a) => scenario(cli, a, Some(Construction::Pompe)),
        Cmd::OpenRefine(a) => scenario(cli, a, Some(Construction::OpenRefine)),
        Cmd::Integrate(a) => scenario(cli, a, Some(Construction::Integrate)),
        Cmd::Laminate(a) => laminate(a),
        Cmd::Inapprox(a) => inapprox(a),
        Cmd::Audit(a) => audit_cmd(a),
        Cmd::Render(a) => render_cmd(a),
    }
}

fn mat3(v: &[f64]) -> Result<Mat3, Failure> {
    if v.len() != 9 {
        return Err(Failure::config(format!("expected 9 matrix entries, got {}", v.len())));
    }
    Ok(Mat3::from_row_slice(v))
}

fn energy(a: &EnergyArgs) -> Result<(), Failure> {
    let kerr = |e: microfield::kernel::KernelError| Failure::precondition(e.to_string());
    let params = || {
        OgdenParams::nematic(a.nematic, a.c.clone(), a.gamma.clone(), a.c_vol)
            .map_err(|e| Failure::config(e.to_string()))
    };
    let director = || -> Result<Vec3, Failure> {
        match a.director.as_deref() {
            Some([x, y, z]) => Ok(Vec3::new(*x, *y, *z)),
            _ => Err(Failure::config("--director n1,n2,n3 is required")),
        }
    };
    let value = match a.density {
        Density::V => {
            let (v, n) = energy_v(&mat3(&a.matrix)?).map_err(kerr)?;
            println!("director = {:.17e},{:.17e},{:.17e}", n.x, n.y, n.z);
            v
        }
        Density::Vnc => energy_vnc(&mat3(&a.matrix)?, &director()?, &params()?).map_err(kerr)?,
        Density::Vqce => {
            if a.matrix.len() != 4 {
                return Err(Failure::config("vqce takes 4 matrix entries"));
            }
            energy_vqce_2d(&Mat2::from_row_slice(&a.matrix)).map_err(kerr)?
        }
        Density::W => energy_w(&mat3(&a.matrix)?, &params()?).map_err(kerr)?,
        Density::Wn => energy_wn(&mat3(&a.matrix)?, &director()?, &params()?, a.compressible).map_err(kerr)?,
    };
    println!("energy = {value:.17e}");
    Ok(())
}

fn laminate(a: &LaminateArgs) -> Result<(), Failure> {
    let lerr = |e: microfield::laminate::LaminateError| Failure::precondition(e.to_string());
    if a.split3d {
        let m = mat3(&a.matrix)?;
        let t = TracelessMat3::from_matrix(&m, 1e-9).map_err(|e| Failure::precondition(e.to_string()))?;
        let first = split_3d_first(&t, a.alpha).map_err(lerr)?;
        println!("delta = {:.17e}", first.amplitude);
        for (tag, b) in [("+", first.plus), ("-", first.minus)] {
            let second = split_3d_second(&b, a.alpha, a.m_next).map_err(lerr)?;
            println!("epsilon{tag} = {:.17e}", second.amplitude);
            for (s, c) in [("+", second.plus), ("-", second.minus)] {
                let e = microfield::kernel::eig_sym(&c.sym_matrix()).map_err(|e| Failure::precondition(e.to_string()))?;
                let [l1, l2, l3] = e.values;
                println!("leaf{tag}{s} eigenvalues = {l1:.17e},{l2:.17e},{l3:.17e} skew = {:.17e}", c.skw_norm());
            }
        }
        return Ok(());
    }
    let [a1, a2, a3] = a.matrix[..] else {
        return Err(Failure::config("a planar split takes a1,a2,a3"));
    };
    let (p, q, lambda) = split_2d(&TracelessMat2::new(a1, a2, a3), a.r_tilde, a.m).map_err(lerr)?;
    println!("lambda = {lambda:.17e}");
    println!("a = {:.17e},{:.17e},{:.17e}", p.a1, p.a2, p.a3);
    println!("b = {:.17e},{:.17e},{:.17e}", q.a1, q.a2, q.a3);
    Ok(())
}

fn inapprox(a: &InapproxArgs) -> Result<(), Failure> {
    let seq = match a.family {
        SeqFamily::Lin2d => build_inapprox_2d(a.bound_m, a.m, a.depth)?,
        SeqFamily::Lin3d => {
            let [mu1, mu3, g] = a.datum3d[..] else {
                return Err(Failure::config("--datum3d takes mu1,mu3,bound"));
            };
            build_inapprox_3d(mu1, mu3, g, a.depth)?
        }
        SeqFamily::Nonlinear => {
            let [e1, e2, e3] = a.wells[..] else {
                return Err(Failure::config("--wells takes e1,e2,e3"));
            };
            let [l1, l3] = a.lambdas[..] else {
                return Err(Failure::config("--lambdas takes two values"));
            };
            let p = OgdenParams::new(vec![1.0], vec![2.0], [e1, e2, e3], 1.0).map_err(|e| Failure::config(e.to_string()))?;
            build_inapprox_nonlinear(&p, l1, l3, a.depth)?
        }
    };
    let report = validate_inapprox(&seq, a.samples, a.seed)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn with_overrides(mut s: Scenario, a: &ScenarioArgs) -> Result<Scenario, Failure> {
    if let Some(v) = a.seed {
        s.seed = v;
    }
    if let Some(v) = a.eps {
        s.budget.eps = v;
        s.pompe.eps = v;
    }
    if let Some(v) = a.stages {
        s.budget.stages = v;
    }
    if let Some(v) = a.rounds {
        s.budget.rounds = v;
    }
    if let Some(v) = a.samples {
        s.budget.samples = v;
    }
    if let Some(d) = &a.datum {
        let [a1, a2, a3] = d[..] else {
            return Err(Failure::config("--datum takes a1,a2,a3"));
        };
        s.datum.a = [a1, a2, a3];
    }
    s.validate()?;
    Ok(s)
}

fn out_dir(cli: &Cli, s: &Scenario) -> PathBuf {
    // flag, then scenario, then the environment (already folded into the flag)
    match (&cli.out, &s.output.dir) {
        (Some(flag), _) if std::env::var_os("MICROFIELD_OUT_DIR").as_deref() != Some(flag.as_os_str()) => flag.clone(),
        (_, Some(d)) => d.clone(),
        (Some(env), None) => env.clone(),
        (None, None) => PathBuf::from("microfield-out"),
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

struct Outcome {
    field: PiecewiseField,
    metrics: Vec<StageMetrics>,
    target: AuditTarget,
    sup_bound: Option<f64>,
    heat: WellSet,
    notes: Vec<String>,
}

fn build(s: &Scenario) -> Result<Outcome, Failure> {
    let planar = WellSet::Linear2dK0 { m: s.inapprox.m };
    let wells3 = AuditTarget::Wells { set: WellSet::Linear3dK0, tol: 1e-9, quantile: 1.0 };
    let opts = RefineOptions {
        samples: s.budget.samples,
        seed: s.seed,
        levels: s.budget.levels,
        flatness: s.budget.flatness,
        embed3d: s.inapprox.dimension == 3,
    };
    Ok(match s.construction {
        Construction::ExplicitDisk => {
            let f = explicit_disk_solution(s.disk.radius, s.disk.sign)?;
            Outcome { field: f, metrics: Vec::new(), target: wells3, sup_bound: None, heat: WellSet::Linear3dK0, notes: Vec::new() }
        }
        Construction::GeneralDomain => {
            let f = general_domain_solution(&s.domain, &s.pack.params())?;
            let note = format!("disks = {} residual = {:.6e}", f.cells.len(), f.residual / s.domain.area());
            Outcome { field: f, metrics: Vec::new(), target: wells3, sup_bound: None, heat: WellSet::Linear3dK0, notes: vec![note] }
        }
        Construction::Pompe => {
            let p = &s.pompe;
            let a = TracelessMat2::new(p.a[0], p.a[1], p.a[2]);
            let b = TracelessMat2::new(p.b[0], p.b[1], p.b[2]);
            let out = pompe_construct(&a, &b, p.lambda, &s.domain, p.eps, &s.pack.params())?;
            let r = &out.report;
            let note = format!(
                "tiles = {} covered = {:.6} flagged = {:.6} max_segment_distance = {:.3e} sup = {:.3e}",
                r.tiles, r.covered_fraction, r.flagged_fraction, r.max_segment_distance, r.sup_deviation
            );
            let target = AuditTarget::Segment { a: a.to_matrix(), b: b.to_matrix(), eps: p.eps, slack: p.slack };
            Outcome { field: out.field, metrics: Vec::new(), target, sup_bound: None, heat: planar, notes: vec![note] }
        }
        Construction::OpenRefine => {
            let seq = build_inapprox_2d(s.inapprox.bound_m, s.inapprox.m, s.inapprox.depth)?;
            let datum = affine_datum(s.domain.clone(), s.datum.matrix(), s.datum.shift());
            let target = Target2d { seq, index: s.budget.target };
            let r = construct_open(&datum, &target, s.budget.eps, s.budget.rounds, &opts)?;
            let note = format!("status = {:?} sup_ledger = {:.6e}", r.status, r.sup_ledger);
            Outcome {
                field: r.field,
                metrics: r.metrics,
                target: AuditTarget::Datum,
                sup_bound: Some(s.budget.eps),
                heat: planar,
                notes: vec![note],
            }
        }
        Construction::Integrate => {
            let seq = build_inapprox_2d(s.inapprox.bound_m, s.inapprox.m, s.inapprox.depth)?;
            let datum = affine_datum(s.domain.clone(), s.datum.matrix(), s.datum.shift());
            let r = convex_integrate(&datum, &seq, s.budget.eps, s.budget.stages, s.budget.rounds, &opts)?;
            let set = if s.inapprox.dimension == 3 { WellSet::Linear3dK0 } else { planar };
            let p95: Vec<String> = r.stages.iter().map(|m| format!("{:.4e}", m.p95)).collect();
            let note = format!("stage p95 = [{}] sup_ledger = {:.6e}", p95.join(", "), r.sup_ledger);
            Outcome {
                field: r.field,
                metrics: r.rounds,
                target: AuditTarget::Wells { set, tol: s.budget.p95, quantile: 0.95 },
                sup_bound: Some(s.budget.eps),
                heat: set,
                notes: vec![note],
            }
        }
    })
}

fn scenario(cli: &Cli, a: &ScenarioArgs, want: Option<Construction>) -> Result<(), Failure> {
    let s = match (&a.config, want) {
        (Some(p), _) => Scenario::load(p)?,
        (None, Some(c)) => Scenario::default_for(c),
        (None, None) => return Err(Failure::config("run needs --config")),
    };
    if let Some(c) = want {
        if s.construction != c {
            return Err(Failure::config(format!(
                "scenario {:?} is a {} construction, not {}",
                s.name,
                s.construction.name(),
                c.name()
            )));
        }
    }
    let s = with_overrides(s, a)?;
    let start = Instant::now();
    let out = build(&s)?;
    let built = start.elapsed().as_secs_f64();
    let dir = out_dir(cli, &s);
    std::fs::create_dir_all(&dir).map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))?;
    let stem = dir.join(&s.name);
    let field_path = stem.with_extension("field.json");
    write(&field_path, &dump::write_field(&out.field))?;
    if !out.metrics.is_empty() {
        write(&stem.with_extension("metrics.csv"), &dump::write_metrics(&out.metrics))?;
    }
    let opts = AuditOptions {
        boundary_samples: s.audit.boundary,
        continuity_cells: s.audit.continuity_cells,
        sup_bound: out.sup_bound,
    };
    let report = audit_with(&out.field, &out.target, s.audit.samples, s.seed, &opts);
    write(&stem.with_extension("audit.txt"), &report.canonical_text())?;
    if let Some(mode) = &s.output.render {
        let m = match mode.as_str() {
            "mesh" => RenderMode::DeformedMesh { magnification: 1.0 },
            "heatmap" => RenderMode::Heatmap { set: out.heat, resolution: 200 },
            _ => RenderMode::StageDecay { metrics: out.metrics.clone() },
        };
        let svg = render(&out.field, &m).map_err(|e| Failure::config(e.to_string()))?;
        write(&stem.with_extension("svg"), &svg)?;
    }
    println!("scenario = {} ({})", s.name, s.construction.name());
    for n in &out.notes {
        println!("{n}");
    }
    println!("build_s = {built:.3} audit_s = {:.3}", report.runtime);
    print_report(&report);
    println!("artifacts = {}", dir.display());
    finish(&report)
}

fn print_report(r: &AuditReport) {
    for c in &r.checks {
        let w = c.witness.map(|w| format!(" witness={w:?}")).unwrap_or_default();
        println!("{:<20} {} margin={:.3e}{w}", c.name, if c.pass { "pass" } else { "FAIL" }, c.margin);
    }
}

fn finish(r: &AuditReport) -> Result<(), Failure> {
    if r.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = r.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        Err(Failure::audit(format!("failed checks: {}", failed.join(", "))))
    }
}

fn read_field(p: &Path) -> Result<PiecewiseField, Failure> {
    let text = std::fs::read_to_string(p).map_err(|e| Failure::config(format!("cannot read {}: {e}", p.display())))?;
    dump::read_field(&text).map_err(|e| Failure::config(format!("{}: {e}", p.display())))
}

fn coords3(v: &Option<Vec<f64>>, name: &str) -> Result<Mat2, Failure> {
    match v.as_deref() {
        Some([a1, a2, a3]) => Ok(TracelessMat2::new(*a1, *a2, *a3).to_matrix()),
        _ => Err(Failure::config(format!("--{name} a1,a2,a3 is required for a segment target"))),
    }
}

fn audit_cmd(a: &AuditArgs) -> Result<(), Failure> {
    let f = read_field(&a.field)?;
    let target = match a.target {
        TargetKind::Datum => AuditTarget::Datum,
        TargetKind::Linear2d => AuditTarget::Wells { set: WellSet::Linear2dK0 { m: a.m }, tol: a.tol, quantile: a.quantile },
        TargetKind::Linear3d => AuditTarget::Wells { set: WellSet::Linear3dK0, tol: a.tol, quantile: a.quantile },
        TargetKind::Segment => AuditTarget::Segment { a: coords3(&a.a, "a")?, b: coords3(&a.b, "b")?, eps: a.eps, slack: a.slack },
    };
    let opts = AuditOptions { boundary_samples: a.boundary, continuity_cells: a.continuity_cells, sup_bound: a.sup_bound };
    let report = audit_with(&f, &target, a.samples, a.seed, &opts);
    print!("{}", if a.canonical { report.canonical_text() } else { report.to_text() });
    finish(&report)
}

fn render_cmd(a: &RenderArgs) -> Result<(), Failure> {
    let (svg, default_out) = match a.mode {
        Mode::Decay => {
            let text = std::fs::read_to_string(&a.input)
                .map_err(|e| Failure::config(format!("cannot read {}: {e}", a.input.display())))?;
            let metrics = dump::read_metrics(&text).map_err(Failure::config)?;
            let empty = PiecewiseField::new(microfield::geometry::Domain2::unit_square(), Vec::new(), microfield::geometry::Datum::zero());
            (render(&empty, &RenderMode::StageDecay { metrics }), a.input.with_extension("decay.svg"))
        }
        Mode::Mesh => {
            let f = read_field(&a.input)?;
            (render(&f, &RenderMode::DeformedMesh { magnification: a.magnification }), a.input.with_extension("mesh.svg"))
        }
        Mode::Heatmap => {
            let f = read_field(&a.input)?;
            let set = if a.linear3d { WellSet::Linear3dK0 } else { WellSet::Linear2dK0 { m: a.m } };
            (render(&f, &RenderMode::Heatmap { set, resolution: a.resolution }), a.input.with_extension("heatmap.svg"))
        }
    };
    let svg = svg.map_err(|e| Failure::config(e.to_string()))?;
    let out = a.output.clone().unwrap_or(default_out);
    write(&out, &svg)?;
    println!("wrote {}", out.display());
    Ok(())
}
