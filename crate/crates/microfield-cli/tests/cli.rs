use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_microfield"));
    c.env_remove("MICROFIELD_OUT_DIR");
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("microfield-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("{key} missing in\n{text}"));
    line.split('=').nth(1).unwrap().trim().parse().unwrap()
}

#[test]
fn split3d_reports_both_amplitudes() {
    let o = run(&["laminate", "--split3d", "--matrix=-0.45,0,0,0,-0.45,0,0,0,0.9", "--alpha", "0.475", "--m-next", "1"]);
    assert!(o.status.success(), "{o:?}");
    let s = stdout(&o);
    assert!((value(&s, "delta") - (0.025f64 * 1.375).sqrt()).abs() < 1e-12);
    assert!((value(&s, "epsilon+") - (1.4f64 * 0.025).sqrt()).abs() < 1e-12);
    assert!((value(&s, "delta") - 0.185405).abs() < 1e-6);
    assert!((value(&s, "epsilon-") - 0.187083).abs() < 1e-6);
}

#[test]
fn planar_split_recombines() {
    let o = run(&["laminate", "--matrix=0.3,0.1,0.2"]);
    assert!(o.status.success(), "{o:?}");
    let s = stdout(&o);
    let lam = value(&s, "lambda");
    let coords = |k: &str| -> Vec<f64> {
        let l = s.lines().find(|l| l.starts_with(k)).unwrap();
        l.split('=').nth(1).unwrap().split(',').map(|x| x.trim().parse().unwrap()).collect()
    };
    let (a, b) = (coords("a ="), coords("b ="));
    for (k, want) in [0.3, 0.1, 0.2].iter().enumerate() {
        assert!(((1.0 - lam) * a[k] + lam * b[k] - want).abs() < 1e-12);
    }
}

#[test]
fn energy_of_a_well_is_zero() {
    let o = run(&["energy", "--density", "v", "--matrix=-0.5,0,0,0,-0.5,0,0,0,1"]);
    assert!(o.status.success());
    assert_eq!(value(&stdout(&o), "energy"), 0.0);
}

#[test]
fn energy_needs_a_director_for_vnc() {
    let o = run(&["energy", "--density", "vnc", "--matrix=0,0,0,0,0,0,0,0,0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = scratch("config");
    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "schema = \"microfield/9\"\nname = \"x\"\nconstruction = \"pompe\"\n").unwrap();
    assert_eq!(run(&["run", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["run"]).status.code(), Some(2));
    // a pompe scenario handed to the integrate subcommand
    let p = scenario("pompe-small.toml");
    assert_eq!(run(&["integrate", "--config", p.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["integrate", "--datum=0.1,0.2"]).status.code(), Some(2));
}

#[test]
fn violated_datum_bound_exits_3() {
    let dir = scratch("bad-datum");
    let o = run(&["run", "--config", scenario("bad-datum.toml").to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("3/(2 sqrt 2)"));
}

#[test]
fn failed_audit_exits_4() {
    let dir = scratch("audit-fail");
    let o = run(&["explicit-disk", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success());
    let field = dir.join("explicit-disk.field.json");
    // the disk field is nowhere near the planar wells at this tolerance
    let o = run(&["audit", field.to_str().unwrap(), "--target", "segment", "--a=0,0.25,0.25", "--b=0,-0.25,-0.25", "--eps", "1e-3"]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["inapprox", "--family", "lin2d", "--bound-m", "0.5", "--m", "2", "--depth", "3", "--samples", "200"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn dump_round_trip_audits_identically() {
    let dir = scratch("round-trip");
    let o = run(&["run", "--config", scenario("pompe-small.toml").to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let written = std::fs::read_to_string(dir.join("pompe-small.audit.txt")).unwrap();
    let field = dir.join("pompe-small.field.json");
    let o = run(&[
        "audit",
        field.to_str().unwrap(),
        "--target",
        "segment",
        "--a=0,0.25,0.25",
        "--b=0,-0.25,-0.25",
        "--eps",
        "0.4",
        "--slack",
        "0.01",
        "--samples",
        "2000",
        "--seed",
        "3",
        "--continuity-cells",
        "300",
        "--canonical",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), written);
    assert!(dir.join("pompe-small.svg").exists());
}

#[test]
fn lazy_field_round_trip_audits_identically() {
    let dir = scratch("round-trip-lazy");
    let o = run(&["open-refine", "--out", dir.to_str().unwrap(), "--samples", "4000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let written = std::fs::read_to_string(dir.join("open-refine.audit.txt")).unwrap();
    let field = dir.join("open-refine.field.json");
    let o = run(&["audit", field.to_str().unwrap(), "--seed", "7", "--sup-bound", "0.05", "--canonical"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), written);
}

#[test]
fn runs_are_byte_identical() {
    let (d1, d2) = (scratch("det-1"), scratch("det-2"));
    for (d, threads) in [(&d1, "1"), (&d2, "2")] {
        let o = run(&["--threads", threads, "integrate", "--out", d.to_str().unwrap(), "--samples", "4000", "--rounds", "24"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["integrate.field.json", "integrate.metrics.csv", "integrate.audit.txt"] {
        let (a, b) = (std::fs::read(d1.join(f)).unwrap(), std::fs::read(d2.join(f)).unwrap());
        assert!(a == b, "{f} differs between runs");
    }
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = scratch("env");
    let o = bin().env("MICROFIELD_OUT_DIR", &dir).args(["explicit-disk"]).output().unwrap();
    assert!(o.status.success());
    assert!(dir.join("explicit-disk.field.json").exists());
}

#[test]
fn rendering_an_empty_field_gives_an_outline() {
    let dir = scratch("render");
    let dump = dir.join("empty.field.json");
    std::fs::write(
        &dump,
        concat!(
            "{\"schema\":\"microfield-field/1\",",
            "\"domain\":{\"type\":\"polygon\",\"vertices\":[[0,0],[1,0],[1,1],[0,1]]},",
            "\"datum\":{\"type\":\"affine\",\"gradient\":[0,0,0],\"matrix\":[0,0,0,0],\"translation\":[0,0]},",
            "\"residual\":1.0,\"embed3d\":false,\"cells\":[]}"
        ),
    )
    .unwrap();
    for mode in ["mesh", "heatmap"] {
        let out = dir.join(format!("{mode}.svg"));
        let o = run(&["render", dump.to_str().unwrap(), "--mode", mode, "-o", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let svg = std::fs::read_to_string(&out).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("stroke-dasharray"));
    }
    let o = run(&["render", dump.to_str().unwrap(), "--mode", "heatmap", "--linear3d", "-o", "/dev/null"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn decay_chart_from_metrics() {
    let dir = scratch("decay");
    let o = run(&["integrate", "--out", dir.to_str().unwrap(), "--samples", "2000"]);
    assert!(o.status.success());
    let csv = dir.join("integrate.metrics.csv");
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("# microfield-metrics/1\n"));
    let o = run(&["render", csv.to_str().unwrap(), "--mode", "decay"]);
    assert!(o.status.success());
    assert!(dir.join("integrate.metrics.decay.svg").exists());
}
