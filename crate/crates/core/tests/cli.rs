use std::path::Path;
use std::process::Command;

use levelcraft::cli::{self, read_trace_csv, render_svg, sweep, trace_csv, RunConfig, SweepParam, TRACE_HEADER};

const DESK_SECANT: &str = r#"
[problem]
kind = "desk"

[solver]
algorithm = "apl-secant"
alpha = 1.365
beta = 1.0
nu = 0.9
eps = 1e-3
"#;

const SOCP_APMM: &str = r#"
[problem]
kind = "socp"
seed = 0
q = 20
p = 6
cones = 2

[solver]
algorithm = "apmm"
eps = 1e-3
"#;

fn levelcraft(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_levelcraft"))
        .args(args)
        .env("LEVELCRAFT_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_converged_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "desk.toml", DESK_SECANT);
    let out = dir.path().join("out");
    let o = levelcraft(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let text = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), TRACE_HEADER.join(","));
    let records = read_trace_csv(&text).unwrap();
    assert!(records.last().unwrap().upper <= 1e-3);
    for w in records.windows(2) {
        assert!(w[1].gevals >= w[0].gevals && w[1].fevals >= w[0].fevals);
        assert!(w[1].qp_solves >= w[0].qp_solves && w[1].lp_solves >= w[0].lp_solves);
    }

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["iterations"].as_u64().unwrap() as usize + 1, records.len());

    // the plot is a function of the trace alone
    let svg = std::fs::read_to_string(out.join("trace.svg")).unwrap();
    assert_eq!(svg, render_svg(&records, "apl-secant on desk-qcqp"));

    let leftovers: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| !["trace.csv", "summary.json", "trace.svg"].contains(&n.as_str()))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "desk.toml", DESK_SECANT);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = levelcraft(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "4"]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(
        std::fs::read(a.join("trace.csv")).unwrap(),
        std::fs::read(b.join("trace.csv")).unwrap()
    );
}

#[test]
fn invalid_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &DESK_SECANT.replace("beta = 1.0", "beta = 0.3"));
    let out = dir.path().join("out");
    let o = levelcraft(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("(1/2, 1]"));
    assert!(!out.exists());

    let o = levelcraft(&["run", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn iteration_cap_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{DESK_SECANT}max_outer = 1\neps = 1e-9\n").replace("eps = 1e-3\n", "");
    let cfg = write_config(dir.path(), "cap.toml", &text);
    let out = dir.path().join("out");
    let o = levelcraft(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("trace.csv").exists());
}

#[test]
fn trace_csv_round_trips() {
    let cfg = RunConfig::from_toml_str(DESK_SECANT).unwrap();
    let sol = cli::execute(&cfg).unwrap();
    let text = trace_csv(&sol.report.records).unwrap();
    let back = read_trace_csv(&text).unwrap();
    assert_eq!(back, sol.report.records);
    assert_eq!(trace_csv(&back).unwrap(), text);
    assert_eq!(sol.report.records.len(), sol.report.iterations + 1);
}

#[test]
fn sweep_rows() {
    let base = RunConfig::from_toml_str(
        &DESK_SECANT
            .replace("apl-secant", "apl-fixed-point")
            .replace("beta = 1.0", "beta = 0.9"),
    )
    .unwrap();
    let single = sweep(&base, SweepParam::Beta, &[0.9]);
    let run = cli::execute(&base).unwrap();
    assert_eq!(single[0].gevals, Some(run.report.total_gevals()));
    assert_eq!(single[0].iterations, Some(run.report.iterations));
    assert_eq!(single[0].status, "converged");

    let betas = [0.6, 0.7, 0.8, 0.9, 1.0];
    let rows = sweep(&base, SweepParam::Beta, &betas);
    assert_eq!(rows.len(), betas.len());
    assert!(rows.iter().all(|r| r.status == "converged" && r.gevals.is_some()));

    // a bad value is recorded and the sweep goes on
    let rows = sweep(&base, SweepParam::Alpha, &[0.5, 1.36]);
    assert_eq!(rows[0].status, "error");
    assert_eq!(rows[1].status, "converged");

    let socp = RunConfig::from_toml_str(SOCP_APMM).unwrap();
    let rows = sweep(&socp, SweepParam::Bundle, &[1.0, 5.0]);
    assert!(rows.iter().all(|r| r.status == "converged"), "{rows:?}");
}

#[test]
fn sweep_and_probe_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "desk.toml", DESK_SECANT);
    let out = dir.path().join("s");
    let o = levelcraft(&[
        "sweep",
        "--config",
        &cfg,
        "--param",
        "nu",
        "--values",
        "0.8,0.9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("nu,gevals,iterations,status,error"));

    let o = levelcraft(&[
        "probe-v",
        "--config",
        &cfg,
        "--etas",
        "-2,0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("probe.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(rows[0][1] <= 2.0 + 1e-9 && 2.0 <= rows[0][2] + 1e-12);
    assert!(rows[1][1] <= 1e-9 && -1e-9 <= rows[1][2]);
}
