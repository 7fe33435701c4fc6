//! Config-driven experiment runner behind the `levelcraft` binary.
//!
//! A run reads a TOML file with `[problem]`, `[solver]` and `[output]`
//! tables, solves, and writes `trace.csv`, `summary.json` and `trace.svg`
//! into the output directory. Every file is written to a temporary sibling
//! first and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::apl::GapConfig;
use crate::apmm::{apmm_solve, rapmm_solve, AccelSchedule, ApmmConfig, LocalizerPolicy};
use crate::error::{Error, Result};
use crate::levelset::{fixed_point_solve, probe_value_function, secant_solve, LevelConfig, LevelMethod, ProbePoint};
use crate::oracle::ConstrainedProblem;
use crate::problems::{self, NpcHyper, NpcMode};
use crate::report::{ExitStatus, IterRecord, Solution, SolverReport, Telemetry};

/// Column order of the trace CSV.
pub const TRACE_HEADER: [&str; 10] = [
    "iter",
    "eta",
    "lower",
    "upper",
    "obj_gap",
    "violation",
    "fevals",
    "gevals",
    "qp_solves",
    "lp_solves",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Desk,
    Socp,
    Lmi,
    Qcqp,
    Npc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    #[serde(default)]
    pub seed: u64,
    /// Desk: divides the constraint, scaling the optimal multiplier.
    pub scale: Option<f64>,
    /// SOCP cone variables or LMI matrix order.
    pub q: Option<usize>,
    /// SOCP equality rows.
    pub p: Option<usize>,
    pub cones: Option<usize>,
    /// LMI constraint count.
    pub k: Option<usize>,
    /// QCQP dimension and constraint count.
    pub n: Option<usize>,
    pub m: Option<usize>,
    /// NPC data file; synthetic blobs are generated when absent.
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub has_header: bool,
    pub mode: Option<NpcMode>,
    pub hyper: Option<NpcHyper>,
    pub per_class: Option<usize>,
    pub features: Option<usize>,
    pub classes: Option<usize>,
    pub separation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "apmm")]
    Apmm,
    #[serde(rename = "rapmm")]
    Rapmm,
    #[serde(rename = "pmm")]
    Pmm,
    #[serde(rename = "apl-fixed-point")]
    AplFixedPoint,
    #[serde(rename = "apl-secant")]
    AplSecant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    DomainOnly,
    FullHistory,
    LimitedMemory,
    Averaging,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    /// Restart factor for rAPMM.
    pub theta: f64,
    pub eps: f64,
    /// `k0` for APMM's limited-memory localizer, level cuts kept by APL.
    pub bundle: usize,
    pub policy: PolicyName,
    /// Overrides the schedule implied by `algorithm`.
    pub schedule: Option<AccelSchedule>,
    pub max_iters: usize,
    pub max_outer: Option<usize>,
    /// Optimal value for APMM-type runs when the problem does not carry one.
    pub fstar: Option<f64>,
    pub x0: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            algorithm: Algorithm::AplFixedPoint,
            alpha: 1.36,
            beta: 0.9,
            nu: 0.9,
            theta: 0.5,
            eps: 1e-3,
            bundle: 5,
            policy: PolicyName::LimitedMemory,
            schedule: None,
            max_iters: 10_000,
            max_outer: None,
            fstar: None,
            x0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub plot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("levelcraft-out"),
            plot: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Parameter checks that must pass before any problem is built.
    pub fn validate(&self) -> Result<()> {
        match self.solver.algorithm {
            Algorithm::AplFixedPoint | Algorithm::AplSecant => {
                self.level_config()?;
            }
            Algorithm::Apmm | Algorithm::Pmm | Algorithm::Rapmm => {
                self.apmm_config().validate()?;
                if self.solver.algorithm == Algorithm::Rapmm && !(self.solver.theta > 0.0 && self.solver.theta < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "rapmm theta = {} must lie in (0, 1)",
                        self.solver.theta
                    )));
                }
            }
        }
        if self.solver.bundle == 0 {
            return Err(Error::InvalidParameter("bundle size must be positive".into()));
        }
        Ok(())
    }

    pub fn level_config(&self) -> Result<LevelConfig> {
        let s = &self.solver;
        let method = match s.algorithm {
            Algorithm::AplSecant => LevelMethod::Secant,
            _ => LevelMethod::FixedPoint,
        };
        let mut cfg = LevelConfig::new(method, s.alpha, s.beta, s.nu, s.eps)?;
        cfg.gap = GapConfig {
            bundle: s.bundle,
            ..GapConfig::default()
        };
        cfg.max_outer = s.max_outer;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apmm_config(&self) -> ApmmConfig {
        let s = &self.solver;
        let schedule = s.schedule.unwrap_or(match s.algorithm {
            Algorithm::Pmm => AccelSchedule::Constant,
            _ => AccelSchedule::Nesterov,
        });
        let policy = match s.policy {
            PolicyName::DomainOnly => LocalizerPolicy::DomainOnly,
            PolicyName::FullHistory => LocalizerPolicy::FullHistory,
            PolicyName::LimitedMemory => LocalizerPolicy::LimitedMemory(s.bundle),
            PolicyName::Averaging => LocalizerPolicy::Averaging,
        };
        ApmmConfig {
            schedule,
            policy,
            eps: s.eps,
            max_iters: s.max_iters,
        }
    }
}

fn need<T: Copy>(v: Option<T>, name: &str, kind: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("problem kind {kind} needs `{name}`")))
}

pub fn build_problem(c: &ProblemConfig) -> Result<ConstrainedProblem> {
    match c.kind {
        ProblemKind::Desk => Ok(problems::desk_scaled(c.scale.unwrap_or(1.0))),
        ProblemKind::Socp => {
            let q = need(c.q, "q", "socp")?;
            problems::gen_socp_kkt(c.seed, q, need(c.p, "p", "socp")?, c.cones.unwrap_or(2))
        }
        ProblemKind::Lmi => problems::gen_lmi(c.seed, need(c.q, "q", "lmi")?, need(c.k, "k", "lmi")?),
        ProblemKind::Qcqp => problems::gen_qcqp(c.seed, need(c.n, "n", "qcqp")?, c.m.unwrap_or(0)),
        ProblemKind::Npc => {
            let mode = c.mode.unwrap_or(NpcMode::Binary);
            let hyper = c.hyper.clone().unwrap_or_default();
            let data = match &c.csv {
                Some(path) => problems::read_npc_csv(path, c.has_header)?,
                None => problems::blobs(
                    c.seed,
                    c.per_class.unwrap_or(50),
                    c.features.unwrap_or(4),
                    c.classes.unwrap_or(2),
                    c.separation.unwrap_or(3.0),
                    mode,
                ),
            };
            problems::npc_problem(&data, mode, &hyper)
        }
    }
}

/// Builds the problem and runs the configured solver.
pub fn execute(cfg: &RunConfig) -> Result<Solution> {
    cfg.validate()?;
    let p = build_problem(&cfg.problem)?;
    solve(&p, cfg)
}

pub fn solve(p: &ConstrainedProblem, cfg: &RunConfig) -> Result<Solution> {
    let s = &cfg.solver;
    match s.algorithm {
        Algorithm::AplFixedPoint => fixed_point_solve(p, &cfg.level_config()?),
        Algorithm::AplSecant => secant_solve(p, &cfg.level_config()?),
        Algorithm::Apmm | Algorithm::Pmm | Algorithm::Rapmm => {
            let fstar = s
                .fstar
                .or(p.known_fstar)
                .ok_or_else(|| Error::Config(format!("{} needs an optimal value; set solver.fstar", p.name)))?;
            let x0 = s.x0.clone().unwrap_or_else(|| vec![0.0; p.dim()]);
            if x0.len() != p.dim() {
                return Err(Error::DimensionMismatch {
                    expected: p.dim(),
                    got: x0.len(),
                });
            }
            let acfg = cfg.apmm_config();
            if s.algorithm == Algorithm::Rapmm {
                rapmm_solve(p, &x0, fstar, s.theta, &acfg)
            } else {
                apmm_solve(p, &x0, fstar, &acfg)
            }
        }
    }
}

fn fmt_f64(v: f64) -> String {
    // Shortest round-trip representation.
    format!("{v:?}")
}

/// Trace rows as CSV text with the fixed [`TRACE_HEADER`].
pub fn trace_csv(records: &[IterRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.iter.to_string(),
            fmt_f64(r.eta),
            r.lower.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.upper),
            r.obj_gap.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.violation),
            r.fevals.to_string(),
            r.gevals.to_string(),
            r.qp_solves.to_string(),
            r.lp_solves.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

/// Parses a trace written by [`trace_csv`].
pub fn read_trace_csv(text: &str) -> Result<Vec<IterRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::Ingest {
            row: 1,
            message: format!("unexpected trace header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Ingest {
            row,
            message: e.to_string(),
        })?;
        let bad = |field: &str| Error::Ingest {
            row,
            message: format!("bad value in column {field}"),
        };
        let f = |j: usize| -> Result<f64> { rec[j].parse().map_err(|_| bad(TRACE_HEADER[j])) };
        let opt = |j: usize| -> Result<Option<f64>> {
            if rec[j].is_empty() {
                Ok(None)
            } else {
                f(j).map(Some)
            }
        };
        let u = |j: usize| -> Result<u64> { rec[j].parse().map_err(|_| bad(TRACE_HEADER[j])) };
        out.push(IterRecord {
            iter: u(0)? as usize,
            eta: f(1)?,
            lower: opt(2)?,
            upper: f(3)?,
            obj_gap: opt(4)?,
            violation: f(5)?,
            fevals: u(6)?,
            gevals: u(7)?,
            qp_solves: u(8)?,
            lp_solves: u(9)?,
        });
    }
    Ok(out)
}

/// Log-scale line chart of `upper` against cumulative gradient evaluations.
pub fn render_svg(records: &[IterRecord], title: &str) -> String {
    let (w, h, m) = (640.0, 400.0, 60.0);
    let pts: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.gevals as f64, r.upper.abs().max(1e-16).log10()))
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        w / 2.0,
        xml_escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {m} V{} H{}" fill="none" stroke="black"/>"#,
        h - m,
        w - m
    );
    if !pts.is_empty() {
        let x_max = pts.iter().map(|p| p.0).fold(1.0, f64::max);
        let y_lo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor();
        let y_hi = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil();
        let y_hi = if y_hi <= y_lo { y_lo + 1.0 } else { y_hi };
        let sx = |x: f64| m + x / x_max * (w - 2.0 * m);
        let sy = |y: f64| h - m - (y - y_lo) / (y_hi - y_lo) * (h - 2.0 * m);
        let mut e = y_lo as i64;
        while e as f64 <= y_hi {
            let y = sy(e as f64);
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">1e{e}</text>"#,
                m - 6.0,
                y + 4.0
            );
            e += 1;
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
            w - m,
            h - m + 18.0,
            x_max
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">gradient evaluations</text>"#,
            w / 2.0,
            h - 16.0
        );
        let line: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
            line.join(" ")
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `bytes` to a temporary file next to `path` and renames it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let res = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path));
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(res?)
}

/// Compact run summary written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: String,
    pub problem: String,
    pub status: ExitStatus,
    pub iterations: usize,
    pub records: usize,
    pub fevals: u64,
    pub gevals: u64,
    pub composite_evals: u64,
    pub final_upper: Option<f64>,
    pub final_lower: Option<f64>,
    pub final_obj_gap: Option<f64>,
    pub final_violation: Option<f64>,
    pub telemetry: TelemetrySummary,
    pub wall_time_secs: f64,
    pub message: Option<String>,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySummary {
    pub qp_solves: u64,
    pub lp_solves: u64,
    pub gap_reductions: usize,
    pub apl_runs: usize,
}

impl From<&Telemetry> for TelemetrySummary {
    fn from(t: &Telemetry) -> Self {
        TelemetrySummary {
            qp_solves: t.qp_solves,
            lp_solves: t.lp_solves,
            gap_reductions: t.gap_reductions.len(),
            apl_runs: t.apl_runs.len(),
        }
    }
}

impl Summary {
    pub fn new(sol: &Solution) -> Self {
        let r: &SolverReport = &sol.report;
        let last = r.records.last();
        Summary {
            algorithm: r.algorithm.clone(),
            problem: r.problem.clone(),
            status: r.status,
            iterations: r.iterations,
            records: r.records.len(),
            fevals: r.total_fevals(),
            gevals: r.total_gevals(),
            composite_evals: r.composite_evals,
            final_upper: last.map(|l| l.upper),
            final_lower: last.and_then(|l| l.lower),
            final_obj_gap: last.and_then(|l| l.obj_gap),
            final_violation: last.map(|l| l.violation),
            telemetry: (&r.telemetry).into(),
            wall_time_secs: r.wall_time_secs,
            message: r.message.clone(),
            x: sol.x.clone(),
        }
    }
}

/// Writes trace, summary and (optionally) plot into `dir`.
pub fn persist(sol: &Solution, dir: &Path, plot: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    let trace = trace_csv(&sol.report.records)?;
    let summary = serde_json::to_string_pretty(&Summary::new(sol)).map_err(|e| Error::Config(e.to_string()))?;
    write_atomic(&dir.join("trace.csv"), trace.as_bytes())?;
    write_atomic(&dir.join("summary.json"), summary.as_bytes())?;
    if plot {
        let title = format!("{} on {}", sol.report.algorithm, sol.report.problem);
        write_atomic(
            &dir.join("trace.svg"),
            render_svg(&sol.report.records, &title).as_bytes(),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Beta,
    Alpha,
    Nu,
    Bundle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub gevals: Option<u64>,
    pub iterations: Option<usize>,
    pub status: String,
    pub error: Option<String>,
}

/// One run per value of `param`; failures are recorded and the sweep goes on.
pub fn sweep(base: &RunConfig, param: SweepParam, values: &[f64]) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&value| {
            let mut cfg = base.clone();
            match param {
                SweepParam::Beta => cfg.solver.beta = value,
                SweepParam::Alpha => cfg.solver.alpha = value,
                SweepParam::Nu => cfg.solver.nu = value,
                SweepParam::Bundle => cfg.solver.bundle = value as usize,
            }
            match execute(&cfg) {
                Ok(sol) => SweepRow {
                    value,
                    gevals: Some(sol.report.total_gevals()),
                    iterations: Some(sol.report.iterations),
                    status: match sol.report.status {
                        ExitStatus::Converged => "converged".into(),
                        ExitStatus::NotConverged => "not_converged".into(),
                    },
                    error: None,
                },
                Err(e) => SweepRow {
                    value,
                    gevals: None,
                    iterations: None,
                    status: "error".into(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

pub fn sweep_csv(param: SweepParam, rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let name = format!("{param:?}").to_lowercase();
    w.write_record([name.as_str(), "gevals", "iterations", "status", "error"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            fmt_f64(r.value),
            r.gevals.map(|v| v.to_string()).unwrap_or_default(),
            r.iterations.map(|v| v.to_string()).unwrap_or_default(),
            r.status.clone(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Brackets `V(eta)` on the given grid for the configured problem.
pub fn probe(cfg: &RunConfig, etas: &[f64]) -> Result<Vec<ProbePoint>> {
    let p = build_problem(&cfg.problem)?;
    let gap = GapConfig {
        bundle: cfg.solver.bundle,
        ..GapConfig::default()
    };
    let mut tel = Telemetry::default();
    probe_value_function(&p, etas, cfg.solver.alpha, cfg.solver.eps, &gap, &mut tel)
}

pub fn probe_csv(points: &[ProbePoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["eta", "lower", "upper"]).map_err(csv_err)?;
    for p in points {
        w.write_record([fmt_f64(p.eta), fmt_f64(p.lower), fmt_f64(p.upper)])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Parser)]
#[command(
    name = "levelcraft",
    version,
    about = "Bundle-level solvers for constrained convex problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one configured problem and write its trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Repeat a run over values of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bracket the value function on a grid of levels.
    ProbeV {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        etas: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

/// Runs a parsed command and returns the process exit code.
pub fn dispatch(cli: Cli) -> i32 {
    match try_dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn try_dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.problem.seed = s;
            }
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let sol = execute(&cfg)?;
            persist(&sol, &dir, cfg.output.plot)?;
            let summary = Summary::new(&sol);
            println!(
                "{} on {}: {:?} after {} iterations, {} gradient evaluations",
                summary.algorithm, summary.problem, summary.status, summary.iterations, summary.gevals
            );
            if let Some(m) = &summary.message {
                println!("{m}");
            }
            Ok(match sol.report.status {
                ExitStatus::Converged => EXIT_OK,
                ExitStatus::NotConverged => EXIT_NOT_CONVERGED,
            })
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let rows = sweep(&cfg, param, &values);
            let text = sweep_csv(param, &rows)?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            write_atomic(&dir.join("sweep.csv"), text.as_bytes())?;
            print!("{text}");
            Ok(EXIT_OK)
        }
        Command::ProbeV { config, etas, out } => {
            let cfg = RunConfig::load(&config)?;
            let points = probe(&cfg, &etas)?;
            let text = probe_csv(&points)?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            write_atomic(&dir.join("probe.csv"), text.as_bytes())?;
            print!("{text}");
            Ok(EXIT_OK)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::from_toml_str("[problem]\nkind = \"desk\"\n").unwrap();
        assert_eq!(cfg.solver.alpha, 1.36);
        assert_eq!(cfg.solver.nu, 0.9);
        assert_eq!(cfg.solver.bundle, 5);
    }

    #[test]
    fn bad_secant_beta_rejected() {
        let text = "[problem]\nkind = \"desk\"\n[solver]\nalgorithm = \"apl-secant\"\nbeta = 0.3\n";
        let err = RunConfig::from_toml_str(text).unwrap_err();
        assert!(err.to_string().contains("(1/2, 1]"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml_str("[problem]\nkind = \"desk\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn svg_is_closed() {
        let svg = render_svg(&[], "empty");
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }
}
