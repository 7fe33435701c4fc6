//! Run telemetry shared by every solver: per-iteration records, subproblem
//! counts and the gap history of APL-based methods.

use serde::{Deserialize, Serialize};

use crate::oracle::ConstrainedProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Converged,
    NotConverged,
}

/// One row of a convergence trace.
///
/// For APMM-type runs `eta` is the supplied optimal value, `lower` is empty
/// and `upper` is the best composite value. For level-set runs `(lower,
/// upper)` bracket `V(eta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub eta: f64,
    pub lower: Option<f64>,
    pub upper: f64,
    /// `f(x) - f*` when `f*` is known.
    pub obj_gap: Option<f64>,
    pub violation: f64,
    pub fevals: u64,
    pub gevals: u64,
    pub qp_solves: u64,
    pub lp_solves: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapExit {
    LowerBoundRaised,
    UpperBoundDropped,
}

/// One gap-reduction call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub eta: f64,
    pub theta: f64,
    pub input_gap: f64,
    pub output_gap: f64,
    pub iterations: usize,
    pub exit: GapExit,
}

/// Gaps `u_s - l_s` at the start of each APL stage, plus the final one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AplRecord {
    pub eta: f64,
    pub theta: f64,
    pub deltas: Vec<f64>,
}

/// Outer iterate of a level-set method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelIterate {
    pub t: usize,
    pub eta: f64,
    pub l: f64,
    pub u: f64,
    pub ltilde_used: f64,
    pub x: Vec<f64>,
}

/// Subproblem counters and gap history accumulated during a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub qp_solves: u64,
    pub lp_solves: u64,
    pub gap_reductions: Vec<GapRecord>,
    pub apl_runs: Vec<AplRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub algorithm: String,
    pub problem: String,
    pub status: ExitStatus,
    pub iterations: usize,
    pub records: Vec<IterRecord>,
    pub telemetry: Telemetry,
    pub level_iterates: Vec<LevelIterate>,
    /// First-order calls to the level composite, i.e. points at which every
    /// oracle was queried.
    pub composite_evals: u64,
    pub wall_time_secs: f64,
    pub message: Option<String>,
}

impl SolverReport {
    pub fn new(algorithm: &str, problem: &str) -> Self {
        SolverReport {
            algorithm: algorithm.to_string(),
            problem: problem.to_string(),
            status: ExitStatus::NotConverged,
            iterations: 0,
            records: Vec::new(),
            telemetry: Telemetry::default(),
            level_iterates: Vec::new(),
            composite_evals: 0,
            wall_time_secs: 0.0,
            message: None,
        }
    }

    pub fn converged(&self) -> bool {
        self.status == ExitStatus::Converged
    }

    /// Gradient evaluations summed over all oracles, as of the last record.
    pub fn total_gevals(&self) -> u64 {
        self.records.last().map_or(0, |r| r.gevals)
    }

    pub fn total_fevals(&self) -> u64 {
        self.records.last().map_or(0, |r| r.fevals)
    }

    /// Appends a record stamped with the problem's current counters.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn record(
        &mut self,
        p: &ConstrainedProblem,
        iter: usize,
        eta: f64,
        lower: Option<f64>,
        upper: f64,
        objective: f64,
        violation: f64,
    ) {
        let c = p.counts();
        self.records.push(IterRecord {
            iter,
            eta,
            lower,
            upper,
            obj_gap: p.known_fstar.map(|f| objective - f),
            violation,
            fevals: c.fevals,
            gevals: c.gevals,
            qp_solves: self.telemetry.qp_solves,
            lp_solves: self.telemetry.lp_solves,
        });
    }
}

/// Final iterate plus the run report. A run that hits its iteration cap still
/// returns its best point, with `report.status == NotConverged`.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub report: SolverReport,
}
