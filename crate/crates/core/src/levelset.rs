//! Level-set root finding on `V(eta)`: the initialization phase, the
//! inexact fixed-point and truncated secant updates driven by APL, and value
//! function probing.

use serde::{Deserialize, Serialize};

use crate::apl::{apl_from, gap_reduction_from, GapConfig};
use crate::error::{Error, Result};
use crate::geomsub::{solve_epigraph_lp, LpProblem, LpStatus};
use crate::oracle::ConstrainedProblem;
use crate::report::{ExitStatus, LevelIterate, Solution, SolverReport, Telemetry};

/// Lower bounds below this are treated as an exit trigger.
pub const LOWER_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelMethod {
    FixedPoint,
    Secant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelConfig {
    pub method: LevelMethod,
    /// Relative accuracy asked of each APL call.
    pub alpha: f64,
    pub beta: f64,
    /// Gap-reduction contraction; APL runs with `theta = 2 nu - 1`.
    pub nu: f64,
    pub eps: f64,
    pub gap: GapConfig,
    /// Outer iteration cap; `None` derives one from the initial bracket.
    pub max_outer: Option<usize>,
}

impl LevelConfig {
    pub fn new(method: LevelMethod, alpha: f64, beta: f64, nu: f64, eps: f64) -> Result<Self> {
        let cfg = LevelConfig {
            method,
            alpha,
            beta,
            nu,
            eps,
            gap: GapConfig::default(),
            max_outer: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn fixed_point(alpha: f64, beta: f64, nu: f64, eps: f64) -> Result<Self> {
        LevelConfig::new(LevelMethod::FixedPoint, alpha, beta, nu, eps)
    }

    pub fn secant(alpha: f64, beta: f64, nu: f64, eps: f64) -> Result<Self> {
        LevelConfig::new(LevelMethod::Secant, alpha, beta, nu, eps)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0) {
            return Err(Error::InvalidParameter(format!("alpha = {} must exceed 1", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta = {} must lie in (0, 1]",
                self.beta
            )));
        }
        if !(self.nu > 0.5 && self.nu < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "nu = {} must lie in (1/2, 1)",
                self.nu
            )));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter("eps must be positive".into()));
        }
        if self.gap.bundle == 0 {
            return Err(Error::InvalidParameter("bundle size must be positive".into()));
        }
        if self.method == LevelMethod::Secant {
            if self.beta <= 0.5 {
                return Err(Error::InvalidParameter(format!(
                    "secant needs beta in (1/2, 1], got {}",
                    self.beta
                )));
            }
            let cap = 2.0 * self.beta.sqrt();
            if self.alpha >= cap {
                return Err(Error::InvalidParameter(format!(
                    "secant needs alpha in (1, 2 sqrt(beta)) = (1, {cap:.4}), got {}",
                    self.alpha
                )));
            }
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        2.0 * self.nu - 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitFlag {
    NearOptimal,
    RootFindingRequired,
}

#[derive(Debug, Clone)]
pub struct InitResult {
    pub x: Vec<f64>,
    pub eta0: f64,
    /// Positive lower bound on `V(eta0)` when root finding is required.
    pub l0: f64,
    /// `v(x, eta0)`
    pub u0: f64,
    pub flag: InitFlag,
}

/// Minimizes `f` over the box to absolute accuracy `eps` with repeated gap
/// reductions, starting from the origin projected onto the box.
fn minimize_objective(
    p: &ConstrainedProblem,
    eps: f64,
    gap: &GapConfig,
    telemetry: &mut Telemetry,
) -> Result<Vec<f64>> {
    let q = p.objective_only();
    let mut x = q.domain.clamp(&vec![0.0; q.dim()]);
    let ev = q.evaluate(&x)?;
    let mut u = ev.objective();
    let lp = solve_epigraph_lp(&LpProblem {
        pieces: ev.minorants(0.0),
        cuts: Vec::new(),
        domain: q.domain.clone(),
    })?;
    telemetry.lp_solves += 1;
    let mut l = lp.value;
    let mut rounds = 0;
    while u - l > eps {
        let g = gap_reduction_from(&q, &x, u, l, 0.0, 0.5, gap, telemetry)?;
        x = g.p;
        u = g.v_upper;
        l = g.v_lower;
        rounds += 1;
        if g.capped || rounds > 500 {
            log::warn!("objective minimization stopped with gap {:.3e}", u - l);
            break;
        }
    }
    Ok(x)
}

/// Initialization phase: either an `eps`-optimal point or `(x, eta0, l0)`
/// with `eta0 < f*` and `l0 > 0`.
pub fn initialize(
    p: &ConstrainedProblem,
    alpha: f64,
    eps: f64,
    gap: &GapConfig,
    telemetry: &mut Telemetry,
) -> Result<InitResult> {
    if !(alpha > 1.0 && eps > 0.0) {
        return Err(Error::InvalidParameter("need alpha > 1 and eps > 0".into()));
    }
    p.domain.require_bounded("the initialization phase")?;
    let x0 = minimize_objective(p, eps, gap, telemetry)?;
    let ev = p.evaluate(&x0)?;
    let eta0 = ev.objective();
    let max_g = ev.constraints().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (u_x0, _) = ev.composite_value(eta0);
    if p.num_constraints() == 0 || max_g <= eps {
        return Ok(InitResult {
            x: x0,
            eta0,
            l0: f64::NEG_INFINITY,
            u0: u_x0,
            flag: InitFlag::NearOptimal,
        });
    }

    let lp = solve_epigraph_lp(&LpProblem {
        pieces: ev.minorants(eta0),
        cuts: Vec::new(),
        domain: p.domain.clone(),
    })?;
    telemetry.lp_solves += 1;
    let l0 = lp.value;
    let apl = apl_from(p, &x0, u_x0, l0, eta0, 0.5, alpha, eps, gap, telemetry)?;
    let flag = if apl.ubar <= eps {
        InitFlag::NearOptimal
    } else {
        InitFlag::RootFindingRequired
    };
    Ok(InitResult {
        x: apl.x,
        eta0,
        l0: apl.lbar,
        u0: apl.ubar,
        flag,
    })
}

/// `eta_t = eta_{t-1} + beta * l_{t-1}`
pub fn fixed_point_eta(eta_prev: f64, beta: f64, l_prev: f64) -> f64 {
    eta_prev + beta * l_prev
}

/// Warm lower bound of the fixed-point method,
/// `max{1 - beta, (1 + (l_{t-1} - u_{t-2}) / l_{t-2}) 1(t >= 2)} l_{t-1}`.
/// `history` is `(l_{t-2}, u_{t-2})` when `t >= 2`.
pub fn fixed_point_ltilde(beta: f64, l_prev: f64, history: Option<(f64, f64)>) -> f64 {
    let warm = match history {
        Some((l2, u2)) => 1.0 + (l_prev - u2) / l2,
        None => 0.0,
    };
    (1.0 - beta).max(warm) * l_prev
}

/// Truncated secant multiplier `max{1, -(eta_{t-2} - eta_{t-1}) / (u_{t-2} -
/// l_{t-1})}`; falls back to 1 when the denominator is not positive.
pub fn secant_multiplier(eta_tm2: f64, eta_tm1: f64, u_tm2: f64, l_tm1: f64) -> f64 {
    let den = u_tm2 - l_tm1;
    if !(den > 0.0) {
        return 1.0;
    }
    (-(eta_tm2 - eta_tm1) / den).max(1.0)
}

/// Bracket `l <= V(eta) <= u` returned by a bound oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub l: f64,
    pub u: f64,
}

/// Supplies brackets on `V(eta)` to the level update loop.
pub trait BoundOracle {
    /// Bracket `V(eta)` given the valid lower bound `ltilde`.
    fn bracket(&mut self, eta: f64, ltilde: f64) -> Result<Bracket>;
}

/// One outer step of a level method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelStep {
    pub t: usize,
    pub eta: f64,
    pub ltilde: f64,
    pub bracket: Bracket,
}

#[derive(Debug, Clone)]
pub struct LevelTrace {
    pub steps: Vec<LevelStep>,
    pub converged: bool,
}

/// Outer loop of the fixed-point or secant method on an abstract bound
/// oracle, starting from `(eta0, l0, u0)`. Stops when `u <= eps`, when `l`
/// falls below [`LOWER_FLOOR`], or after `max_outer` steps.
pub fn level_iterations<B: BoundOracle>(
    oracle: &mut B,
    method: LevelMethod,
    beta: f64,
    eta0: f64,
    first: Bracket,
    eps: f64,
    max_outer: usize,
    mut on_step: impl FnMut(&LevelStep),
) -> Result<LevelTrace> {
    let mut etas = vec![eta0];
    let mut ls = vec![first.l];
    let mut us = vec![first.u];
    let mut steps = Vec::new();
    let mut t = 0;
    while us[t] > eps && t < max_outer {
        if ls[t] < LOWER_FLOOR {
            log::debug!("lower bound {:.3e} below floor, stopping", ls[t]);
            break;
        }
        t += 1;
        let (eta, ltilde) = match method {
            LevelMethod::FixedPoint => {
                let hist = (t >= 2).then(|| (ls[t - 2], us[t - 2]));
                (
                    fixed_point_eta(etas[t - 1], beta, ls[t - 1]),
                    fixed_point_ltilde(beta, ls[t - 1], hist),
                )
            }
            LevelMethod::Secant => {
                let mult = if t == 1 {
                    1.0
                } else {
                    secant_multiplier(etas[t - 2], etas[t - 1], us[t - 2], ls[t - 1])
                };
                (etas[t - 1] + beta * mult * ls[t - 1], (1.0 - beta) * ls[t - 1])
            }
        };
        let b = oracle.bracket(eta, ltilde)?;
        etas.push(eta);
        ls.push(b.l);
        us.push(b.u);
        let step = LevelStep {
            t,
            eta,
            ltilde,
            bracket: b,
        };
        on_step(&step);
        steps.push(step);
    }
    Ok(LevelTrace {
        converged: us[t] <= eps,
        steps,
    })
}

/// APL-backed bound oracle that carries the current iterate.
struct AplOracle<'a> {
    p: &'a ConstrainedProblem,
    x: Vec<f64>,
    cfg: LevelConfig,
    report: SolverReport,
    stalled: bool,
}

impl BoundOracle for AplOracle<'_> {
    fn bracket(&mut self, eta: f64, ltilde: f64) -> Result<Bracket> {
        let cfg = self.cfg;
        let res = crate::apl::run_apl(
            self.p,
            &self.x,
            ltilde,
            eta,
            cfg.theta(),
            cfg.alpha,
            cfg.eps,
            &cfg.gap,
            &mut self.report.telemetry,
        )?;
        self.stalled |= res.stalled;
        self.x = res.x;
        // u_t comes from a fresh evaluation rather than the inner loop.
        let ev = self.p.evaluate(&self.x)?;
        let b = Bracket {
            l: res.lbar,
            u: ev.composite_value(eta).0,
        };
        let t = self.report.level_iterates.len();
        self.report
            .record(self.p, t, eta, Some(b.l), b.u, ev.objective(), ev.violation());
        self.report.level_iterates.push(LevelIterate {
            t,
            eta,
            l: b.l,
            u: b.u,
            ltilde_used: ltilde,
            x: self.x.clone(),
        });
        Ok(b)
    }
}

/// `max(10, 10 ceil(ln(delta / eps)))`
pub fn default_outer_cap(delta: f64, eps: f64) -> usize {
    let r = (delta.max(eps) / eps).ln().ceil().max(0.0) as usize;
    (10 * r).max(10)
}

fn level_solve(p: &ConstrainedProblem, cfg: &LevelConfig, name: &str) -> Result<Solution> {
    cfg.validate()?;
    let started = std::time::Instant::now();
    let mut report = SolverReport::new(name, &p.name);
    let mut telemetry = Telemetry::default();
    let init = initialize(p, cfg.alpha, cfg.eps, &cfg.gap, &mut telemetry)?;
    let ev = p.evaluate(&init.x)?;
    report.telemetry = telemetry;
    let l0 = (init.flag == InitFlag::RootFindingRequired).then_some(init.l0);
    report.record(p, 0, init.eta0, l0, init.u0, ev.objective(), ev.violation());
    report.level_iterates.push(LevelIterate {
        t: 0,
        eta: init.eta0,
        l: init.l0,
        u: init.u0,
        ltilde_used: init.l0,
        x: init.x.clone(),
    });

    if init.flag == InitFlag::NearOptimal {
        report.status = ExitStatus::Converged;
        report.message = Some("initialization returned a near-optimal point".into());
        report.composite_evals = p.objective.counts().gevals;
        report.wall_time_secs = started.elapsed().as_secs_f64();
        return Ok(Solution { x: init.x, report });
    }

    let max_outer = cfg.max_outer.unwrap_or_else(|| default_outer_cap(init.u0, cfg.eps));
    let mut oracle = AplOracle {
        p,
        x: init.x.clone(),
        cfg: *cfg,
        report,
        stalled: false,
    };
    let trace = level_iterations(
        &mut oracle,
        cfg.method,
        cfg.beta,
        init.eta0,
        Bracket { l: init.l0, u: init.u0 },
        cfg.eps,
        max_outer,
        |s| {
            log::debug!(
                "t = {}: eta {:.6e}, l {:.3e}, u {:.3e}",
                s.t,
                s.eta,
                s.bracket.l,
                s.bracket.u
            )
        },
    )?;
    let AplOracle {
        x, mut report, stalled, ..
    } = oracle;
    report.status = if trace.converged {
        ExitStatus::Converged
    } else {
        report.message = Some(if stalled {
            "a gap reduction hit its iteration cap".into()
        } else {
            format!("stopped after {} outer iterations", trace.steps.len())
        });
        ExitStatus::NotConverged
    };
    report.iterations = trace.steps.len();
    report.composite_evals = p.objective.counts().gevals;
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(Solution { x, report })
}

/// APL-based inexact fixed-point method.
pub fn fixed_point_solve(p: &ConstrainedProblem, cfg: &LevelConfig) -> Result<Solution> {
    if cfg.method != LevelMethod::FixedPoint {
        return Err(Error::InvalidParameter("config is not a fixed-point config".into()));
    }
    level_solve(p, cfg, "apl-fixed-point")
}

/// APL-based truncated inexact secant method.
pub fn secant_solve(p: &ConstrainedProblem, cfg: &LevelConfig) -> Result<Solution> {
    if cfg.method != LevelMethod::Secant {
        return Err(Error::InvalidParameter("config is not a secant config".into()));
    }
    level_solve(p, cfg, "apl-secant")
}

/// Certified bracket on `V(eta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub eta: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Brackets `V` on each `eta`, tightening until `u - l <= max((rel_alpha -
/// 1) / rel_alpha * |u|, floor)`.
pub fn probe_value_function(
    p: &ConstrainedProblem,
    etas: &[f64],
    rel_alpha: f64,
    floor: f64,
    gap: &GapConfig,
    telemetry: &mut Telemetry,
) -> Result<Vec<ProbePoint>> {
    if !(rel_alpha > 1.0 && floor > 0.0) {
        return Err(Error::InvalidParameter("need rel_alpha > 1 and floor > 0".into()));
    }
    p.domain.require_bounded("value-function probing")?;
    let start = p.domain.clamp(&vec![0.0; p.dim()]);
    let mut out = Vec::with_capacity(etas.len());
    for &eta in etas {
        let ev = p.evaluate(&start)?;
        let mut u = ev.composite_value(eta).0;
        let lp = solve_epigraph_lp(&LpProblem {
            pieces: ev.minorants(eta),
            cuts: Vec::new(),
            domain: p.domain.clone(),
        })?;
        telemetry.lp_solves += 1;
        let mut l = match lp.status {
            LpStatus::Optimal => lp.value,
            LpStatus::Infeasible => return Err(Error::SubproblemFailure("box LP reported infeasible".into())),
        };
        let mut x = start.clone();
        let mut rounds = 0;
        while u - l > ((rel_alpha - 1.0) / rel_alpha * u.abs()).max(floor) && rounds < 1000 {
            let g = gap_reduction_from(p, &x, u, l, eta, 0.5, gap, telemetry)?;
            x = g.p;
            u = g.v_upper;
            l = g.v_lower;
            rounds += 1;
            if g.capped {
                break;
            }
        }
        out.push(ProbePoint {
            eta,
            lower: l,
            upper: u,
        });
    }
    Ok(out)
}
