//! Accelerated Polyak minorant method for problems with a known optimal
//! value, its constant-weight special case (PMM) and the restarted variant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geomsub::{solve_nearest_point, Cut, QpProblem, QpStatus};
use crate::linalg::{axpy, lerp};
use crate::oracle::{ConstrainedProblem, PointEval};
use crate::report::{ExitStatus, Solution, SolverReport, Telemetry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccelSchedule {
    /// `alpha_k = 2 / (k + 1)`
    Nesterov,
    /// `alpha_k = 1`
    Constant,
}

impl AccelSchedule {
    pub fn alpha(&self, k: usize) -> f64 {
        match self {
            AccelSchedule::Nesterov => 2.0 / (k as f64 + 1.0),
            AccelSchedule::Constant => 1.0,
        }
    }

    /// `Gamma_1 = 1`, `Gamma_k = Gamma_{k-1} / (1 - alpha_k)`. Infinite past
    /// `k = 1` for the constant schedule.
    pub fn gamma(&self, k: usize) -> f64 {
        match self {
            AccelSchedule::Nesterov => (k * (k + 1)) as f64 / 2.0,
            AccelSchedule::Constant if k <= 1 => 1.0,
            AccelSchedule::Constant => f64::INFINITY,
        }
    }
}

/// How the localizer `X_k` is built from past objective minorants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalizerPolicy {
    DomainOnly,
    FullHistory,
    /// Keep the newest `k0` cuts.
    LimitedMemory(usize),
    /// One cut: the uniform average of all objective minorants so far.
    Averaging,
}

impl Default for LocalizerPolicy {
    fn default() -> Self {
        LocalizerPolicy::LimitedMemory(5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApmmConfig {
    pub schedule: AccelSchedule,
    pub policy: LocalizerPolicy,
    pub eps: f64,
    pub max_iters: usize,
}

impl Default for ApmmConfig {
    fn default() -> Self {
        ApmmConfig {
            schedule: AccelSchedule::Nesterov,
            policy: LocalizerPolicy::default(),
            eps: 1e-6,
            max_iters: 10_000,
        }
    }
}

impl ApmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter("eps must be positive".into()));
        }
        if let LocalizerPolicy::LimitedMemory(0) = self.policy {
            return Err(Error::InvalidParameter("bundle size k0 must be positive".into()));
        }
        Ok(())
    }
}

/// Iterates of one APMM run.
#[derive(Debug, Clone)]
pub struct ApmmState {
    pub k: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// Best composite value `v(y, f*)` seen so far.
    pub vbar: f64,
    pub y_objective: f64,
    pub y_violation: f64,
    /// Retained objective cuts `l_f(., z^s) <= f*`.
    pub bundle: Vec<Cut>,
    avg_slope: Vec<f64>,
    avg_intercept: f64,
    cache: Option<PointEval>,
}

impl ApmmState {
    /// `y^0 = x^0 = x` (projected onto the box).
    pub fn new(p: &ConstrainedProblem, x0: &[f64], fstar: f64) -> Result<Self> {
        if x0.len() != p.dim() {
            return Err(Error::DimensionMismatch {
                expected: p.dim(),
                got: x0.len(),
            });
        }
        let x = p.domain.clamp(x0);
        let ev = p.evaluate(&x)?;
        let (vbar, _) = ev.composite_value(fstar);
        Ok(ApmmState {
            k: 0,
            y_objective: ev.objective(),
            y_violation: ev.violation(),
            x: x.clone(),
            y: x.clone(),
            z: x,
            vbar,
            bundle: Vec::new(),
            avg_slope: vec![0.0; p.dim()],
            avg_intercept: 0.0,
            cache: Some(ev),
        })
    }

    fn evaluate(&mut self, p: &ConstrainedProblem, at: &[f64]) -> Result<PointEval> {
        if let Some(ev) = &self.cache {
            if ev.point == at {
                return Ok(ev.clone());
            }
        }
        let ev = p.evaluate(at)?;
        self.cache = Some(ev.clone());
        Ok(ev)
    }

    fn localizer(&self, policy: LocalizerPolicy) -> Vec<Cut> {
        match policy {
            LocalizerPolicy::DomainOnly => Vec::new(),
            LocalizerPolicy::FullHistory | LocalizerPolicy::LimitedMemory(_) => self.bundle.clone(),
            LocalizerPolicy::Averaging if self.k == 0 => Vec::new(),
            LocalizerPolicy::Averaging => {
                let n = self.k as f64;
                vec![Cut::new(
                    self.avg_slope.iter().map(|s| s / n).collect(),
                    -self.avg_intercept / n,
                )]
            }
        }
    }

    /// One momentum step. Fails with `InvalidTargetValue` when the prox
    /// subproblem is empty, which a correct `fstar` rules out.
    pub fn step(
        &mut self,
        p: &ConstrainedProblem,
        fstar: f64,
        schedule: AccelSchedule,
        policy: LocalizerPolicy,
        telemetry: &mut Telemetry,
    ) -> Result<()> {
        let k = self.k + 1;
        let a = schedule.alpha(k);
        let z = lerp(&self.y, &self.x, a);
        let ev_z = self.evaluate(p, &z)?;
        let pieces = ev_z.minorants(fstar);

        let mut cuts: Vec<Cut> = pieces.iter().map(|m| m.level_cut(0.0)).collect();
        cuts.extend(self.localizer(policy));
        let sol = solve_nearest_point(&QpProblem {
            center: self.x.clone(),
            cuts,
            domain: p.domain.clone(),
        })?;
        telemetry.qp_solves += 1;
        if sol.status == QpStatus::Infeasible {
            return Err(Error::InvalidTargetValue { fstar, iteration: k });
        }

        let x_new = sol.point;
        let y_tilde = lerp(&self.y, &x_new, a);
        let ev_y = self.evaluate(p, &y_tilde)?;
        let (v, _) = ev_y.composite_value(fstar);
        if v < self.vbar {
            self.vbar = v;
            self.y = y_tilde;
            self.y_objective = ev_y.objective();
            self.y_violation = ev_y.violation();
        }

        let objective_cut = pieces[0].level_cut(0.0);
        match policy {
            LocalizerPolicy::DomainOnly => {}
            LocalizerPolicy::FullHistory => self.bundle.push(objective_cut),
            LocalizerPolicy::LimitedMemory(k0) => {
                self.bundle.push(objective_cut);
                if self.bundle.len() > k0 {
                    self.bundle.remove(0);
                }
            }
            LocalizerPolicy::Averaging => {
                axpy(1.0, &pieces[0].slope, &mut self.avg_slope);
                self.avg_intercept += pieces[0].intercept;
            }
        }

        self.x = x_new;
        self.z = z;
        self.k = k;
        Ok(())
    }
}

/// Functional form of [`ApmmState::step`].
pub fn apmm_step(
    mut state: ApmmState,
    p: &ConstrainedProblem,
    fstar: f64,
    schedule: AccelSchedule,
    policy: LocalizerPolicy,
) -> Result<ApmmState> {
    let mut telemetry = Telemetry::default();
    state.step(p, fstar, schedule, policy, &mut telemetry)?;
    Ok(state)
}

/// Runs APMM from `x0` until `v(y, f*) <= eps`, appending records to
/// `report` with iteration numbers shifted by `offset`.
fn run_apmm(
    p: &ConstrainedProblem,
    x0: &[f64],
    fstar: f64,
    eps: f64,
    cfg: &ApmmConfig,
    report: &mut SolverReport,
    offset: usize,
) -> Result<(ApmmState, bool)> {
    let mut st = ApmmState::new(p, x0, fstar)?;
    if report.records.is_empty() {
        report.record(p, 0, fstar, None, st.vbar, st.y_objective, st.y_violation);
    }
    let mut converged = st.vbar <= eps;
    while !converged && st.k < cfg.max_iters {
        st.step(p, fstar, cfg.schedule, cfg.policy, &mut report.telemetry)?;
        report.record(p, offset + st.k, fstar, None, st.vbar, st.y_objective, st.y_violation);
        converged = st.vbar <= eps;
    }
    log::debug!("apmm: {} iterations, vbar {:.3e}", st.k, st.vbar);
    Ok((st, converged))
}

fn finish(report: &mut SolverReport, p: &ConstrainedProblem, converged: bool, started: std::time::Instant) {
    report.status = if converged {
        ExitStatus::Converged
    } else {
        ExitStatus::NotConverged
    };
    report.iterations = report.records.len().saturating_sub(1);
    report.composite_evals = p.objective.counts().gevals;
    report.wall_time_secs = started.elapsed().as_secs_f64();
}

/// APMM with `eps` and schedule taken from `cfg`.
pub fn apmm_solve(p: &ConstrainedProblem, x0: &[f64], fstar: f64, cfg: &ApmmConfig) -> Result<Solution> {
    cfg.validate()?;
    let started = std::time::Instant::now();
    let name = match cfg.schedule {
        AccelSchedule::Nesterov => "apmm",
        AccelSchedule::Constant => "pmm",
    };
    let mut report = SolverReport::new(name, &p.name);
    let (st, converged) = run_apmm(p, x0, fstar, cfg.eps, cfg, &mut report, 0)?;
    if !converged {
        report.message = Some(format!(
            "iteration cap {} reached with v = {:.3e}",
            cfg.max_iters, st.vbar
        ));
    }
    finish(&mut report, p, converged, started);
    Ok(Solution { x: st.y, report })
}

/// `max{f(q) - f*, ||[g(q)]_+||_inf}`
pub fn initial_gap(objective: f64, violation: f64, fstar: f64) -> f64 {
    (objective - fstar).max(violation)
}

/// `ceil(log_{1/theta}(delta0 / eps))`, the number of restarts needed.
pub fn epoch_count(delta0: f64, theta: f64, eps: f64) -> usize {
    if delta0 <= eps {
        return 0;
    }
    ((delta0 / eps).ln() / (1.0 / theta).ln()).ceil() as usize
}

/// Restarted APMM: epoch `s` runs APMM to accuracy `delta0 * theta^(s+1)`.
/// `cfg.max_iters` caps each epoch.
pub fn rapmm_solve(p: &ConstrainedProblem, q0: &[f64], fstar: f64, theta: f64, cfg: &ApmmConfig) -> Result<Solution> {
    cfg.validate()?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter("theta must lie in (0, 1)".into()));
    }
    let started = std::time::Instant::now();
    let mut report = SolverReport::new("rapmm", &p.name);

    let q = p.domain.clamp(q0);
    let ev = p.evaluate(&q)?;
    let delta0 = initial_gap(ev.objective(), ev.violation(), fstar);
    let mut v = ev.composite_value(fstar).0;
    report.record(p, 0, fstar, None, v, ev.objective(), ev.violation());

    let max_epochs = epoch_count(delta0, theta, cfg.eps) + 2;
    let mut q = q;
    let mut s = 0;
    let mut offset = 0;
    let mut converged = v <= cfg.eps;
    while !converged && s < max_epochs {
        let target = delta0 * theta.powi(s as i32 + 1);
        let (st, ok) = run_apmm(p, &q, fstar, target, cfg, &mut report, offset)?;
        offset += st.k;
        q = st.y;
        v = st.vbar;
        s += 1;
        log::debug!("rapmm epoch {s}: target {target:.3e}, v {v:.3e}, {} steps", st.k);
        converged = v <= cfg.eps;
        if !ok {
            report.message = Some(format!("epoch {s} hit the iteration cap {}", cfg.max_iters));
            break;
        }
    }
    if !converged && report.message.is_none() {
        report.message = Some(format!("stopped after {s} epochs with v = {v:.3e}"));
    }
    finish(&mut report, p, converged, started);
    Ok(Solution { x: q, report })
}

/// Analytical constants for rate checks on fixtures where they are known.
/// They never enter the solver path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams {
    /// Holder exponent of the gradients.
    pub rho: f64,
    pub m_hat: f64,
    /// `||x* - x0||`
    pub distance0: f64,
    pub mu: f64,
    pub rho_tilde: f64,
}

impl TheoryParams {
    pub fn new(rho: f64, m_hat: f64, distance0: f64) -> Result<Self> {
        let t = TheoryParams {
            rho,
            m_hat,
            distance0,
            mu: 0.0,
            rho_tilde: 1.0 + rho,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_growth(mut self, mu: f64, rho_tilde: f64) -> Result<Self> {
        self.mu = mu;
        self.rho_tilde = rho_tilde;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) || !(self.m_hat > 0.0) {
            return Err(Error::InvalidParameter("need rho in [0, 1] and M > 0".into()));
        }
        if self.rho_tilde < 1.0 + self.rho {
            return Err(Error::InvalidParameter(
                "growth exponent below 1 + rho is not covered".into(),
            ));
        }
        Ok(())
    }

    /// Accelerated bound on `v(y^K, f*)` with `alpha_k = 2 / (k + 1)`.
    pub fn accelerated_bound(&self, k: usize) -> f64 {
        let r = self.rho;
        self.m_hat / (1.0 + r) * self.distance0.powf(r + 1.0) * 2f64.powf(r + 1.0) * 3f64.powf((1.0 - r) / 2.0)
            / (k as f64).powf((1.0 + 3.0 * r) / 2.0)
    }

    /// Bound on `min_{k <= K} v(x^k, f*)` with `alpha_k = 1`.
    pub fn constant_bound(&self, k: usize) -> f64 {
        let r = self.rho;
        let k = k as f64;
        self.m_hat / (1.0 + r) * k.powf((1.0 - r) / 2.0) * self.distance0.powf(r + 1.0) / k
    }
}
