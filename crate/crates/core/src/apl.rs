//! Gap reduction and the accelerated prox-level (APL) outer loop, which
//! bracket `V(eta) = min_{x in X} v(x, eta)` to a relative accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geomsub::{solve_epigraph_lp, solve_nearest_point, Cut, LpProblem, LpStatus, QpProblem, QpStatus};
use crate::linalg::{dot, lerp, sub};
use crate::oracle::{AffineMinorant, ConstrainedProblem};
use crate::report::{AplRecord, GapExit, GapRecord, Telemetry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapConfig {
    /// Number of aggregated level cuts kept in the localizer.
    pub bundle: usize,
    /// Safety cap on iterations of a single gap reduction.
    pub max_iters: usize,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig {
            bundle: 5,
            max_iters: 20_000,
        }
    }
}

/// State of one gap-reduction run.
#[derive(Debug, Clone)]
pub struct GapState {
    pub x0: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub v_lower: f64,
    pub v_upper: f64,
    pub lambda: f64,
    pub theta: f64,
    pub k: usize,
    /// Newest-last aggregated level cuts.
    pub level_cuts: Vec<Cut>,
    /// `<x^k - x0, x - x^k> >= 0`, written as a `<=` cut.
    pub halfspace: Option<Cut>,
}

impl GapState {
    fn localizer(&self) -> Vec<Cut> {
        let mut cuts = self.level_cuts.clone();
        cuts.extend(self.halfspace.clone());
        cuts
    }
}

#[derive(Debug, Clone)]
pub struct GapResult {
    pub p: Vec<f64>,
    pub v_lower: f64,
    /// `v(p, eta)`
    pub v_upper: f64,
    pub iterations: usize,
    pub exit: GapExit,
    /// Set when the safety cap stopped the run before either exit test.
    pub capped: bool,
    /// Every `x^k` produced, starting with `x^0`.
    pub prox_path: Vec<Vec<f64>>,
}

/// Gap reduction from `x` with lower bound `l_in <= V(eta)`.
pub fn run_gap_reduction(
    p: &ConstrainedProblem,
    x: &[f64],
    l_in: f64,
    eta: f64,
    theta: f64,
    cfg: &GapConfig,
    telemetry: &mut Telemetry,
) -> Result<GapResult> {
    let u = p.evaluate(x)?.composite_value(eta).0;
    gap_reduction_from(p, x, u, l_in, eta, theta, cfg, telemetry)
}

/// Gap reduction when `v(x, eta)` is already known.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gap_reduction_from(
    p: &ConstrainedProblem,
    x: &[f64],
    u_in: f64,
    l_in: f64,
    eta: f64,
    theta: f64,
    cfg: &GapConfig,
    telemetry: &mut Telemetry,
) -> Result<GapResult> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter("theta must lie in (0, 1)".into()));
    }
    if cfg.bundle == 0 {
        return Err(Error::InvalidParameter("bundle size must be positive".into()));
    }
    p.domain.require_bounded("gap reduction")?;

    let record = |res: &GapResult, telemetry: &mut Telemetry| {
        telemetry.gap_reductions.push(GapRecord {
            eta,
            theta,
            input_gap: u_in - l_in,
            output_gap: res.v_upper - res.v_lower,
            iterations: res.iterations,
            exit: res.exit,
        });
    };

    if u_in <= l_in {
        let res = GapResult {
            p: x.to_vec(),
            v_lower: l_in.min(u_in),
            v_upper: u_in,
            iterations: 0,
            exit: GapExit::LowerBoundRaised,
            capped: false,
            prox_path: vec![x.to_vec()],
        };
        record(&res, telemetry);
        return Ok(res);
    }

    let mut st = GapState {
        x0: x.to_vec(),
        x: x.to_vec(),
        y: x.to_vec(),
        z: x.to_vec(),
        v_lower: l_in,
        v_upper: u_in,
        lambda: 0.5 * (l_in + u_in),
        theta,
        k: 0,
        level_cuts: Vec::new(),
        halfspace: None,
    };
    let lower_exit = st.lambda - theta * (st.lambda - l_in);
    let upper_exit = theta * (u_in - st.lambda);
    let mut prox_path = vec![st.x0.clone()];

    let (p_out, exit, capped) = loop {
        if st.k >= cfg.max_iters {
            log::warn!("gap reduction stopped at its cap of {} iterations", cfg.max_iters);
            break (st.y.clone(), GapExit::UpperBoundDropped, true);
        }
        let k = st.k + 1;
        let a = 2.0 / (k as f64 + 1.0);
        st.z = lerp(&st.y, &st.x, a);
        let pieces: Vec<AffineMinorant> = p.evaluate(&st.z)?.minorants(eta);
        let localizer = st.localizer();

        let lp = solve_epigraph_lp(&LpProblem {
            pieces: pieces.clone(),
            cuts: localizer.clone(),
            domain: p.domain.clone(),
        })?;
        telemetry.lp_solves += 1;
        let h = match lp.status {
            LpStatus::Optimal => lp.value,
            LpStatus::Infeasible => f64::INFINITY,
        };
        st.v_lower = st.v_lower.max(st.lambda.min(h));
        if st.v_lower >= lower_exit {
            st.k = k;
            break (st.y.clone(), GapExit::LowerBoundRaised, false);
        }

        let mut cuts: Vec<Cut> = pieces.iter().map(|m| m.level_cut(st.lambda)).collect();
        let n_level = cuts.len();
        cuts.extend(localizer);
        let qp = solve_nearest_point(&QpProblem {
            center: st.x0.clone(),
            cuts,
            domain: p.domain.clone(),
        })?;
        telemetry.qp_solves += 1;
        if qp.status == QpStatus::Infeasible {
            // The level set is empty after all: treat as h = +inf.
            st.v_lower = st.v_lower.max(st.lambda);
            st.k = k;
            break (st.y.clone(), GapExit::LowerBoundRaised, false);
        }
        let x_new = qp.point;

        // Aggregate the active level cuts into one.
        let weight: f64 = qp.multipliers[..n_level].iter().sum();
        if weight > 0.0 {
            let mut slope = vec![0.0; x_new.len()];
            let mut intercept = 0.0;
            for (m, piece) in qp.multipliers[..n_level].iter().zip(&pieces) {
                let w = m / weight;
                if w > 0.0 {
                    crate::linalg::axpy(w, &piece.slope, &mut slope);
                    intercept += w * piece.intercept;
                }
            }
            st.level_cuts.push(Cut::new(slope, st.lambda - intercept));
            if st.level_cuts.len() > cfg.bundle {
                st.level_cuts.remove(0);
            }
        }
        let dir = sub(&x_new, &st.x0);
        st.halfspace = if dir.iter().any(|v| *v != 0.0) {
            // <d, x - x^k> >= 0  <=>  -d . x <= -d . x^k
            let rhs = -dot(&dir, &x_new);
            Some(Cut::new(dir.iter().map(|v| -v).collect(), rhs))
        } else {
            None
        };

        let y_tilde = lerp(&st.y, &x_new, a);
        let v_k = p.evaluate(&y_tilde)?.composite_value(eta).0;
        if v_k < st.v_upper {
            st.v_upper = v_k;
            st.y = y_tilde;
        }
        st.x = x_new;
        prox_path.push(st.x.clone());
        st.k = k;
        if v_k - st.lambda <= upper_exit {
            break (st.y.clone(), GapExit::UpperBoundDropped, false);
        }
    };

    let res = GapResult {
        p: p_out,
        v_lower: st.v_lower,
        v_upper: st.v_upper,
        iterations: st.k,
        exit,
        capped,
        prox_path,
    };
    record(&res, telemetry);
    Ok(res)
}

#[derive(Debug, Clone)]
pub struct AplResult {
    pub x: Vec<f64>,
    pub lbar: f64,
    /// `v(x, eta)`
    pub ubar: f64,
    pub stages: usize,
    /// Stopped because a gap reduction hit its cap.
    pub stalled: bool,
}

impl AplResult {
    /// `ubar <= eps`, or a positive bracket with `ubar <= alpha * lbar`.
    pub fn satisfies_contract(&self, alpha: f64, eps: f64) -> bool {
        self.ubar <= eps || (self.lbar > 0.0 && self.ubar <= alpha * self.lbar)
    }
}

fn apl_continue(u: f64, l: f64, alpha: f64, eps: f64) -> bool {
    u - l > (alpha - 1.0) / alpha * u && u > eps
}

/// APL from `x_in` with lower bound `lbar0 <= V(eta)`.
#[allow(clippy::too_many_arguments)]
pub fn run_apl(
    p: &ConstrainedProblem,
    x_in: &[f64],
    lbar0: f64,
    eta: f64,
    theta: f64,
    alpha: f64,
    eps: f64,
    cfg: &GapConfig,
    telemetry: &mut Telemetry,
) -> Result<AplResult> {
    let u0 = p.evaluate(x_in)?.composite_value(eta).0;
    apl_from(p, x_in, u0, lbar0, eta, theta, alpha, eps, cfg, telemetry)
}

/// APL when `v(x_in, eta)` is already known.
#[allow(clippy::too_many_arguments)]
pub(crate) fn apl_from(
    p: &ConstrainedProblem,
    x_in: &[f64],
    u0: f64,
    lbar0: f64,
    eta: f64,
    theta: f64,
    alpha: f64,
    eps: f64,
    cfg: &GapConfig,
    telemetry: &mut Telemetry,
) -> Result<AplResult> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidParameter("alpha must exceed 1".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("eps must be positive".into()));
    }
    let mut x = x_in.to_vec();
    let mut u = u0;
    let mut l = lbar0;
    let mut deltas = vec![u - l];
    let mut stages = 0;
    let mut stalled = false;
    while apl_continue(u, l, alpha, eps) {
        let g = gap_reduction_from(p, &x, u, l, eta, theta, cfg, telemetry)?;
        stages += 1;
        x = g.p;
        l = g.v_lower;
        u = g.v_upper;
        deltas.push(u - l);
        if g.capped {
            stalled = true;
            break;
        }
    }
    telemetry.apl_runs.push(AplRecord { eta, theta, deltas });
    Ok(AplResult {
        x,
        lbar: l,
        ubar: u,
        stages,
        stalled,
    })
}

/// Stage bound `max{0, ceil(log_{1/nu}(alpha (u0 - l0) / (alpha - 1) *
/// min{1 / V, 2 (alpha - 1) / (alpha eps)}))}` with `nu = (1 + theta) / 2`.
pub fn apl_stage_bound(gap0: f64, value: f64, theta: f64, alpha: f64, eps: f64) -> usize {
    let nu = 0.5 * (1.0 + theta);
    let inner = (1.0 / value).min(2.0 * (alpha - 1.0) / (alpha * eps));
    let arg = alpha * gap0 / (alpha - 1.0) * inner;
    if arg <= 1.0 {
        0
    } else {
        (arg.ln() / (1.0 / nu).ln()).ceil() as usize
    }
}
