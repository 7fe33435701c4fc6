//! Box domains, half-space cuts and the two subproblems the outer methods
//! need: the nearest point of a polyhedron and the epigraph LP of a
//! piecewise-affine function.
//!
//! The QP is a Goldfarb-Idnani dual active-set method specialised to an
//! identity Hessian. The LP is a dense bounded-variable simplex with Bland's
//! rule. Both are sized for bundle subproblems: a few dozen rows at most.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::oracle::AffineMinorant;

/// Axis-aligned box; entries may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u || *l == f64::INFINITY || *u == f64::NEG_INFINITY {
                return Err(Error::InvalidParameter(format!(
                    "box bounds [{l}, {u}] at coordinate {i} are empty"
                )));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    pub fn unbounded(d: usize) -> Self {
        BoxDomain {
            lower: vec![f64::NEG_INFINITY; d],
            upper: vec![f64::INFINITY; d],
        }
    }

    /// `[lo, hi]^d`
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        BoxDomain::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }

    /// Euclidean diameter, infinite when any side is unbounded.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| v.max(*l).min(*u))
            .collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }

    pub(crate) fn require_bounded(&self, what: &str) -> Result<()> {
        if self.is_bounded() {
            Ok(())
        } else {
            Err(Error::UnboundedDomain(format!("{what} needs a finite box")))
        }
    }

    /// Range of `a . x + b` over the box.
    pub fn affine_range(&self, a: &[f64], b: f64) -> (f64, f64) {
        let mut lo = b;
        let mut hi = b;
        for ((ai, l), u) in a.iter().zip(&self.lower).zip(&self.upper) {
            if *ai > 0.0 {
                lo += ai * l;
                hi += ai * u;
            } else if *ai < 0.0 {
                lo += ai * u;
                hi += ai * l;
            }
        }
        (lo, hi)
    }
}

/// Half-space `slope . x <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub slope: Vec<f64>,
    pub rhs: f64,
}

impl Cut {
    pub fn new(slope: Vec<f64>, rhs: f64) -> Self {
        Cut { slope, rhs }
    }

    /// `slope . x - rhs`, positive when violated.
    pub fn violation(&self, x: &[f64]) -> f64 {
        dot(&self.slope, x) - self.rhs
    }
}

pub const QP_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub center: Vec<f64>,
    pub cuts: Vec<Cut>,
    pub domain: BoxDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

/// Non-negative weights on the cuts and box sides whose combination reads
/// `0 . x <= negative`.
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasCertificate {
    pub cut_weights: Vec<f64>,
    pub lower_weights: Vec<f64>,
    pub upper_weights: Vec<f64>,
}

impl FarkasCertificate {
    /// `(sum_j w_j a_j, sum_j w_j b_j)` in `a . x <= b` form, with the lower
    /// sides written as `-x_i <= -l_i`.
    pub fn combination(&self, q: &QpProblem) -> (Vec<f64>, f64) {
        let d = q.center.len();
        let mut a = vec![0.0; d];
        let mut b = 0.0;
        for (w, c) in self.cut_weights.iter().zip(&q.cuts) {
            if *w != 0.0 {
                crate::linalg::axpy(*w, &c.slope, &mut a);
                b += w * c.rhs;
            }
        }
        for i in 0..d {
            if self.upper_weights[i] != 0.0 {
                a[i] += self.upper_weights[i];
                b += self.upper_weights[i] * q.domain.upper[i];
            }
            if self.lower_weights[i] != 0.0 {
                a[i] -= self.lower_weights[i];
                b -= self.lower_weights[i] * q.domain.lower[i];
            }
        }
        (a, b)
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub status: QpStatus,
    /// Minimizer when optimal, last dual iterate otherwise.
    pub point: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub lower_multipliers: Vec<f64>,
    pub upper_multipliers: Vec<f64>,
    /// Largest of stationarity, primal and complementarity residuals.
    pub residual: f64,
    pub certificate: Option<FarkasCertificate>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
enum RowKind {
    Cut(usize),
    Lower(usize),
    Upper(usize),
}

/// Constraint rows scaled to unit normals.
struct Rows {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    scale: Vec<f64>,
    kind: Vec<RowKind>,
}

impl Rows {
    fn build(q: &QpProblem) -> std::result::Result<Rows, FarkasCertificate> {
        let d = q.center.len();
        let mut rows = Rows {
            a: Vec::new(),
            b: Vec::new(),
            scale: Vec::new(),
            kind: Vec::new(),
        };
        for (j, c) in q.cuts.iter().enumerate() {
            let n = norm(&c.slope);
            if n <= 1e-300 {
                if c.rhs < 0.0 {
                    let mut cut_weights = vec![0.0; q.cuts.len()];
                    cut_weights[j] = 1.0;
                    return Err(FarkasCertificate {
                        cut_weights,
                        lower_weights: vec![0.0; d],
                        upper_weights: vec![0.0; d],
                    });
                }
                continue;
            }
            rows.a.push(c.slope.iter().map(|v| v / n).collect());
            rows.b.push(c.rhs / n);
            rows.scale.push(n);
            rows.kind.push(RowKind::Cut(j));
        }
        for i in 0..d {
            if q.domain.upper[i].is_finite() {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                rows.a.push(e);
                rows.b.push(q.domain.upper[i]);
                rows.scale.push(1.0);
                rows.kind.push(RowKind::Upper(i));
            }
            if q.domain.lower[i].is_finite() {
                let mut e = vec![0.0; d];
                e[i] = -1.0;
                rows.a.push(e);
                rows.b.push(-q.domain.lower[i]);
                rows.scale.push(1.0);
                rows.kind.push(RowKind::Lower(i));
            }
        }
        Ok(rows)
    }

    fn len(&self) -> usize {
        self.a.len()
    }
}

/// Thin QR of the active normals, kept by modified Gram-Schmidt.
struct ActiveQr {
    q: Vec<Vec<f64>>,
    /// Column-major upper triangle: `r[k]` is column `k`, length `k + 1`.
    r: Vec<Vec<f64>>,
}

impl ActiveQr {
    fn new() -> Self {
        ActiveQr {
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    /// Splits `a` into `Q w + z` with `z` orthogonal to the active span.
    fn project(&self, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut z = a.to_vec();
        let mut w = vec![0.0; self.q.len()];
        // Two passes keep the residual orthogonal to working precision.
        for _ in 0..2 {
            for (k, qk) in self.q.iter().enumerate() {
                let c = dot(qk, &z);
                w[k] += c;
                crate::linalg::axpy(-c, qk, &mut z);
            }
        }
        (w, z)
    }

    /// `R^{-1} w`
    fn solve(&self, w: &[f64]) -> Vec<f64> {
        let k = w.len();
        let mut out = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = w[i];
            for j in i + 1..k {
                s -= self.r[j][i] * out[j];
            }
            out[i] = s / self.r[i][i];
        }
        out
    }

    fn push(&mut self, w: Vec<f64>, z: Vec<f64>) {
        let zn = norm(&z);
        let mut col = w;
        col.push(zn);
        self.r.push(col);
        self.q.push(z.iter().map(|v| v / zn).collect());
    }

    fn rebuild(rows: &Rows, active: &[usize]) -> Self {
        let mut qr = ActiveQr::new();
        for &i in active {
            let (w, z) = qr.project(&rows.a[i]);
            qr.push(w, z);
        }
        qr
    }
}

/// Projects `q.center` onto `{x : cuts} ∩ box`.
pub fn solve_nearest_point(q: &QpProblem) -> Result<QpSolution> {
    let d = q.center.len();
    if q.domain.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: q.domain.dim(),
        });
    }
    for c in &q.cuts {
        if c.slope.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: c.slope.len(),
            });
        }
        if !c.rhs.is_finite() || !crate::linalg::all_finite(&c.slope) {
            return Err(Error::SubproblemFailure("non-finite cut".into()));
        }
    }
    if !crate::linalg::all_finite(&q.center) {
        return Err(Error::SubproblemFailure("non-finite prox center".into()));
    }

    let rows = match Rows::build(q) {
        Ok(r) => r,
        Err(cert) => {
            return Ok(QpSolution {
                status: QpStatus::Infeasible,
                point: q.center.clone(),
                multipliers: vec![0.0; q.cuts.len()],
                lower_multipliers: vec![0.0; d],
                upper_multipliers: vec![0.0; d],
                residual: 0.0,
                certificate: Some(cert),
                iterations: 0,
            })
        }
    };

    let mut x = q.center.clone();
    let mut active: Vec<usize> = Vec::new();
    let mut lam: Vec<f64> = Vec::new();
    let mut is_active = vec![false; rows.len()];
    let mut qr = ActiveQr::new();
    let max_iter = 50 * (rows.len() + d) + 100;
    let mut iterations = 0;

    loop {
        // Most violated constraint, lowest index on ties.
        let mut pick: Option<(usize, f64)> = None;
        for j in 0..rows.len() {
            if is_active[j] {
                continue;
            }
            let s = dot(&rows.a[j], &x) - rows.b[j];
            if s > QP_TOL * (1.0 + rows.b[j].abs()) && pick.map_or(true, |(_, best)| s > best) {
                pick = Some((j, s));
            }
        }
        let Some((p, _)) = pick else { break };

        let mut lam_p = 0.0;
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(Error::SubproblemFailure(format!(
                    "nearest-point QP exceeded {max_iter} iterations"
                )));
            }
            let (w, z) = qr.project(&rows.a[p]);
            let r = qr.solve(&w);
            let zn2 = dot(&z, &z);
            let s_p = dot(&rows.a[p], &x) - rows.b[p];
            let t2 = if zn2.sqrt() > 1e-12 {
                s_p.max(0.0) / zn2
            } else {
                f64::INFINITY
            };
            let mut t1 = f64::INFINITY;
            let mut block = usize::MAX;
            for (k, (&rk, &lk)) in r.iter().zip(&lam).enumerate() {
                if rk > 1e-14 {
                    let ratio = lk / rk;
                    if ratio < t1 {
                        t1 = ratio;
                        block = k;
                    }
                }
            }

            if t1.is_infinite() && t2.is_infinite() {
                let mut cert = FarkasCertificate {
                    cut_weights: vec![0.0; q.cuts.len()],
                    lower_weights: vec![0.0; d],
                    upper_weights: vec![0.0; d],
                };
                let mut assign = |row: usize, weight: f64| {
                    let wgt = weight.max(0.0) / rows.scale[row];
                    match rows.kind[row] {
                        RowKind::Cut(j) => cert.cut_weights[j] += wgt,
                        RowKind::Lower(i) => cert.lower_weights[i] += wgt,
                        RowKind::Upper(i) => cert.upper_weights[i] += wgt,
                    }
                };
                assign(p, 1.0);
                for (k, &row) in active.iter().enumerate() {
                    assign(row, -r[k]);
                }
                let (mult, lower_m, upper_m) = unpack_multipliers(q, &rows, &active, &lam);
                return Ok(QpSolution {
                    status: QpStatus::Infeasible,
                    point: x,
                    multipliers: mult,
                    lower_multipliers: lower_m,
                    upper_multipliers: upper_m,
                    residual: 0.0,
                    certificate: Some(cert),
                    iterations,
                });
            }

            let t = t1.min(t2);
            if t2.is_finite() {
                crate::linalg::axpy(-t, &z, &mut x);
            }
            for (lk, rk) in lam.iter_mut().zip(&r) {
                *lk -= t * rk;
            }
            lam_p += t;

            if t2 <= t1 {
                active.push(p);
                lam.push(lam_p);
                is_active[p] = true;
                qr.push(w, z);
                break;
            }
            let row = active.remove(block);
            lam.remove(block);
            is_active[row] = false;
            qr = ActiveQr::rebuild(&rows, &active);
        }
    }

    for l in lam.iter_mut() {
        *l = l.max(0.0);
    }
    let (multipliers, lower_multipliers, upper_multipliers) = unpack_multipliers(q, &rows, &active, &lam);
    let mut sol = QpSolution {
        status: QpStatus::Optimal,
        point: x,
        multipliers,
        lower_multipliers,
        upper_multipliers,
        residual: 0.0,
        certificate: None,
        iterations,
    };
    sol.residual = kkt_residual(q, &sol);
    Ok(sol)
}

fn unpack_multipliers(q: &QpProblem, rows: &Rows, active: &[usize], lam: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = q.center.len();
    let mut cuts = vec![0.0; q.cuts.len()];
    let mut lower = vec![0.0; d];
    let mut upper = vec![0.0; d];
    for (&row, &l) in active.iter().zip(lam) {
        let v = l / rows.scale[row];
        match rows.kind[row] {
            RowKind::Cut(j) => cuts[j] += v,
            RowKind::Lower(i) => lower[i] += v,
            RowKind::Upper(i) => upper[i] += v,
        }
    }
    (cuts, lower, upper)
}

/// Max of stationarity, primal infeasibility and complementarity residuals.
pub fn kkt_residual(q: &QpProblem, s: &QpSolution) -> f64 {
    let d = q.center.len();
    let mut grad: Vec<f64> = s.point.iter().zip(&q.center).map(|(x, c)| x - c).collect();
    let mut worst: f64 = 0.0;
    for (c, &m) in q.cuts.iter().zip(&s.multipliers) {
        crate::linalg::axpy(m, &c.slope, &mut grad);
        let v = c.violation(&s.point);
        worst = worst.max(v).max((m * v).abs());
    }
    for i in 0..d {
        grad[i] += s.upper_multipliers[i] - s.lower_multipliers[i];
        if q.domain.upper[i].is_finite() {
            let v = s.point[i] - q.domain.upper[i];
            worst = worst.max(v).max((s.upper_multipliers[i] * v).abs());
        }
        if q.domain.lower[i].is_finite() {
            let v = q.domain.lower[i] - s.point[i];
            worst = worst.max(v).max((s.lower_multipliers[i] * v).abs());
        }
    }
    worst.max(crate::linalg::norm_inf(&grad))
}

// ---------------------------------------------------------------------------
// Epigraph LP

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub pieces: Vec<AffineMinorant>,
    pub cuts: Vec<Cut>,
    pub domain: BoxDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// `+inf` when the region is empty.
    pub value: f64,
    pub point: Vec<f64>,
    pub pivots: usize,
}

const LP_PIVOT_TOL: f64 = 1e-11;
const LP_COST_TOL: f64 = 1e-10;

/// Dense tableau `B^{-1} A` with bounded columns.
struct Tableau {
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Values of every column; basic entries are kept in sync.
    val: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    is_basic: Vec<bool>,
    pivots: usize,
}

enum SimplexEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn ncols(&self) -> usize {
        self.val.len()
    }

    fn run(&mut self, cost: &[f64], max_pivots: usize) -> Result<SimplexEnd> {
        let rows = self.t.len();
        loop {
            // Bland: first eligible column.
            let mut enter = None;
            for j in 0..self.ncols() {
                if self.is_basic[j] || self.hi[j] - self.lo[j] <= 0.0 {
                    continue;
                }
                let mut dj = cost[j];
                for i in 0..rows {
                    let c = cost[self.basis[i]];
                    if c != 0.0 {
                        dj -= c * self.t[i][j];
                    }
                }
                let at_lower = self.val[j] <= self.lo[j];
                let at_upper = self.val[j] >= self.hi[j];
                if dj < -LP_COST_TOL && !at_upper {
                    enter = Some((j, 1.0));
                    break;
                }
                if dj > LP_COST_TOL && !at_lower {
                    enter = Some((j, -1.0));
                    break;
                }
            }
            let Some((j, dir)) = enter else {
                return Ok(SimplexEnd::Optimal);
            };

            self.pivots += 1;
            if self.pivots > max_pivots {
                return Err(Error::SubproblemFailure(format!(
                    "epigraph LP exceeded {max_pivots} pivots"
                )));
            }

            // Ratio test; ties go to the lowest basic column index.
            let mut step = self.hi[j] - self.lo[j];
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..rows {
                let rate = -self.t[i][j] * dir;
                if rate.abs() <= LP_PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let (limit, to_upper) = if rate < 0.0 {
                    (((self.val[b] - self.lo[b]) / -rate).max(0.0), false)
                } else if self.hi[b].is_finite() {
                    (((self.hi[b] - self.val[b]) / rate).max(0.0), true)
                } else {
                    continue;
                };
                let better = match leave {
                    None => limit < step,
                    Some((li, _)) => limit < step || (limit == step && b < self.basis[li]),
                };
                if better {
                    step = limit;
                    leave = Some((i, to_upper));
                }
            }
            if step.is_infinite() {
                return Ok(SimplexEnd::Unbounded);
            }

            self.val[j] += dir * step;
            for i in 0..rows {
                let b = self.basis[i];
                self.val[b] -= self.t[i][j] * dir * step;
            }
            match leave {
                None => {
                    // Bound flip.
                    self.val[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
                }
                Some((r, to_upper)) => {
                    let out = self.basis[r];
                    self.val[out] = if to_upper { self.hi[out] } else { self.lo[out] };
                    self.pivot(r, j);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.t[r][j];
        for v in self.t[r].iter_mut() {
            *v /= piv;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
            }
        }
        self.is_basic[self.basis[r]] = false;
        self.basis[r] = j;
        self.is_basic[j] = true;
    }
}

/// `min_x max_j pieces_j(x)` over `{cuts} ∩ box`, solved as
/// `min t s.t. pieces_j(x) <= t`.
pub fn solve_epigraph_lp(p: &LpProblem) -> Result<LpSolution> {
    let d = p.domain.dim();
    p.domain.require_bounded("the epigraph LP")?;
    if p.pieces.is_empty() {
        return Err(Error::InvalidParameter("epigraph LP needs at least one piece".into()));
    }
    for s in p.pieces.iter().map(|m| &m.slope).chain(p.cuts.iter().map(|c| &c.slope)) {
        if s.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: s.len(),
            });
        }
    }

    // Rows: (coefficients on x, coefficient on t, rhs).
    let mut rows: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    let mut t_lo = f64::NEG_INFINITY;
    let mut t_hi = f64::NEG_INFINITY;
    for m in &p.pieces {
        let (lo, hi) = p.domain.affine_range(&m.slope, m.intercept);
        t_lo = t_lo.max(lo);
        t_hi = t_hi.max(hi);
        rows.push((m.slope.clone(), -1.0, -m.intercept));
    }
    for c in &p.cuts {
        if c.slope.iter().all(|v| *v == 0.0) {
            if c.rhs < 0.0 {
                return Ok(infeasible_lp(d, 0));
            }
            continue;
        }
        rows.push((c.slope.clone(), 0.0, c.rhs));
    }
    for r in rows.iter_mut() {
        let s = r.0.iter().fold(r.1.abs(), |m, v| m.max(v.abs())).max(1e-300);
        r.0.iter_mut().for_each(|v| *v /= s);
        r.1 /= s;
        r.2 /= s;
    }

    let nrows = rows.len();
    let t_col = d;
    let slack0 = d + 1;
    let mut lo: Vec<f64> = p.domain.lower.clone();
    let mut hi: Vec<f64> = p.domain.upper.clone();
    lo.push(t_lo);
    hi.push(t_hi);
    lo.extend(std::iter::repeat(0.0).take(nrows));
    hi.extend(std::iter::repeat(f64::INFINITY).take(nrows));

    // Nonbasic start: x at its lower bound, t at its upper bound.
    let mut val = lo.clone();
    val[t_col] = t_hi;
    let residual: Vec<f64> = rows
        .iter()
        .map(|(a, tc, b)| b - dot(a, &val[..d]) - tc * val[t_col])
        .collect();
    let arts: Vec<usize> = (0..nrows).filter(|&i| residual[i] < 0.0).collect();
    let ncols = slack0 + nrows + arts.len();
    lo.extend(std::iter::repeat(0.0).take(arts.len()));
    hi.extend(std::iter::repeat(f64::INFINITY).take(arts.len()));
    val.resize(ncols, 0.0);

    let mut t = vec![vec![0.0; ncols]; nrows];
    let mut basis = vec![0; nrows];
    let mut art_of_row = vec![None; nrows];
    for (k, &i) in arts.iter().enumerate() {
        art_of_row[i] = Some(slack0 + nrows + k);
    }
    for (i, (a, tc, _)) in rows.iter().enumerate() {
        let sign = if art_of_row[i].is_some() { -1.0 } else { 1.0 };
        for (c, v) in a.iter().enumerate() {
            t[i][c] = sign * v;
        }
        t[i][t_col] = sign * tc;
        t[i][slack0 + i] = sign;
        match art_of_row[i] {
            Some(col) => {
                t[i][col] = 1.0;
                basis[i] = col;
                val[col] = -residual[i];
            }
            None => {
                basis[i] = slack0 + i;
                val[slack0 + i] = residual[i];
            }
        }
    }
    let mut is_basic = vec![false; ncols];
    for &b in &basis {
        is_basic[b] = true;
    }
    let mut tab = Tableau {
        t,
        basis,
        val,
        lo,
        hi,
        is_basic,
        pivots: 0,
    };
    let max_pivots = 200 * (ncols + nrows) + 1000;

    if !arts.is_empty() {
        let mut cost = vec![0.0; ncols];
        for c in cost.iter_mut().skip(slack0 + nrows) {
            *c = 1.0;
        }
        tab.run(&cost, max_pivots)?;
        let infeas: f64 = tab.val[slack0 + nrows..].iter().sum();
        let scale = 1.0 + rows.iter().fold(0.0f64, |m, r| m.max(r.2.abs()));
        if infeas > 1e-9 * scale {
            return Ok(infeasible_lp(d, tab.pivots));
        }
        for c in slack0 + nrows..ncols {
            tab.hi[c] = 0.0;
            tab.val[c] = tab.val[c].min(0.0);
        }
    }

    let mut cost = vec![0.0; ncols];
    cost[t_col] = 1.0;
    match tab.run(&cost, max_pivots)? {
        SimplexEnd::Optimal => {}
        SimplexEnd::Unbounded => return Err(Error::SubproblemFailure("epigraph LP reported unbounded".into())),
    }
    let point = p.domain.clamp(&tab.val[..d]);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value: tab.val[t_col],
        point,
        pivots: tab.pivots,
    })
}

fn infeasible_lp(d: usize, pivots: usize) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        value: f64::INFINITY,
        point: vec![f64::NAN; d],
        pivots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qp(center: Vec<f64>, cuts: Vec<Cut>, domain: BoxDomain) -> QpSolution {
        solve_nearest_point(&QpProblem { center, cuts, domain }).unwrap()
    }

    #[test]
    fn halfspace_projection() {
        let s = qp(
            vec![0.0, 0.0],
            vec![Cut::new(vec![-1.0, -1.0], -1.0)],
            BoxDomain::unbounded(2),
        );
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.point[0] - 0.5).abs() < 1e-12 && (s.point[1] - 0.5).abs() < 1e-12);
        assert!((s.multipliers[0] - 0.5).abs() < 1e-12);
        assert!(s.residual < 1e-10);
    }

    #[test]
    fn no_cuts_is_identity() {
        let c = vec![3.0, -7.5, 1e3];
        let s = qp(c.clone(), vec![], BoxDomain::unbounded(3));
        assert_eq!(s.point, c);
        assert_eq!(s.iterations, 0);
    }

    #[test]
    fn empty_interval_is_infeasible() {
        let q = QpProblem {
            center: vec![0.3],
            cuts: vec![Cut::new(vec![1.0], 0.0), Cut::new(vec![-1.0], -1.0)],
            domain: BoxDomain::unbounded(1),
        };
        let s = solve_nearest_point(&q).unwrap();
        assert_eq!(s.status, QpStatus::Infeasible);
        let cert = s.certificate.unwrap();
        assert!(cert.cut_weights.iter().all(|w| *w >= 0.0));
        let (a, b) = cert.combination(&q);
        assert!(a[0].abs() < 1e-12);
        assert!(b < 0.0);
    }

    #[test]
    fn box_and_cut_together() {
        // Project (2, 2) onto x1 + x2 <= 1 with x in [0, 0.25] x [0, 10].
        let s = qp(
            vec![2.0, 2.0],
            vec![Cut::new(vec![1.0, 1.0], 1.0)],
            BoxDomain::new(vec![0.0, 0.0], vec![0.25, 10.0]).unwrap(),
        );
        assert!((s.point[0] - 0.25).abs() < 1e-12);
        assert!((s.point[1] - 0.75).abs() < 1e-12);
        assert!(s.residual < 1e-10);
    }

    #[test]
    fn pinned_coordinate() {
        let s = qp(
            vec![0.0, 4.0],
            vec![Cut::new(vec![1.0, 1.0], 2.0)],
            BoxDomain::new(vec![f64::NEG_INFINITY, 1.0], vec![f64::INFINITY, 1.0]).unwrap(),
        );
        assert!((s.point[1] - 1.0).abs() < 1e-12);
        assert!(s.point[0].abs() < 1e-12);
    }

    #[test]
    fn lp_abs_value() {
        let p = LpProblem {
            pieces: vec![
                AffineMinorant {
                    slope: vec![1.0],
                    intercept: 0.0,
                },
                AffineMinorant {
                    slope: vec![-1.0],
                    intercept: 0.0,
                },
            ],
            cuts: vec![],
            domain: BoxDomain::cube(1, -1.0, 1.0).unwrap(),
        };
        let s = solve_epigraph_lp(&p).unwrap();
        assert!(s.value.abs() < 1e-12 && s.point[0].abs() < 1e-12);
    }

    #[test]
    fn lp_single_piece() {
        let p = LpProblem {
            pieces: vec![AffineMinorant {
                slope: vec![2.0],
                intercept: -1.0,
            }],
            cuts: vec![],
            domain: BoxDomain::cube(1, -1.0, 1.0).unwrap(),
        };
        let s = solve_epigraph_lp(&p).unwrap();
        assert!((s.value + 3.0).abs() < 1e-12);
        assert!((s.point[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn lp_with_cut_and_infeasible() {
        let pieces = vec![AffineMinorant {
            slope: vec![1.0, 1.0],
            intercept: 0.0,
        }];
        let domain = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let s = solve_epigraph_lp(&LpProblem {
            pieces: pieces.clone(),
            cuts: vec![Cut::new(vec![-1.0, 0.0], -0.5)],
            domain: domain.clone(),
        })
        .unwrap();
        assert!((s.value + 0.5).abs() < 1e-12);

        let s = solve_epigraph_lp(&LpProblem {
            pieces,
            cuts: vec![Cut::new(vec![1.0, 0.0], -2.0)],
            domain,
        })
        .unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
        assert_eq!(s.value, f64::INFINITY);
    }

    #[test]
    fn lp_rejects_unbounded_box() {
        let p = LpProblem {
            pieces: vec![AffineMinorant {
                slope: vec![1.0],
                intercept: 0.0,
            }],
            cuts: vec![],
            domain: BoxDomain::unbounded(1),
        };
        assert!(matches!(solve_epigraph_lp(&p), Err(Error::UnboundedDomain(_))));
    }

    #[test]
    fn box_validation() {
        assert!(BoxDomain::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoxDomain::new(vec![f64::INFINITY], vec![f64::INFINITY]).is_err());
        let b = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        assert!((b.diameter() - 8f64.sqrt()).abs() < 1e-15);
        assert_eq!(b.affine_range(&[1.0, -2.0], 0.5), (-2.5, 3.5));
    }
}
