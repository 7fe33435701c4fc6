//! First-order oracles, the level composite and affine minorants.
//!
//! Every algorithm in the crate touches the problem only through
//! [`ConstrainedProblem::evaluate`], which queries each oracle exactly once and
//! bumps its counters. One call counts as one function evaluation plus one
//! gradient evaluation.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geomsub::{BoxDomain, Cut};
use crate::linalg::{all_finite, dot};

/// A convex function with value and subgradient access.
pub trait ConvexFunction: Send + Sync {
    fn dim(&self) -> usize;

    /// Returns `(h(x), h'(x))` for some subgradient `h'(x)`.
    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Counted wrapper around a [`ConvexFunction`].
pub struct Oracle {
    name: String,
    func: Arc<dyn ConvexFunction>,
    counters: Arc<Counters>,
}

#[derive(Debug, Default)]
struct Counters {
    fevals: AtomicU64,
    gevals: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleCounts {
    pub fevals: u64,
    pub gevals: u64,
}

impl std::ops::Sub for OracleCounts {
    type Output = OracleCounts;
    fn sub(self, rhs: Self) -> Self {
        OracleCounts {
            fevals: self.fevals - rhs.fevals,
            gevals: self.gevals - rhs.gevals,
        }
    }
}

impl Oracle {
    pub fn new(name: impl Into<String>, func: impl ConvexFunction + 'static) -> Self {
        Self::from_arc(name, Arc::new(func))
    }

    pub fn from_arc(name: impl Into<String>, func: Arc<dyn ConvexFunction>) -> Self {
        Oracle {
            name: name.into(),
            func,
            counters: Arc::default(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.func.dim()
    }

    pub fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        self.counters.fevals.fetch_add(1, Ordering::Relaxed);
        self.counters.gevals.fetch_add(1, Ordering::Relaxed);
        let (value, grad) = self.func.eval(x)?;
        if !value.is_finite() || !all_finite(&grad) {
            return Err(Error::OracleFailure {
                name: self.name.clone(),
                detail: format!("non-finite output (value {value})"),
            });
        }
        if grad.len() != x.len() {
            return Err(Error::OracleFailure {
                name: self.name.clone(),
                detail: format!("subgradient has length {}, expected {}", grad.len(), x.len()),
            });
        }
        Ok((value, grad))
    }

    pub fn counts(&self) -> OracleCounts {
        OracleCounts {
            fevals: self.counters.fevals.load(Ordering::Relaxed),
            gevals: self.counters.gevals.load(Ordering::Relaxed),
        }
    }

    pub fn reset_counts(&self) {
        self.counters.fevals.store(0, Ordering::Relaxed);
        self.counters.gevals.store(0, Ordering::Relaxed);
    }

    /// Same function and the same counters.
    pub fn shared_view(&self) -> Oracle {
        Oracle {
            name: self.name.clone(),
            func: Arc::clone(&self.func),
            counters: Arc::clone(&self.counters),
        }
    }

    /// Same function, zeroed counters.
    pub fn fresh_copy(&self) -> Oracle {
        Oracle::from_arc(self.name.clone(), Arc::clone(&self.func))
    }
}

impl fmt::Debug for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Oracle")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("counts", &self.counts())
            .finish()
    }
}

/// `x -> slope . x + intercept`
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMinorant {
    pub slope: Vec<f64>,
    pub intercept: f64,
}

impl AffineMinorant {
    /// Tangent plane `h(y) + <s, x - y>`.
    pub fn tangent(value: f64, subgradient: Vec<f64>, at: &[f64]) -> Self {
        let intercept = value - dot(&subgradient, at);
        AffineMinorant {
            slope: subgradient,
            intercept,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        dot(&self.slope, x) + self.intercept
    }

    /// The half-space `{x : self(x) <= level}`.
    pub fn level_cut(&self, level: f64) -> Cut {
        Cut::new(self.slope.clone(), level - self.intercept)
    }

    pub fn shifted(mut self, delta: f64) -> Self {
        self.intercept += delta;
        self
    }
}

/// Builds the tangent minorant of `h` at `y`.
pub fn minorant_at(h: &Oracle, y: &[f64]) -> Result<AffineMinorant> {
    let (value, grad) = h.eval(y)?;
    Ok(AffineMinorant::tangent(value, grad, y))
}

/// Value of `v(x, eta)` with a subgradient of the attaining piece.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeEval {
    pub value: f64,
    /// 0 is the objective piece, `i >= 1` is constraint `i`.
    pub active_index: usize,
    pub subgradient: Vec<f64>,
    pub objective: f64,
    pub constraints: Vec<f64>,
    pub eta: f64,
}

impl CompositeEval {
    /// `||[g(x)]_+||_inf`, zero without constraints.
    pub fn violation(&self) -> f64 {
        self.constraints.iter().fold(0.0, |m, &g| m.max(g))
    }
}

/// Raw oracle output at one point: values and subgradients of every piece.
#[derive(Debug, Clone)]
pub struct PointEval {
    pub point: Vec<f64>,
    pub values: Vec<f64>,
    pub subgradients: Vec<Vec<f64>>,
}

impl PointEval {
    pub fn objective(&self) -> f64 {
        self.values[0]
    }

    pub fn constraints(&self) -> &[f64] {
        &self.values[1..]
    }

    pub fn violation(&self) -> f64 {
        self.constraints().iter().fold(0.0, |m, &g| m.max(g))
    }

    /// `v(x, eta)`; ties go to the lowest piece index.
    pub fn composite_value(&self, eta: f64) -> (f64, usize) {
        let mut best = (self.values[0] - eta, 0);
        for (i, &g) in self.values.iter().enumerate().skip(1) {
            if g > best.0 {
                best = (g, i);
            }
        }
        best
    }

    pub fn composite(&self, eta: f64) -> CompositeEval {
        let (value, active_index) = self.composite_value(eta);
        CompositeEval {
            value,
            active_index,
            subgradient: self.subgradients[active_index].clone(),
            objective: self.values[0],
            constraints: self.values[1..].to_vec(),
            eta,
        }
    }

    /// Pieces of `v_l(., point, eta)`: objective tangent minus `eta`, then the
    /// constraint tangents.
    pub fn minorants(&self, eta: f64) -> Vec<AffineMinorant> {
        self.values
            .iter()
            .zip(&self.subgradients)
            .enumerate()
            .map(|(i, (&v, s))| {
                let m = AffineMinorant::tangent(v, s.clone(), &self.point);
                if i == 0 {
                    m.shifted(-eta)
                } else {
                    m
                }
            })
            .collect()
    }
}

/// `min f(x) s.t. g_i(x) <= 0, x in box`.
#[derive(Debug)]
pub struct ConstrainedProblem {
    pub name: String,
    pub objective: Oracle,
    pub constraints: Vec<Oracle>,
    pub domain: BoxDomain,
    pub known_fstar: Option<f64>,
    /// Lagrange multipliers of the constraints at the optimum, for fixtures.
    pub known_multipliers: Option<Vec<f64>>,
    /// A known minimizer, for fixtures.
    pub known_solution: Option<Vec<f64>>,
}

impl ConstrainedProblem {
    pub fn new(
        name: impl Into<String>,
        objective: Oracle,
        constraints: Vec<Oracle>,
        domain: BoxDomain,
    ) -> Result<Self> {
        let d = objective.dim();
        if d == 0 {
            return Err(Error::InvalidParameter("problem dimension must be positive".into()));
        }
        for c in &constraints {
            if c.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: c.dim(),
                });
            }
        }
        if domain.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: domain.dim(),
            });
        }
        Ok(ConstrainedProblem {
            name: name.into(),
            objective,
            constraints,
            domain,
            known_fstar: None,
            known_multipliers: None,
            known_solution: None,
        })
    }

    pub fn with_fstar(mut self, fstar: f64) -> Self {
        self.known_fstar = Some(fstar);
        self
    }

    pub fn with_multipliers(mut self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.constraints.len() {
            return Err(Error::DimensionMismatch {
                expected: self.constraints.len(),
                got: y.len(),
            });
        }
        if y.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidParameter("multipliers must be non-negative".into()));
        }
        self.known_multipliers = Some(y);
        Ok(self)
    }

    pub fn with_solution(mut self, x: Vec<f64>) -> Self {
        self.known_solution = Some(x);
        self
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Queries every oracle once at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<PointEval> {
        let m = self.constraints.len();
        let mut values = Vec::with_capacity(m + 1);
        let mut subgradients = Vec::with_capacity(m + 1);
        for oracle in std::iter::once(&self.objective).chain(&self.constraints) {
            let (v, g) = oracle.eval(x)?;
            values.push(v);
            subgradients.push(g);
        }
        Ok(PointEval {
            point: x.to_vec(),
            values,
            subgradients,
        })
    }

    /// Summed counters over the objective and all constraints.
    pub fn counts(&self) -> OracleCounts {
        std::iter::once(&self.objective)
            .chain(&self.constraints)
            .fold(OracleCounts::default(), |acc, o| {
                let c = o.counts();
                OracleCounts {
                    fevals: acc.fevals + c.fevals,
                    gevals: acc.gevals + c.gevals,
                }
            })
    }

    pub fn reset_counts(&self) {
        self.objective.reset_counts();
        for c in &self.constraints {
            c.reset_counts();
        }
    }

    /// Shares the oracle functions, with zeroed counters.
    pub fn fresh_copy(&self) -> ConstrainedProblem {
        ConstrainedProblem {
            name: self.name.clone(),
            objective: self.objective.fresh_copy(),
            constraints: self.constraints.iter().map(Oracle::fresh_copy).collect(),
            domain: self.domain.clone(),
            known_fstar: self.known_fstar,
            known_multipliers: self.known_multipliers.clone(),
            known_solution: self.known_solution.clone(),
        }
    }

    /// Same objective and domain, no functional constraints. Objective calls
    /// made through the view are charged to this problem's counters.
    pub fn objective_only(&self) -> ConstrainedProblem {
        ConstrainedProblem {
            name: format!("{}-objective", self.name),
            objective: self.objective.shared_view(),
            constraints: Vec::new(),
            domain: self.domain.clone(),
            known_fstar: None,
            known_multipliers: None,
            known_solution: None,
        }
    }
}

pub fn eval_composite(p: &ConstrainedProblem, x: &[f64], eta: f64) -> Result<CompositeEval> {
    Ok(p.evaluate(x)?.composite(eta))
}

/// The `m + 1` pieces of `v_l(., center, eta)`.
pub fn composite_minorant(p: &ConstrainedProblem, center: &[f64], eta: f64) -> Result<Vec<AffineMinorant>> {
    Ok(p.evaluate(center)?.minorants(eta))
}

/// `max_j pieces_j(x)`
pub fn max_of_pieces(pieces: &[AffineMinorant], x: &[f64]) -> f64 {
    pieces.iter().map(|m| m.value(x)).fold(f64::NEG_INFINITY, f64::max)
}

// ---------------------------------------------------------------------------
// Elementary functions used by fixtures and generators.

/// `0.5 x^T Q x + c^T x + d`, with `Q` symmetric PSD stored row-major.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub q: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
}

impl Quadratic {
    pub fn new(q: Vec<f64>, c: Vec<f64>, d: f64) -> Self {
        assert_eq!(q.len(), c.len() * c.len(), "Q must be n x n");
        Quadratic { q, c, d }
    }

    /// `0.5 * diag . x^2 + c . x + d`
    pub fn diagonal(diag: &[f64], c: Vec<f64>, d: f64) -> Self {
        let n = diag.len();
        let mut q = vec![0.0; n * n];
        for (i, &v) in diag.iter().enumerate() {
            q[i * n + i] = v;
        }
        Quadratic::new(q, c, d)
    }
}

impl ConvexFunction for Quadratic {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = self.c.len();
        let qx = crate::linalg::matvec(&self.q, n, n, x);
        let value = 0.5 * dot(&qx, x) + dot(&self.c, x) + self.d;
        let grad = qx.iter().zip(&self.c).map(|(a, b)| a + b).collect();
        Ok((value, grad))
    }
}

/// `a . x + b`
#[derive(Debug, Clone)]
pub struct Affine {
    pub a: Vec<f64>,
    pub b: f64,
}

impl ConvexFunction for Affine {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((dot(&self.a, x) + self.b, self.a.clone()))
    }
}

/// `sum_i w_i |x_i - c_i|`; subgradient 0 at kinks.
#[derive(Debug, Clone)]
pub struct WeightedL1 {
    pub weights: Vec<f64>,
    pub center: Vec<f64>,
}

impl ConvexFunction for WeightedL1 {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut value = 0.0;
        let grad = x
            .iter()
            .zip(&self.center)
            .zip(&self.weights)
            .map(|((xi, ci), wi)| {
                let r = xi - ci;
                value += wi * r.abs();
                if r > 0.0 {
                    *wi
                } else if r < 0.0 {
                    -*wi
                } else {
                    0.0
                }
            })
            .collect();
        Ok((value, grad))
    }
}

/// Adapts a closure `x -> (value, subgradient)`.
pub struct FnFunction<F> {
    dim: usize,
    f: F,
}

impl<F> FnFunction<F>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnFunction { dim, f }
    }
}

impl<F> ConvexFunction for FnFunction<F>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.f)(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square() -> Oracle {
        Oracle::new("x^2", Quadratic::diagonal(&[2.0], vec![0.0], 0.0))
    }

    fn toy_problem() -> ConstrainedProblem {
        let g = Oracle::new("x-1", Affine { a: vec![1.0], b: -1.0 });
        ConstrainedProblem::new("toy", square(), vec![g], BoxDomain::unbounded(1)).unwrap()
    }

    #[test]
    fn composite_examples() {
        let p = toy_problem();
        let e = eval_composite(&p, &[2.0], 0.0).unwrap();
        assert_eq!(e.value, 4.0);
        assert_eq!(e.active_index, 0);
        assert_eq!(e.subgradient, vec![4.0]);

        let e = eval_composite(&p, &[0.0], 0.0).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.active_index, 0);
        assert_eq!(p.objective.counts(), OracleCounts { fevals: 2, gevals: 2 });
        assert_eq!(p.constraints[0].counts(), OracleCounts { fevals: 2, gevals: 2 });
    }

    #[test]
    fn ties_pick_lowest_index() {
        // f(1) - 0 = 1 = g(1) = 1 * 1 + 0
        let g = Oracle::new("x", Affine { a: vec![1.0], b: 0.0 });
        let p = ConstrainedProblem::new("tie", square(), vec![g], BoxDomain::unbounded(1)).unwrap();
        let e = eval_composite(&p, &[1.0], 0.0).unwrap();
        assert_eq!(e.active_index, 0);
    }

    #[test]
    fn minorant_examples() {
        let m = minorant_at(&square(), &[1.0]).unwrap();
        assert_eq!(m.slope, vec![2.0]);
        assert_eq!(m.intercept, -1.0);

        let lin = Oracle::new(
            "lin",
            Affine {
                a: vec![3.0, -2.0],
                b: 0.5,
            },
        );
        let m = minorant_at(&lin, &[7.0, 11.0]).unwrap();
        assert_eq!(m.slope, vec![3.0, -2.0]);
        assert!((m.intercept - 0.5).abs() < 1e-12);

        let abs = Oracle::new(
            "|x|",
            WeightedL1 {
                weights: vec![1.0],
                center: vec![0.0],
            },
        );
        let m = minorant_at(&abs, &[0.0]).unwrap();
        assert!(m.slope[0].abs() <= 1.0);
        assert_eq!(m.intercept, 0.0);
        for i in -50..=50 {
            let x = i as f64 / 10.0;
            assert!(m.value(&[x]) <= x.abs() + 1e-12);
        }
    }

    #[test]
    fn composite_minorant_pieces() {
        let p = toy_problem();
        let pieces = composite_minorant(&p, &[1.0], 0.0).unwrap();
        assert_eq!(pieces.len(), 2);
        assert_eq!((pieces[0].slope[0], pieces[0].intercept), (2.0, -1.0));
        assert_eq!((pieces[1].slope[0], pieces[1].intercept), (1.0, -1.0));

        let shifted = composite_minorant(&p, &[1.0], 0.75).unwrap();
        assert!((shifted[0].intercept - (pieces[0].intercept - 0.75)).abs() < 1e-15);
        assert_eq!(shifted[1], pieces[1]);
    }

    #[test]
    fn non_finite_output_is_oracle_failure() {
        let bad = Oracle::new("bad", FnFunction::new(1, |_x: &[f64]| (f64::NAN, vec![0.0])));
        assert!(matches!(bad.eval(&[0.0]), Err(Error::OracleFailure { .. })));
        assert!(matches!(bad.eval(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn composite_is_one_lipschitz_in_eta() {
        let p = toy_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let x = [rng.gen_range(-3.0..3.0)];
            let eta = rng.gen_range(-5.0..5.0);
            let delta = rng.gen_range(0.0..4.0);
            let a = eval_composite(&p, &x, eta).unwrap().value;
            let b = eval_composite(&p, &x, eta + delta).unwrap().value;
            assert!(b <= a + 1e-12 && a - b <= delta + 1e-12);
        }
    }

    #[test]
    fn fresh_copy_resets_counters() {
        let p = toy_problem();
        p.evaluate(&[0.5]).unwrap();
        let q = p.fresh_copy();
        assert_eq!(q.counts(), OracleCounts::default());
        assert_eq!(p.counts(), OracleCounts { fevals: 2, gevals: 2 });
    }

    #[test]
    fn rejects_negative_multipliers() {
        assert!(toy_problem().with_multipliers(vec![-1.0]).is_err());
        assert!(toy_problem().with_multipliers(vec![1.0]).is_ok());
    }
}
