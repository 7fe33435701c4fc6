//! Random convex quadratically constrained quadratic programs on a box.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::geomsub::BoxDomain;
use crate::linalg::{dot, matvec, norm_sq};
use crate::oracle::{ConstrainedProblem, Oracle, Quadratic};

#[derive(Debug, Clone)]
pub struct QcqpInstance {
    pub n: usize,
    /// `Q_0` first, then one per constraint; row-major and PSD.
    pub q: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub d: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    /// Point with every constraint at most -1.
    pub slater_point: Vec<f64>,
}

impl QcqpInstance {
    pub const CONSTRAINT_OFFSET: f64 = 10.0;
    pub const BOX_HALF_WIDTH: f64 = 10.0;

    pub fn generate(seed: u64, n: usize, m: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("QCQP dimension must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slater: Vec<f64> = {
            let u = Uniform::new_inclusive(-5.0, 5.0);
            (0..n).map(|_| u.sample(&mut rng)).collect()
        };
        let mut qs = Vec::with_capacity(m + 1);
        let mut cs = Vec::with_capacity(m + 1);
        let mut ds = Vec::with_capacity(m + 1);
        for i in 0..=m {
            let g: Vec<f64> = (0..n * n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut q = vec![0.0; n * n];
            for r in 0..n {
                for c in r..n {
                    let v: f64 = (0..n).map(|k| g[k * n + r] * g[k * n + c]).sum::<f64>() / n as f64;
                    q[r * n + c] = v;
                    q[c * n + r] = v;
                }
            }
            let mut c: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let d = if i == 0 { 0.0 } else { Self::CONSTRAINT_OFFSET };
            if i > 0 {
                // Tilt the linear term so the planted point is strictly feasible.
                let qx = matvec(&q, n, n, &slater);
                let val = 0.5 * dot(&qx, &slater) + dot(&c, &slater) + d;
                let nx = norm_sq(&slater);
                if val > -1.0 && nx > 0.0 {
                    let step = (val + 1.0) / nx;
                    for (cj, xj) in c.iter_mut().zip(&slater) {
                        *cj -= step * xj;
                    }
                }
            }
            qs.push(q);
            cs.push(c);
            ds.push(d);
        }
        Ok(QcqpInstance {
            n,
            q: qs,
            c: cs,
            d: ds,
            lower: -Self::BOX_HALF_WIDTH,
            upper: Self::BOX_HALF_WIDTH,
            slater_point: slater,
        })
    }

    pub fn into_problem(self, name: String) -> Result<ConstrainedProblem> {
        let domain = BoxDomain::cube(self.n, self.lower, self.upper)?;
        let mut it = self
            .q
            .into_iter()
            .zip(self.c)
            .zip(self.d)
            .map(|((q, c), d)| Quadratic::new(q, c, d));
        let f = Oracle::new("f", it.next().expect("objective present"));
        let g = it
            .enumerate()
            .map(|(i, h)| Oracle::new(format!("g{}", i + 1), h))
            .collect();
        ConstrainedProblem::new(name, f, g, domain)
    }
}

/// `min 0.5 x^T Q_0 x + c_0^T x s.t. 0.5 x^T Q_i x + c_i^T x + 10 <= 0` on
/// `[-10, 10]^n`, with `Q_i = G^T G / n`. The optimal value is unknown.
pub fn gen_qcqp(seed: u64, n: usize, m: usize) -> Result<ConstrainedProblem> {
    QcqpInstance::generate(seed, n, m)?.into_problem(format!("qcqp-n{n}-m{m}-s{seed}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_slater_point() {
        let inst = QcqpInstance::generate(11, 8, 4).unwrap();
        assert_eq!(inst.d, vec![0.0, 10.0, 10.0, 10.0, 10.0]);
        let x = inst.slater_point.clone();
        let p = inst.into_problem("t".into()).unwrap();
        let ev = p.evaluate(&x).unwrap();
        assert!(ev.constraints().iter().all(|&g| g <= -1.0 + 1e-9));
        assert!(p.known_fstar.is_none());
    }

    #[test]
    fn deterministic() {
        let a = QcqpInstance::generate(5, 4, 2).unwrap();
        let b = QcqpInstance::generate(5, 4, 2).unwrap();
        assert_eq!(a.q, b.q);
        assert_eq!(a.c, b.c);
    }
}
