//! Feasibility of a Lyapunov-type LMI system posed as an eigenvalue penalty
//! over symmetric matrices.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geomsub::BoxDomain;
use crate::linalg::jacobi_eigen;
use crate::oracle::{ConstrainedProblem, ConvexFunction, Oracle};

const EIG_TOL: f64 = 1e-10;
const EIG_SWEEPS: usize = 100;
pub const MAX_LMI_ORDER: usize = 60;

/// Upper triangle of a symmetric row-major `q x q` matrix, row by row, with
/// off-diagonal entries scaled by `sqrt(2)` so that flattened dot products
/// equal Frobenius inner products.
pub fn sym_flatten(m: &[f64], q: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(q * (q + 1) / 2);
    for i in 0..q {
        out.push(m[i * q + i]);
        for j in i + 1..q {
            out.push(m[i * q + j] * std::f64::consts::SQRT_2);
        }
    }
    out
}

/// Inverse of [`sym_flatten`].
pub fn sym_unflatten(v: &[f64], q: usize) -> Vec<f64> {
    let mut m = vec![0.0; q * q];
    let mut k = 0;
    for i in 0..q {
        m[i * q + i] = v[k];
        k += 1;
        for j in i + 1..q {
            let x = v[k] / std::f64::consts::SQRT_2;
            m[i * q + j] = x;
            m[j * q + i] = x;
            k += 1;
        }
    }
    m
}

fn matmul(a: &[f64], b: &[f64], q: usize) -> Vec<f64> {
    let mut c = vec![0.0; q * q];
    for i in 0..q {
        for k in 0..q {
            let aik = a[i * q + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..q {
                c[i * q + j] += aik * b[k * q + j];
            }
        }
    }
    c
}

fn transpose(a: &[f64], q: usize) -> Vec<f64> {
    let mut t = vec![0.0; q * q];
    for i in 0..q {
        for j in 0..q {
            t[j * q + i] = a[i * q + j];
        }
    }
    t
}

#[derive(Debug, Clone)]
pub struct LmiInstance {
    pub q: usize,
    /// Row-major `q x q` matrices `A_i`.
    pub a: Vec<Vec<f64>>,
    /// Flattened feasible point.
    pub planted: Vec<f64>,
}

impl LmiInstance {
    pub fn generate(seed: u64, q: usize, k: usize) -> Result<Self> {
        if q == 0 || q > MAX_LMI_ORDER {
            return Err(Error::InvalidParameter(format!(
                "LMI order must be in 1..={MAX_LMI_ORDER}, got {q}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gauss =
            |r: usize, c: usize| -> DMatrix<f64> { DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng)) };
        let f = gauss(q, q) / (q as f64).sqrt() + DMatrix::identity(q, q) * 2.0;
        let f_inv = f
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SubproblemFailure("singular LMI transform".into()))?;
        let mut a = Vec::with_capacity(k);
        for _ in 0..k {
            let b = gauss(q, q);
            let c = gauss(q, q);
            let m = -(&b * b.transpose()) + &c - c.transpose();
            let ai = &f_inv * m * &f;
            // Positive scaling keeps the planted point feasible.
            let ai = &ai / ai.norm();
            // nalgebra is column-major; store row-major.
            a.push(ai.transpose().as_slice().to_vec());
        }
        let ftf = f.transpose() * &f;
        let lmin = ftf.clone().symmetric_eigen().eigenvalues.min();
        let x = ftf * (1.1 / lmin);
        let planted = sym_flatten(x.transpose().as_slice(), q);
        Ok(LmiInstance { q, a, planted })
    }
}

/// `[lambda_max(I - X)]_+ + sum_i [lambda_max(A_i^T X + X A_i)]_+` on the
/// flattened symmetric variable.
pub struct LmiObjective {
    q: usize,
    a: Vec<Vec<f64>>,
    a_t: Vec<Vec<f64>>,
}

/// Largest eigenvalue and its unit eigenvector.
fn top_eigen(m: &[f64], q: usize) -> Result<(f64, Vec<f64>)> {
    let (vals, vecs) = jacobi_eigen(m, q, EIG_TOL, EIG_SWEEPS).ok_or_else(|| Error::OracleFailure {
        name: "lmi".into(),
        detail: "Jacobi eigensolver did not converge".into(),
    })?;
    let mut j = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v > vals[j] {
            j = i;
        }
    }
    let v = (0..q).map(|r| vecs[r * q + j]).collect();
    Ok((vals[j], v))
}

impl ConvexFunction for LmiObjective {
    fn dim(&self) -> usize {
        self.q * (self.q + 1) / 2
    }

    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let q = self.q;
        let xm = sym_unflatten(x, q);
        let mut value = 0.0;
        let mut grad = vec![0.0; q * q];

        let mut m = xm.iter().map(|v| -v).collect::<Vec<_>>();
        for i in 0..q {
            m[i * q + i] += 1.0;
        }
        let (lam, v) = top_eigen(&m, q)?;
        if lam > 0.0 {
            value += lam;
            for r in 0..q {
                for c in 0..q {
                    grad[r * q + c] -= v[r] * v[c];
                }
            }
        }

        for (a, a_t) in self.a.iter().zip(&self.a_t) {
            let ax = matmul(a_t, &xm, q);
            let mut m = ax.clone();
            // A^T X + X A = ax + ax^T since X is symmetric
            for r in 0..q {
                for c in 0..q {
                    m[r * q + c] += ax[c * q + r];
                }
            }
            let (lam, v) = top_eigen(&m, q)?;
            if lam > 0.0 {
                value += lam;
                // A v v^T + v v^T A^T
                let av: Vec<f64> = (0..q).map(|r| (0..q).map(|c| a[r * q + c] * v[c]).sum()).collect();
                for r in 0..q {
                    for c in 0..q {
                        grad[r * q + c] += av[r] * v[c] + v[r] * av[c];
                    }
                }
            }
        }
        Ok((value, sym_flatten(&grad, q)))
    }
}

/// Objective oracle for the given `A_i`.
pub fn lmi_objective(q: usize, a: Vec<Vec<f64>>) -> Result<Oracle> {
    if a.iter().any(|m| m.len() != q * q) {
        return Err(Error::InvalidParameter(format!("every A_i must be {q} x {q}")));
    }
    let a_t = a.iter().map(|m| transpose(m, q)).collect();
    Ok(Oracle::new("lmi", LmiObjective { q, a, a_t }))
}

/// Generated instance on `q x q` symmetric matrices with `k` Lyapunov
/// constraints. Unconstrained in the sense of the composite (`m = 0`).
pub fn gen_lmi(seed: u64, q: usize, k: usize) -> Result<ConstrainedProblem> {
    let inst = LmiInstance::generate(seed, q, k)?;
    let n = q * (q + 1) / 2;
    let f = lmi_objective(q, inst.a)?;
    Ok(
        ConstrainedProblem::new(format!("lmi-q{q}-k{k}-s{seed}"), f, vec![], BoxDomain::unbounded(n))?
            .with_fstar(0.0)
            .with_solution(inst.planted),
    )
}
