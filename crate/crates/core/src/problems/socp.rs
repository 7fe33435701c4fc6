//! KKT residual of a second-order cone program, posed as a distance penalty
//! with linear equality constraints. The optimal value is 0 by construction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geomsub::BoxDomain;
use crate::linalg::{dot, matvec, matvec_t, norm};
use crate::oracle::{Affine, ConstrainedProblem, ConvexFunction, Oracle};

/// Projection of `(t, w)` onto `{||w|| <= t}`.
pub fn soc_project(block: &[f64]) -> Vec<f64> {
    let t = block[0];
    let w = &block[1..];
    let nw = norm(w);
    if nw <= t {
        block.to_vec()
    } else if nw <= -t {
        vec![0.0; block.len()]
    } else {
        let a = 0.5 * (t + nw);
        let mut out = Vec::with_capacity(block.len());
        out.push(a);
        out.extend(w.iter().map(|v| a * v / nw));
        out
    }
}

fn cone_project(u: &[f64], blocks: &[(usize, usize)]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    for &(off, size) in blocks {
        out[off..off + size].copy_from_slice(&soc_project(&u[off..off + size]));
    }
    out
}

/// Distance to the product cone and its gradient (zero inside the cone).
fn cone_distance(u: &[f64], blocks: &[(usize, usize)]) -> (f64, Vec<f64>) {
    let pu = cone_project(u, blocks);
    let r: Vec<f64> = u.iter().zip(&pu).map(|(a, b)| a - b).collect();
    let d = norm(&r);
    if d == 0.0 {
        (0.0, vec![0.0; u.len()])
    } else {
        (d, r.iter().map(|v| v / d).collect())
    }
}

#[derive(Debug, Clone)]
pub struct SocpKktInstance {
    /// Row-major `p x q`.
    pub a: Vec<f64>,
    pub p: usize,
    pub q: usize,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// `(offset, size)` of each cone; the first entry of a block is its apex
    /// coordinate.
    pub blocks: Vec<(usize, usize)>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub s: Vec<f64>,
}

impl SocpKktInstance {
    pub fn dim(&self) -> usize {
        self.q + self.p + 1
    }

    /// The planted KKT point `[u; v; 1]`.
    pub fn planted(&self) -> Vec<f64> {
        let mut x = self.u.clone();
        x.extend_from_slice(&self.v);
        x.push(1.0);
        x
    }

    /// `s(x) = c x_last - A^T v`
    pub fn slack(&self, x: &[f64]) -> Vec<f64> {
        let v = &x[self.q..self.q + self.p];
        let last = x[self.q + self.p];
        let atv = matvec_t(&self.a, self.p, self.q, v);
        self.c.iter().zip(&atv).map(|(c, w)| c * last - w).collect()
    }
}

struct KktObjective {
    inst: SocpKktInstance,
}

impl ConvexFunction for KktObjective {
    fn dim(&self) -> usize {
        self.inst.dim()
    }

    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let inst = &self.inst;
        let (q, p) = (inst.q, inst.p);
        let (du, gu) = cone_distance(&x[..q], &inst.blocks);
        let s = inst.slack(x);
        let (ds, gs) = cone_distance(&s, &inst.blocks);
        let mut grad = Vec::with_capacity(x.len());
        grad.extend_from_slice(&gu);
        // ds/dv = -A gs, ds/dx_last = c . gs
        grad.extend(matvec(&inst.a, p, q, &gs).iter().map(|v| -v));
        grad.push(dot(&inst.c, &gs));
        Ok((du + ds, grad))
    }
}

/// Random instance with `q` cone variables split into `cones` equal blocks
/// and `p` equality rows. Variables are `[u; v; 1]`, the last one pinned by
/// the box.
pub fn gen_socp_kkt(seed: u64, q: usize, p: usize, cones: usize) -> Result<ConstrainedProblem> {
    if cones == 0 || q % cones != 0 || q / cones < 2 {
        return Err(Error::InvalidParameter(format!(
            "cannot split {q} variables into {cones} cones of size >= 2"
        )));
    }
    if p == 0 {
        return Err(Error::InvalidParameter("need at least one equality row".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let size = q / cones;
    let blocks: Vec<(usize, usize)> = (0..cones).map(|i| (i * size, size)).collect();

    let z = normal(q);
    let u = cone_project(&z, &blocks);
    let s: Vec<f64> = u.iter().zip(&z).map(|(a, b)| a - b).collect();
    let v = normal(p);
    let a = normal(p * q);
    let b = matvec(&a, p, q, &u);
    let atv = matvec_t(&a, p, q, &v);
    let c: Vec<f64> = s.iter().zip(&atv).map(|(x, y)| x + y).collect();
    let inst = SocpKktInstance {
        a,
        p,
        q,
        b,
        c,
        blocks,
        u,
        v,
        s,
    };
    let n = inst.dim();

    // A u - b x_last = 0, row by row, and -c^T u + b^T v = 0.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    for i in 0..p {
        let mut r = vec![0.0; n];
        r[..q].copy_from_slice(&inst.a[i * q..(i + 1) * q]);
        r[n - 1] = -inst.b[i];
        rows.push(r);
    }
    let mut r = vec![0.0; n];
    for j in 0..q {
        r[j] = -inst.c[j];
    }
    r[q..q + p].copy_from_slice(&inst.b);
    rows.push(r);
    let mut constraints = Vec::with_capacity(2 * rows.len());
    for (i, r) in rows.into_iter().enumerate() {
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        constraints.push(Oracle::new(format!("eq{i}+"), Affine { a: r, b: 0.0 }));
        constraints.push(Oracle::new(format!("eq{i}-"), Affine { a: neg, b: 0.0 }));
    }

    let mut lower = vec![f64::NEG_INFINITY; n];
    let mut upper = vec![f64::INFINITY; n];
    lower[n - 1] = 1.0;
    upper[n - 1] = 1.0;
    let planted = inst.planted();
    let objective = Oracle::new("kkt-distance", KktObjective { inst });
    let problem = ConstrainedProblem::new(
        format!("socp-kkt-q{q}-p{p}-c{cones}-s{seed}"),
        objective,
        constraints,
        BoxDomain::new(lower, upper)?,
    )?
    .with_fstar(0.0)
    .with_solution(planted);
    Ok(problem)
}
