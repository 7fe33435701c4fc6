//! Brute-force reference solvers for tiny subproblems.
#![allow(dead_code)]

use levelcraft::{AffineMinorant, BoxDomain, Cut};
use nalgebra::{DMatrix, DVector};

/// Inequality rows `a . x <= b` for the cuts plus every finite box side.
pub fn all_rows(cuts: &[Cut], domain: &BoxDomain) -> Vec<(Vec<f64>, f64)> {
    let d = domain.dim();
    let mut rows: Vec<(Vec<f64>, f64)> = cuts.iter().map(|c| (c.slope.clone(), c.rhs)).collect();
    for i in 0..d {
        let mut e = vec![0.0; d];
        if domain.upper[i].is_finite() {
            e[i] = 1.0;
            rows.push((e.clone(), domain.upper[i]));
        }
        if domain.lower[i].is_finite() {
            e[i] = -1.0;
            rows.push((e, -domain.lower[i]));
        }
    }
    rows
}

fn subsets(n: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for mask in 1u32..(1 << n) {
        if (mask.count_ones() as usize) <= max {
            out.push((0..n).filter(|i| mask & (1 << i) != 0).collect());
        }
    }
    out
}

fn feasible(rows: &[(Vec<f64>, f64)], x: &[f64], tol: f64) -> bool {
    rows.iter()
        .all(|(a, b)| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() <= b + tol * (1.0 + b.abs()))
}

/// Nearest point to `center` in `{a_i . x <= b_i}` by trying every active set
/// of independent rows. `None` when no candidate is feasible.
pub fn brute_force_projection(center: &[f64], rows: &[(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let d = center.len();
    let c = DVector::from_column_slice(center);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for set in subsets(rows.len(), d) {
        let x = if set.is_empty() {
            c.clone()
        } else {
            let a = DMatrix::from_fn(set.len(), d, |r, j| rows[set[r]].0[j]);
            let b = DVector::from_iterator(set.len(), set.iter().map(|&r| rows[r].1));
            let gram = &a * a.transpose();
            let Some(inv) = gram.clone().try_inverse() else {
                continue;
            };
            if gram.determinant().abs() < 1e-12 {
                continue;
            }
            let y = inv * (&a * &c - b);
            &c - a.transpose() * y
        };
        let xv: Vec<f64> = x.iter().cloned().collect();
        if !feasible(rows, &xv, 1e-9) {
            continue;
        }
        let dist = (&x - &c).norm_squared();
        if best.as_ref().map_or(true, |(bd, _)| dist < *bd) {
            best = Some((dist, xv));
        }
    }
    best.map(|b| b.1)
}

/// `min_x max_j pieces_j(x)` over a bounded box and cuts, by enumerating
/// vertices of the epigraph in `(x, t)`. `None` when infeasible.
pub fn brute_force_epigraph(pieces: &[AffineMinorant], cuts: &[Cut], domain: &BoxDomain) -> Option<f64> {
    let d = domain.dim();
    // Rows in (x, t): piece a.x + b - t <= 0, cuts, box.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for p in pieces {
        let mut a = p.slope.clone();
        a.push(-1.0);
        rows.push((a, -p.intercept));
    }
    let n_pieces = rows.len();
    for (a, b) in all_rows(cuts, domain) {
        let mut a = a;
        a.push(0.0);
        rows.push((a, b));
    }
    let mut best: Option<f64> = None;
    for set in subsets(rows.len(), d + 1) {
        if set.len() != d + 1 || !set.iter().any(|&r| r < n_pieces) {
            continue;
        }
        let a = DMatrix::from_fn(d + 1, d + 1, |r, j| rows[set[r]].0[j]);
        if a.determinant().abs() < 1e-12 {
            continue;
        }
        let b = DVector::from_iterator(d + 1, set.iter().map(|&r| rows[r].1));
        let Some(sol) = a.lu().solve(&b) else { continue };
        let v: Vec<f64> = sol.iter().cloned().collect();
        if !feasible(&rows, &v, 1e-9) {
            continue;
        }
        let t = v[d];
        if best.map_or(true, |bt| t < bt) {
            best = Some(t);
        }
    }
    best
}

/// Least-squares fit `y = a + b x`; returns `(a, b, r_squared)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (a, b, r2)
}

/// `V(eta) = min_x max{x1^2 + x2^2 - eta, (1 - x1 - x2) / s}` for the scaled
/// desk problem, attained on the diagonal `x1 = x2 = t`.
pub fn desk_value(eta: f64, s: f64) -> f64 {
    if -eta >= 1.0 / s {
        return -eta;
    }
    // 2 t^2 - eta = (1 - 2 t) / s
    let t = (-2.0 / s + (4.0 / (s * s) + 8.0 * (eta + 1.0 / s)).sqrt()) / 4.0;
    (1.0 - 2.0 * t) / s
}

/// Minimizer of `v(., eta)` on the scaled desk problem.
pub fn desk_minimizer(eta: f64, s: f64) -> Vec<f64> {
    if -eta >= 1.0 / s {
        return vec![0.0, 0.0];
    }
    let t = (-2.0 / s + (4.0 / (s * s) + 8.0 * (eta + 1.0 / s)).sqrt()) / 4.0;
    vec![t, t]
}
