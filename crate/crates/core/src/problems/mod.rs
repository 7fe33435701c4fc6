//! Benchmark families and small fixtures with known solutions.

mod lmi;
mod npc;
mod qcqp;
mod socp;

pub use lmi::{gen_lmi, lmi_objective, sym_flatten, sym_unflatten, LmiInstance};
pub use npc::{
    blobs, load_npc, npc_problem, read_npc_csv, BinaryConstraintLoss, BinaryObjective, NpcDataset, NpcHyper, NpcMode,
};
pub use qcqp::{gen_qcqp, QcqpInstance};
pub use socp::{gen_socp_kkt, soc_project, SocpKktInstance};

use crate::geomsub::BoxDomain;
use crate::oracle::{Affine, ConstrainedProblem, Oracle, Quadratic, WeightedL1};

/// `min x1^2 + x2^2 s.t. 1 - x1 - x2 <= 0` on `[-10, 10]^2`: `x* = (1/2, 1/2)`,
/// `f* = 1/2`, multiplier 1.
pub fn desk_qcqp() -> ConstrainedProblem {
    desk_scaled(1.0)
}

/// The desk problem with its constraint divided by `s`, which multiplies the
/// optimal multiplier by `s` and leaves everything else unchanged.
pub fn desk_scaled(s: f64) -> ConstrainedProblem {
    let f = Oracle::new("f", Quadratic::diagonal(&[2.0, 2.0], vec![0.0, 0.0], 0.0));
    let g = Oracle::new(
        "g",
        Affine {
            a: vec![-1.0 / s, -1.0 / s],
            b: 1.0 / s,
        },
    );
    let name = if s == 1.0 {
        "desk-qcqp".to_string()
    } else {
        format!("desk-qcqp-scaled-{s}")
    };
    ConstrainedProblem::new(name, f, vec![g], BoxDomain::cube(2, -10.0, 10.0).unwrap())
        .unwrap()
        .with_fstar(0.5)
        .with_solution(vec![0.5, 0.5])
        .with_multipliers(vec![s])
        .unwrap()
}

/// `min x^2 s.t. x - 1 <= 0` on `[-10, 10]`; the unconstrained minimizer is
/// feasible.
pub fn desk_1d() -> ConstrainedProblem {
    let f = Oracle::new("f", Quadratic::diagonal(&[2.0], vec![0.0], 0.0));
    let g = Oracle::new("g", Affine { a: vec![1.0], b: -1.0 });
    ConstrainedProblem::new("desk-1d", f, vec![g], BoxDomain::cube(1, -10.0, 10.0).unwrap())
        .unwrap()
        .with_fstar(0.0)
        .with_solution(vec![0.0])
        .with_multipliers(vec![0.0])
        .unwrap()
}

/// `0.5 sum_i l_i x_i^2` on `R^d`, unconstrained; `L = max l_i`, `f* = 0`.
pub fn smooth_quadratic(diag: &[f64]) -> ConstrainedProblem {
    let d = diag.len();
    let f = Oracle::new("f", Quadratic::diagonal(diag, vec![0.0; d], 0.0));
    ConstrainedProblem::new("smooth-quadratic", f, vec![], BoxDomain::unbounded(d))
        .unwrap()
        .with_fstar(0.0)
        .with_solution(vec![0.0; d])
}

/// `sum_i w_i |x_i|` on `R^d`: sharp growth, `f* = 0`.
pub fn sharp_l1(weights: &[f64]) -> ConstrainedProblem {
    let d = weights.len();
    let f = Oracle::new(
        "f",
        WeightedL1 {
            weights: weights.to_vec(),
            center: vec![0.0; d],
        },
    );
    ConstrainedProblem::new("sharp-l1", f, vec![], BoxDomain::unbounded(d))
        .unwrap()
        .with_fstar(0.0)
        .with_solution(vec![0.0; d])
}
