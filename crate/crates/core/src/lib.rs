//! Parameter-free bundle-level solvers for convex optimization with convex
//! functional constraints.
//!
//! The crate is organised bottom-up:
//!
//! - [`oracle`]: first-order oracles with call accounting, the level composite
//!   `v(x, eta) = max{f(x) - eta, g_1(x), ..., g_m(x)}` and its affine minorants.
//! - [`geomsub`]: the two structured subproblems every outer method needs, a
//!   nearest-point QP over a polyhedron and an epigraph LP for lower bounds.
//! - [`apmm`]: the accelerated Polyak minorant method for problems whose
//!   optimal value is known, its non-accelerated special case and a restarted
//!   variant.
//! - [`apl`]: gap reduction and the accelerated prox-level loop, which bracket
//!   the value function `V(eta)` to a prescribed relative accuracy.
//! - [`levelset`]: root finding on `V` (inexact fixed point and truncated
//!   secant) for problems whose optimal value is unknown.
//! - [`problems`]: benchmark generators and a CSV loader.
//! - [`report`] and [`cli`]: run telemetry, trace files and the experiment runner.

pub mod apl;
pub mod apmm;
pub mod cli;
pub mod error;
pub mod geomsub;
pub mod levelset;
pub mod linalg;
pub mod oracle;
pub mod problems;
pub mod report;

pub use error::{Error, Result};
pub use geomsub::{BoxDomain, Cut};
pub use oracle::{AffineMinorant, CompositeEval, ConstrainedProblem, ConvexFunction, Oracle};
pub use report::{ExitStatus, IterRecord, Solution, SolverReport};
