//! Lavrentiev regularization for monotone operator equations posed as
//! variational inequalities over a closed convex set.
//!
//! Given a monotone operator `F` on a convex set `M` and noisy data `f_delta`
//! with `||f_delta - f*|| <= delta`, the regularized solution `u` is the unique
//! element of `M` with
//!
//! ```text
//! <F u + alpha (u - ubar) - f_delta, v - u> >= 0   for all v in M.
//! ```
//!
//! It is computed by the projected fixed-point iteration
//! `u <- P_M(u - mu (F u + alpha (u - ubar) - f_delta))`, which contracts with
//! factor `1 - mu alpha` when `F` is cocoercive with constant `tau`,
//! `0 < mu < 2 tau` and `alpha <= 1/mu - 1/(2 tau)`.
//!
//! Everything lives on a uniform grid of `[0, 1]` with backward-rectangle
//! quadrature (see [`space`]). The concrete operator is the exponential decay
//! map `(F u)(t) = -c0 exp(-int_0^t u)` from coefficient identification in
//! `f' + u f = 0`, `f(0) = -c0`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constraints;
pub mod diagnostics;
mod error;
pub mod experiments;
pub mod operators;
pub mod solver;
pub mod space;

pub use constraints::{ConvexSet, LowerBoundSet, WholeSpace};
pub use error::{Error, Result};
pub use experiments::{ExampleKind, ExampleSpec, ExperimentRow, NoiseModel};
pub use operators::{DecayOperator, DiagonalOperator, MonotoneOperator, OperatorConstants};
pub use solver::{SolveResult, SolverConfig};
pub use space::{Grid, GridFunction};
