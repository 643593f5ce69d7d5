//! Deterministic dense optimization engines.
//!
//! Two solvers back the rest of the crate: a two-phase tableau simplex
//! with Bland's rule for linear programs, and a primal active-set method
//! for weighted least squares under lower bounds and a small number of
//! linear equality constraints. Both are dense, dependency-free, and
//! bitwise deterministic for identical inputs; problem sizes here are
//! small (tens of rows, up to a few thousand columns), so simplicity and
//! reproducibility win over peak performance.

mod cls;
mod lp;

pub use cls::{cls_solve, cls_solve_from, ClsSolution, ConstrainedLeastSquares, KktResiduals};
pub use lp::{lp_solve, Direction, LinearProgram, LpSolution, LpStatus, Sense};
