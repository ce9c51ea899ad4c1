//! Small, dependency-light mixed-binary linear programming engine.
//!
//! The LP core is a bounded-variable primal simplex working on the
//! row-activity form `A x - r = 0` (one logical `r_i` per row, carrying the
//! row bounds), with a sparse LU of the basis and product-form updates.
//! [`BranchAndBound`] drives it best-first over binary variables and accepts
//! a caller-supplied [`IncumbentCheck`] for lazily enforced constraints.

mod bnb;
mod error;
mod lu;
pub mod mps;
mod problem;
mod simplex;

pub use bnb::{
    AcceptAll, BnbConfig, BnbOutcome, BnbStats, BranchAndBound, BranchRule, IncumbentCheck, MilpStatus, Verdict,
};
pub use error::SolverError;
pub use problem::{Constraint, LpSolution, LpStatus, Problem, Relation, VarKind, Variable};
pub use simplex::{Basis, LpEngine, SimplexOptions};

/// Solve the continuous relaxation of `problem` from a slack basis.
pub fn solve_lp(problem: &Problem) -> Result<LpSolution, SolverError> {
    solve_lp_with(problem, &SimplexOptions::default())
}

pub fn solve_lp_with(problem: &Problem, opts: &SimplexOptions) -> Result<LpSolution, SolverError> {
    let mut engine = LpEngine::new(problem, opts.clone());
    engine.solve()
}
