//! Parallel-in-time all-at-once solver for parabolic optimal control.
//!
//! The optimality system of a tracking-type heat control problem is
//! discretized by backward Euler and five-point finite differences, all time
//! steps at once. GMRES is preconditioned by an epsilon-circulant rotated
//! block diagonal matrix whose inverse costs one FFT in time plus `n`
//! independent complex shifted elliptic solves.

pub mod error;
pub mod experiment;
pub mod gmres;
pub mod grid;
pub mod operators;
pub mod precond;
pub mod problem;
pub mod sparse;
pub mod transforms;
pub mod validation;

pub use error::{Error, Result};
pub use experiment::{
    emit_output, parse_h, render_table, run_experiment, solve_problem, ExperimentSpec,
    OutputFormat, ResultRow, ResultTable, Solution, SolverSettings,
};
pub use gmres::{gmres_solve, GmresConfig, SolveReport};
pub use grid::{
    assemble_rhs, build_stiffness, build_time_difference, error_components, error_norm, unscale_solution,
    SpatialOperators, TimeSpaceGrid,
};
pub use operators::{AllAtOnceOperator, FnOperator, Identity, LinearOperator};
pub use precond::{
    build_inner_solver, c_tau, choose_epsilon, gmres_rate, DstShiftedSolver, EpsilonPolicy,
    InnerSolverKind, MultigridConfig, MultigridVCycle, RbdEpsPreconditioner, ShiftedSolver,
};
pub use problem::{example1, example2, problem_by_name, ParabolicControlProblem};
pub use sparse::CsrMatrix;
pub use transforms::{Direction, Dst2d, EpsSpectrum, TimeFft};
