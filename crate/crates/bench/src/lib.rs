//! Shared fixtures for the criterion benches.

use std::sync::Arc;

use allatonce::{
    assemble_rhs, build_inner_solver, build_stiffness, choose_epsilon, example1, example2,
    AllAtOnceOperator, InnerSolverKind, MultigridConfig, RbdEpsPreconditioner, TimeSpaceGrid,
};

/// Assembled operator, preconditioner and right-hand side for one cell.
pub struct System {
    pub grid: TimeSpaceGrid,
    pub op: AllAtOnceOperator,
    pub precond: RbdEpsPreconditioner,
    pub rhs: Vec<f64>,
}

/// Example 1 with the sine-transform inner solver, or example 2 with multigrid.
pub fn system(h: f64, gamma: f64, inner: InnerSolverKind) -> System {
    let problem = match inner {
        InnerSolverKind::Dst => example1(gamma),
        InnerSolverKind::Mg => example2(gamma),
    };
    let grid = TimeSpaceGrid::from_h(h, problem.horizon).expect("grid");
    let a = problem.a.clone();
    let ops = build_stiffness(&grid, move |x1, x2| a(x1, x2)).expect("stiffness");
    let solver = build_inner_solver(inner, &grid, &ops, &problem, MultigridConfig::default()).expect("inner");
    let precond = RbdEpsPreconditioner::for_grid(&grid, gamma, choose_epsilon(grid.tau), Arc::clone(&solver), true)
        .expect("preconditioner");
    let op = AllAtOnceOperator::new(&grid, &ops, gamma).expect("operator");
    let rhs = assemble_rhs(&problem, &grid, &ops).expect("rhs");
    System { grid, op, precond, rhs }
}
