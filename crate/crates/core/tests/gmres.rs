use std::sync::Arc;

use allatonce::validation::{check_gmres_rate, DenseBundle, DenseOperator};
use allatonce::*;
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn identity_system_converges_in_one_iteration() {
    let b: Vec<f64> = (0..17).map(|i| (i as f64).sin() + 0.1).collect();
    let (x, report) = gmres_solve(&Identity(17), &Identity(17), &b, &GmresConfig::default()).unwrap();
    assert_eq!(report.iterations, 1);
    assert!(report.converged);
    assert!(x.iter().zip(&b).all(|(a, b)| (a - b).abs() <= 1e-15));
}

#[test]
fn spd_system_matches_direct_solve() {
    let mut rng = StdRng::seed_from_u64(31);
    let q = DMatrix::from_fn(10, 10, |_, _| rng.random_range(-1.0..1.0));
    let a = &q * q.transpose() + DMatrix::<f64>::identity(10, 10) * 0.5;
    let b: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
    let tol = 1e-10;
    let config = GmresConfig { tol, max_iter: 10, track_orthogonality: true };
    let (x, report) = gmres_solve(&DenseOperator(a.clone()), &Identity(10), &b, &config).unwrap();
    assert!(report.converged && report.iterations <= 10);
    let exact = a.clone().lu().solve(&DVector::from_column_slice(&b)).unwrap();
    let eig = a.symmetric_eigen().eigenvalues;
    let kappa = eig.max() / eig.min();
    let err = (DVector::from_column_slice(&x) - &exact).norm() / exact.norm();
    assert!(err <= tol * kappa, "error {err:e}, kappa {kappa:e}");
    assert!(report.orthogonality_loss.unwrap() <= 1e-10);
}

fn example_system(h: f64, gamma: f64) -> (AllAtOnceOperator, RbdEpsPreconditioner, Vec<f64>) {
    let problem = example1(gamma);
    let grid = TimeSpaceGrid::from_h(h, 1.0).unwrap();
    let ops = build_stiffness(&grid, |_, _| 1.0).unwrap();
    let inner = Arc::new(DstShiftedSolver::new(&grid, &ops).unwrap());
    let p = RbdEpsPreconditioner::for_grid(&grid, gamma, choose_epsilon(grid.tau), inner, true).unwrap();
    let op = AllAtOnceOperator::new(&grid, &ops, gamma).unwrap();
    let b = assemble_rhs(&problem, &grid, &ops).unwrap();
    (op, p, b)
}

#[test]
fn arnoldi_basis_stays_orthonormal() {
    for gamma in [1e-10, 1e-4, 1.0] {
        let (op, p, b) = example_system(1.0 / 16.0, gamma);
        let config = GmresConfig { track_orthogonality: true, ..Default::default() };
        let (_, report) = gmres_solve(&op, &p, &b, &config).unwrap();
        let loss = report.orthogonality_loss.unwrap();
        assert!(loss <= 1e-10, "gamma={gamma}: {loss:e}");
    }
}

#[test]
fn reported_residual_matches_true_residual() {
    for gamma in [1e-10, 1e-6, 1e-2, 1.0] {
        let (op, p, b) = example_system(1.0 / 16.0, gamma);
        let (x, report) = gmres_solve(&op, &p, &b, &GmresConfig::default()).unwrap();
        assert!(report.converged);
        assert!(report.final_residual() <= 1e-6);
        let ax = op.apply_vec(&x).unwrap();
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let true_rel = norm(&p.apply_vec(&r).unwrap()) / norm(&p.apply_vec(&b).unwrap());
        // below the stopping tolerance the comparison is against the tolerance
        // scale; an absolute floor near 1e-16 is all rounding allows there
        let gap = (true_rel - report.final_residual()).abs() / report.final_residual().max(1e-6);
        assert!(gap <= 1e-8, "gamma={gamma}: estimated {:e}, true {true_rel:e}", report.final_residual());
        for w in report.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }
}

#[test]
fn rate_bound_holds_at_threshold_epsilon() {
    for delta in [0.3, 0.6, 0.9] {
        for (m1, n) in [(1, 4), (3, 4), (3, 8)] {
            let grid = TimeSpaceGrid::new(m1, n, 1.0).unwrap();
            let ops = build_stiffness(&grid, |_, _| 1.0).unwrap();
            let eps = c_tau(delta, grid.tau, 1.0);
            let bundle =
                DenseBundle::new(n, 1e-4, grid.tau, eps, ops.mass.to_dense(), ops.stiffness.to_dense()).unwrap();
            let report = check_gmres_rate(&bundle, delta);
            assert!(report.passed, "{:?}", report);
        }
    }
    assert_eq!(gmres_rate(1.0), 1.0);
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let (op, p, b) = example_system(1.0 / 8.0, 1e-4);
    let config = GmresConfig { tol: 1e-14, max_iter: 2, track_orthogonality: false };
    let (_, report) = gmres_solve(&op, &p, &b, &config).unwrap();
    assert!(!report.converged);
    assert_eq!(report.iterations, 2);
    assert_eq!(report.residual_history.len(), 3);
}
