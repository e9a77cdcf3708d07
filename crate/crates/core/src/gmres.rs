//! Left-preconditioned GMRES without restart.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::operators::LinearOperator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmresConfig {
    /// Stop when `|P^{-1}(b - A x_k)| <= tol * |P^{-1} b|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Measure the orthogonality of the Arnoldi basis at exit (costs `O(k^2 N)`).
    pub track_orthogonality: bool,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 200, track_orthogonality: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative preconditioned residuals; entry 0 is the initial residual (1.0).
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Seconds spent inside the solve.
    pub wall_time: f64,
    /// Norm of the initial preconditioned residual.
    pub initial_residual: f64,
    /// Discretization error of the returned iterate, when known.
    pub e_h: Option<f64>,
    /// `max |<q_i, q_j> - delta_ij|` over the Arnoldi basis, if tracked.
    pub orthogonality_loss: Option<f64>,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Solves `P^{-1} A x = P^{-1} b` from a zero initial guess.
///
/// Arnoldi uses modified Gram-Schmidt with one reorthogonalization pass; the least-squares problem is kept in
/// triangular form with Givens rotations.
pub fn gmres_solve(
    op: &dyn LinearOperator,
    precond: &dyn LinearOperator,
    b: &[f64],
    config: &GmresConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let dim = op.dim();
    check_len(dim, b.len())?;
    check_len(dim, precond.dim())?;

    let r0 = precond.apply_vec(b)?;
    let beta = norm(&r0);
    let mut report = SolveReport {
        iterations: 0,
        residual_history: vec![1.0],
        converged: false,
        wall_time: 0.0,
        initial_residual: beta,
        e_h: None,
        orthogonality_loss: None,
    };
    if beta == 0.0 {
        report.residual_history = vec![0.0];
        report.converged = true;
        report.wall_time = start.elapsed().as_secs_f64();
        return Ok((vec![0.0; dim], report));
    }

    let mut basis: Vec<Vec<f64>> = vec![r0.iter().map(|v| v / beta).collect()];
    // column-major upper Hessenberg, rotated in place into R
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut rotations: Vec<(f64, f64)> = Vec::new();
    let mut g = vec![beta];
    let mut av = vec![0.0; dim];

    for j in 0..config.max_iter {
        op.apply(&basis[j], &mut av)?;
        let mut w = precond.apply_vec(&av)?;
        let w_norm0 = norm(&w);

        // two MGS passes keep the basis orthonormal to rounding level
        let mut col = vec![0.0; j + 2];
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let hij = dot(&w, q);
                col[i] += hij;
                w.iter_mut().zip(q).for_each(|(wk, qk)| *wk -= hij * qk);
            }
        }
        let h_next = norm(&w);
        col[j + 1] = h_next;

        for (i, &(c, s)) in rotations.iter().enumerate() {
            let (a, b) = (col[i], col[i + 1]);
            col[i] = c * a + s * b;
            col[i + 1] = -s * a + c * b;
        }
        let (c, s) = givens(col[j], col[j + 1]);
        col[j] = c * col[j] + s * col[j + 1];
        col[j + 1] = 0.0;
        rotations.push((c, s));
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s * gj);
        r_cols.push(col);

        let rel = g[j + 1].abs() / beta;
        report.residual_history.push(rel);
        report.iterations = j + 1;

        let breakdown = h_next <= 1e-14 * w_norm0;
        if rel <= config.tol || breakdown {
            report.converged = true;
            break;
        }
        basis.push(w.into_iter().map(|v| v / h_next).collect());
    }

    // back substitution R y = g
    let k = report.iterations;
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for (jj, yj) in y.iter().enumerate().skip(i + 1) {
            s -= r_cols[jj][i] * yj;
        }
        y[i] = s / r_cols[i][i];
    }
    let mut x = vec![0.0; dim];
    for (q, yi) in basis.iter().zip(&y) {
        x.iter_mut().zip(q).for_each(|(xk, qk)| *xk += yi * qk);
    }

    if config.track_orthogonality {
        let used = &basis[..k.min(basis.len())];
        let mut worst = 0.0f64;
        for (i, qi) in used.iter().enumerate() {
            for (jj, qj) in used.iter().enumerate().skip(i) {
                let target = if i == jj { 1.0 } else { 0.0 };
                worst = worst.max((dot(qi, qj) - target).abs());
            }
        }
        report.orthogonality_loss = Some(worst);
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((x, report))
}
