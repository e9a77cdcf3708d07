//! Space-time grid, five-point spatial operators, right-hand side assembly and
//! the discrete error measure.
//!
//! Spatial unknowns are ordered lexicographically with `x1` fastest: the point
//! `(x1, x2) = ((i + 1) h, (j + 1) h)` has index `j * m1 + i`. All-at-once vectors
//! are time-major: block `k` occupies `k * m .. (k + 1) * m`.

use crate::error::{check_len, Error, Result};
use crate::problem::ParabolicControlProblem;
use crate::sparse::CsrMatrix;

/// Uniform tensor grid on `(0,1)^2 x (0,T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpaceGrid {
    /// Spatial step, `1 / (m1 + 1)`.
    pub h: f64,
    /// Interior points per dimension.
    pub m1: usize,
    /// Spatial unknowns, `m1 * m1`.
    pub m: usize,
    /// Time steps.
    pub n: usize,
    /// Time step, `horizon / n`.
    pub tau: f64,
    pub horizon: f64,
}

impl TimeSpaceGrid {
    pub fn new(m1: usize, n: usize, horizon: f64) -> Result<Self> {
        if m1 == 0 || n == 0 {
            return Err(Error::InvalidSize(format!("m1 = {m1}, n = {n}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon {horizon}")));
        }
        Ok(Self {
            h: 1.0 / (m1 + 1) as f64,
            m1,
            m: m1 * m1,
            n,
            tau: horizon / n as f64,
            horizon,
        })
    }

    /// Grid with `h` a reciprocal integer and `n = 1/h` time steps.
    pub fn from_h(h: f64, horizon: f64) -> Result<Self> {
        let inv = (1.0 / h).round();
        if !(h > 0.0) || inv < 2.0 || ((1.0 / h) - inv).abs() > 1e-9 * inv {
            return Err(Error::InvalidParameter(format!(
                "h = {h} is not the reciprocal of an integer >= 2"
            )));
        }
        let inv = inv as usize;
        Self::new(inv - 1, inv, horizon)
    }

    /// Degrees of freedom of the all-at-once system, `2 m n`.
    pub fn dof(&self) -> usize {
        2 * self.m * self.n
    }

    pub fn coord(&self, idx: usize) -> (f64, f64) {
        let i = idx % self.m1;
        let j = idx / self.m1;
        ((i + 1) as f64 * self.h, (j + 1) as f64 * self.h)
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.tau
    }

    /// Samples a spatial function on the interior nodes.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.m)
            .map(|idx| {
                let (x1, x2) = self.coord(idx);
                f(x1, x2)
            })
            .collect()
    }
}

/// Mass and stiffness matrices of the spatial discretization.
#[derive(Debug, Clone)]
pub struct SpatialOperators {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    /// `Some(c)` when every sampled coefficient equals `c`.
    pub constant_coefficient: Option<f64>,
}

impl SpatialOperators {
    pub fn dim(&self) -> usize {
        self.stiffness.dim()
    }

    pub fn has_identity_mass(&self) -> bool {
        self.mass.is_identity()
    }
}

/// Five-point discretization of `-div(a grad)` with homogeneous Dirichlet
/// boundary, coefficients sampled at edge midpoints.
pub fn build_stiffness(
    grid: &TimeSpaceGrid,
    a: impl Fn(f64, f64) -> f64,
) -> Result<SpatialOperators> {
    let m1 = grid.m1;
    let h = grid.h;
    let inv_h2 = 1.0 / (h * h);
    let sample = |x1: f64, x2: f64| -> Result<f64> {
        let v = a(x1, x2);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveCoefficient { x1, x2, value: v });
        }
        Ok(v)
    };

    let mut constant: Option<f64> = None;
    let mut uniform = true;
    let mut rows = Vec::with_capacity(grid.m);
    for j in 0..m1 {
        for i in 0..m1 {
            let x1 = (i + 1) as f64 * h;
            let x2 = (j + 1) as f64 * h;
            // a at the interior node itself must also be positive
            sample(x1, x2)?;
            // midpoints from integer indices so both neighbours see the same
            // coordinate bits and K is exactly symmetric
            let mid = |k: usize| (k as f64 + 0.5) * h;
            let west = sample(mid(i), x2)?;
            let east = sample(mid(i + 1), x2)?;
            let south = sample(x1, mid(j))?;
            let north = sample(x1, mid(j + 1))?;
            for v in [west, east, south, north] {
                match constant {
                    None => constant = Some(v),
                    Some(c) if c != v => uniform = false,
                    _ => {}
                }
            }
            let mut row = Vec::with_capacity(5);
            row.push((j * m1 + i, (west + east + south + north) * inv_h2));
            if i > 0 {
                row.push((j * m1 + i - 1, -west * inv_h2));
            }
            if i + 1 < m1 {
                row.push((j * m1 + i + 1, -east * inv_h2));
            }
            if j > 0 {
                row.push(((j - 1) * m1 + i, -south * inv_h2));
            }
            if j + 1 < m1 {
                row.push(((j + 1) * m1 + i, -north * inv_h2));
            }
            rows.push(row);
        }
    }
    Ok(SpatialOperators {
        stiffness: CsrMatrix::from_rows(rows),
        mass: CsrMatrix::identity(grid.m),
        constant_coefficient: if uniform { constant } else { None },
    })
}

/// Lower bidiagonal backward-difference matrix: 1 on the diagonal, -1 below.
pub fn build_time_difference(n: usize) -> Result<CsrMatrix> {
    if n == 0 {
        return Err(Error::InvalidSize("time difference with n = 0".into()));
    }
    Ok(CsrMatrix::from_rows(
        (0..n)
            .map(|k| {
                let mut row = vec![(k, 1.0)];
                if k > 0 {
                    row.push((k - 1, -1.0));
                }
                row
            })
            .collect(),
    ))
}

/// Right-hand side `[g; -sqrt(gamma) f]` of the scaled all-at-once system.
pub fn assemble_rhs(
    problem: &ParabolicControlProblem,
    grid: &TimeSpaceGrid,
    ops: &SpatialOperators,
) -> Result<Vec<f64>> {
    check_len(grid.m, ops.dim())?;
    let (m, n, tau) = (grid.m, grid.n, grid.tau);
    let sqrt_gamma = problem.gamma.sqrt();
    let mut b = vec![0.0; 2 * m * n];
    let (top, bottom) = b.split_at_mut(m * n);
    let mut scratch = vec![0.0; m];

    for k in 0..n {
        // g sampled at t_k (0-based), i.e. t_0 .. t_{n-1}
        let tg = grid.time(k);
        let gk = grid.sample(|x1, x2| tau * (problem.g)(x1, x2, tg));
        ops.mass.mul_vec_into(&gk, &mut top[k * m..(k + 1) * m]);

        // f sampled at t_{k+1}
        let tf = grid.time(k + 1);
        let mut fk = grid.sample(|x1, x2| tau * (problem.f)(x1, x2, tf));
        if k == 0 {
            for (fi, yi) in fk.iter_mut().zip(grid.sample(|x1, x2| (problem.y0)(x1, x2))) {
                *fi += yi;
            }
        }
        ops.mass.mul_vec_into(&fk, &mut scratch);
        for (dst, s) in bottom[k * m..(k + 1) * m].iter_mut().zip(&scratch) {
            *dst = -sqrt_gamma * s;
        }
    }
    Ok(b)
}

/// Splits the scaled unknown `[sqrt(gamma) y; p]` into `(y, p)`.
pub fn unscale_solution(x: &[f64], gamma: f64) -> (Vec<f64>, Vec<f64>) {
    let half = x.len() / 2;
    let s = gamma.sqrt();
    (x[..half].iter().map(|v| v / s).collect(), x[half..].to_vec())
}

/// Discrete `L^inf(0,T; L2(Omega))` error of the pair `(y, p)`: the larger of
/// the state and adjoint errors from [`error_components`].
pub fn error_norm(
    y: &[f64],
    p: &[f64],
    problem: &ParabolicControlProblem,
    grid: &TimeSpaceGrid,
) -> Result<f64> {
    let (ey, ep) = error_components(y, p, problem, grid)?;
    Ok(ey.max(ep))
}

/// State and adjoint errors, each the maximum over time levels of `h` times
/// the Euclidean norm. State block `k` holds `y(t_{k+1})`, adjoint block `k`
/// holds `p(t_k)`.
pub fn error_components(
    y: &[f64],
    p: &[f64],
    problem: &ParabolicControlProblem,
    grid: &TimeSpaceGrid,
) -> Result<(f64, f64)> {
    let (exact_y, exact_p) = match (&problem.exact_y, &problem.exact_p) {
        (Some(ey), Some(ep)) => (ey, ep),
        _ => {
            return Err(Error::Unsupported(format!(
                "problem '{}' has no exact solution",
                problem.name
            )))
        }
    };
    let (m, n) = (grid.m, grid.n);
    check_len(m * n, y.len())?;
    check_len(m * n, p.len())?;
    let (mut worst_y, mut worst_p) = (0.0f64, 0.0f64);
    for k in 0..n {
        let ty = grid.time(k + 1);
        let tp = grid.time(k);
        let (mut sq_y, mut sq_p) = (0.0, 0.0);
        for idx in 0..m {
            let (x1, x2) = grid.coord(idx);
            let ey = y[k * m + idx] - exact_y(x1, x2, ty);
            let ep = p[k * m + idx] - exact_p(x1, x2, tp);
            sq_y += ey * ey;
            sq_p += ep * ep;
        }
        worst_y = worst_y.max(grid.h * sq_y.sqrt());
        worst_p = worst_p.max(grid.h * sq_p.sqrt());
    }
    Ok((worst_y, worst_p))
}
