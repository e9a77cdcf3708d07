use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ShiftedSolver;
use crate::error::{check_len, Error, Result};
use crate::grid::{build_stiffness, TimeSpaceGrid};
use crate::sparse::CsrMatrix;

/// V-cycle settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultigridConfig {
    pub pre_smooth: usize,
    pub post_smooth: usize,
    /// Coarsening stops once `m1` is at most this size.
    pub coarsest_m1: usize,
}

impl Default for MultigridConfig {
    fn default() -> Self {
        Self { pre_smooth: 1, post_smooth: 1, coarsest_m1: 3 }
    }
}

#[derive(Debug, Clone)]
struct Level {
    m1: usize,
    /// `tau K` on this level.
    tau_k: CsrMatrix,
}

/// One geometric V-cycle with zero initial guess for `(shift I + tau K) z = r`.
///
/// Coarse operators are re-discretized from the coefficient, smoothing is
/// lexicographic Gauss-Seidel in complex arithmetic, transfers are full
/// weighting and bilinear interpolation. The map `r -> z` is linear.
#[derive(Debug, Clone)]
pub struct MultigridVCycle {
    levels: Vec<Level>,
    config: MultigridConfig,
}

impl MultigridVCycle {
    pub fn new(
        grid: &TimeSpaceGrid,
        a: impl Fn(f64, f64) -> f64,
        config: MultigridConfig,
    ) -> Result<Self> {
        if config.coarsest_m1 == 0 {
            return Err(Error::Config("coarsest_m1 must be positive".into()));
        }
        let mut levels = Vec::new();
        let mut m1 = grid.m1;
        loop {
            let g = TimeSpaceGrid::new(m1, grid.n, grid.horizon)?;
            let ops = build_stiffness(&g, &a)?;
            let rows = (0..g.m)
                .map(|i| ops.stiffness.row(i).map(|(j, v)| (j, grid.tau * v)).collect())
                .collect();
            levels.push(Level { m1, tau_k: CsrMatrix::from_rows(rows) });
            if m1 <= config.coarsest_m1 {
                break;
            }
            if m1.is_multiple_of(2) {
                return Err(Error::Config(format!(
                    "grid with {} interior points per side cannot be coarsened; \
                     multigrid needs m1 = 2^l - 1",
                    grid.m1
                )));
            }
            m1 = (m1 - 1) / 2;
        }
        Ok(Self { levels, config })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    fn smooth(level: &Level, shift: Complex64, rhs: &[Complex64], z: &mut [Complex64]) {
        for i in 0..rhs.len() {
            let mut acc = rhs[i];
            let mut diag = shift;
            for (j, v) in level.tau_k.row(i) {
                if j == i {
                    diag += v;
                } else {
                    acc -= z[j] * v;
                }
            }
            z[i] = acc / diag;
        }
    }

    fn residual(level: &Level, shift: Complex64, rhs: &[Complex64], z: &[Complex64]) -> Vec<Complex64> {
        let mut kz = vec![Complex64::default(); rhs.len()];
        level.tau_k.mul_complex_into(z, &mut kz);
        rhs.iter()
            .zip(z)
            .zip(&kz)
            .map(|((r, zi), k)| r - shift * zi - k)
            .collect()
    }

    const WEIGHTS: [(isize, isize, f64); 9] = [
        (0, 0, 0.25),
        (-1, 0, 0.125),
        (1, 0, 0.125),
        (0, -1, 0.125),
        (0, 1, 0.125),
        (-1, -1, 0.0625),
        (1, -1, 0.0625),
        (-1, 1, 0.0625),
        (1, 1, 0.0625),
    ];

    fn restrict(fine_m1: usize, coarse_m1: usize, fine: &[Complex64]) -> Vec<Complex64> {
        let mut coarse = vec![Complex64::default(); coarse_m1 * coarse_m1];
        for cj in 0..coarse_m1 {
            for ci in 0..coarse_m1 {
                let (fi, fj) = (2 * ci + 1, 2 * cj + 1);
                let mut acc = Complex64::default();
                for &(di, dj, w) in &Self::WEIGHTS {
                    let (i, j) = (fi as isize + di, fj as isize + dj);
                    // fine indices stay in range because fi, fj are odd and m1 = 2 coarse + 1
                    acc += fine[j as usize * fine_m1 + i as usize] * w;
                }
                coarse[cj * coarse_m1 + ci] = acc;
            }
        }
        coarse
    }

    fn prolongate_add(fine_m1: usize, coarse_m1: usize, coarse: &[Complex64], fine: &mut [Complex64]) {
        for cj in 0..coarse_m1 {
            for ci in 0..coarse_m1 {
                let e = coarse[cj * coarse_m1 + ci];
                let (fi, fj) = (2 * ci + 1, 2 * cj + 1);
                for &(di, dj, w) in &Self::WEIGHTS {
                    let (i, j) = (fi as isize + di, fj as isize + dj);
                    fine[j as usize * fine_m1 + i as usize] += e * (4.0 * w);
                }
            }
        }
    }

    fn coarse_solve(level: &Level, shift: Complex64, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let m = rhs.len();
        let mut a = DMatrix::<Complex64>::zeros(m, m);
        for i in 0..m {
            a[(i, i)] += shift;
            for (j, v) in level.tau_k.row(i) {
                a[(i, j)] += Complex64::new(v, 0.0);
            }
        }
        a.lu()
            .solve(&DVector::from_column_slice(rhs))
            .map(|z| z.as_slice().to_vec())
            .ok_or_else(|| Error::InnerSolve(format!("singular coarse system, shift {shift}")))
    }

    fn cycle(&self, depth: usize, shift: Complex64, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let level = &self.levels[depth];
        if depth + 1 == self.levels.len() {
            return Self::coarse_solve(level, shift, rhs);
        }
        let mut z = vec![Complex64::default(); rhs.len()];
        for _ in 0..self.config.pre_smooth {
            Self::smooth(level, shift, rhs, &mut z);
        }
        let res = Self::residual(level, shift, rhs, &z);
        let coarse_m1 = self.levels[depth + 1].m1;
        let rc = Self::restrict(level.m1, coarse_m1, &res);
        let ec = self.cycle(depth + 1, shift, &rc)?;
        Self::prolongate_add(level.m1, coarse_m1, &ec, &mut z);
        for _ in 0..self.config.post_smooth {
            Self::smooth(level, shift, rhs, &mut z);
        }
        Ok(z)
    }

    /// Residual `r - (shift I + tau K) z` on the finest level.
    pub fn fine_residual(&self, shift: Complex64, rhs: &[Complex64], z: &[Complex64]) -> Vec<Complex64> {
        Self::residual(&self.levels[0], shift, rhs, z)
    }
}

impl ShiftedSolver for MultigridVCycle {
    fn dim(&self) -> usize {
        self.levels[0].m1 * self.levels[0].m1
    }

    fn solve(&self, shift: Complex64, rhs: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        check_len(self.dim(), rhs.len())?;
        check_len(self.dim(), out.len())?;
        let z = self.cycle(0, shift, rhs)?;
        out.copy_from_slice(&z);
        Ok(())
    }
}
