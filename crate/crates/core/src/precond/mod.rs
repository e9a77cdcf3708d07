//! The epsilon-circulant rotated block diagonal preconditioner.
//!
//! ```text
//! P_eps = 1/2 [ C_eps^T + alpha I(x)M        0            ] [  I  I ]
//!             [ 0                  C_eps + alpha I(x)M    ] [ -I  I ]
//! ```
//!
//! with `C_eps = C_{eps,n} (x) M + tau I (x) K`. Since
//! `C_{eps,n} = D^{-1} F Lambda F^* D`, both diagonal blocks are block
//! diagonalized by a scaled FFT in time; what remains is one shifted spatial
//! system per frequency.

mod dst;
mod multigrid;

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dst::DstShiftedSolver;
pub use multigrid::{MultigridConfig, MultigridVCycle};

use crate::error::{check_len, Error, Result};
use crate::grid::{SpatialOperators, TimeSpaceGrid};
use crate::operators::LinearOperator;
use crate::problem::ParabolicControlProblem;
use crate::transforms::{Direction, EpsSpectrum, TimeFft};

/// Solver for `(shift M + tau K) z = r` with complex `shift`, `Re(shift) > 0`.
///
/// Implementations must be fixed linear maps of `r` for a given shift.
pub trait ShiftedSolver: Send + Sync {
    fn dim(&self) -> usize;

    fn solve(&self, shift: Complex64, rhs: &[Complex64], out: &mut [Complex64]) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerSolverKind {
    /// Fast sine transform, exact for constant coefficients.
    Dst,
    /// One geometric multigrid V-cycle.
    #[serde(alias = "multigrid")]
    Mg,
}

impl std::str::FromStr for InnerSolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dst" => Ok(Self::Dst),
            "mg" | "multigrid" => Ok(Self::Mg),
            _ => Err(Error::Config(format!("unknown inner solver '{s}' (dst|mg)"))),
        }
    }
}

/// How epsilon is chosen from the time step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EpsilonPolicy {
    /// `min(1/2, tau/2)`
    #[default]
    HalfTau,
    /// The threshold `c_tau(delta)` that guarantees the GMRES rate bound.
    CTau { delta: f64 },
    Fixed { value: f64 },
}

impl std::str::FromStr for EpsilonPolicy {
    type Err = Error;

    /// Accepts `half_tau`, `c_tau(0.5)` and `fixed(0.01)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let arg = |prefix: &str| -> Option<Result<f64>> {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_suffix(')'))
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Config(format!("{s}: {e}"))))
        };
        if s == "half_tau" {
            Ok(Self::HalfTau)
        } else if let Some(d) = arg("c_tau(") {
            Ok(Self::CTau { delta: d? })
        } else if let Some(v) = arg("fixed(") {
            Ok(Self::Fixed { value: v? })
        } else {
            Err(Error::Config(format!("unknown epsilon policy '{s}'")))
        }
    }
}

impl EpsilonPolicy {
    pub fn resolve(&self, tau: f64, horizon: f64) -> Result<f64> {
        let eps = match *self {
            Self::HalfTau => choose_epsilon(tau),
            Self::CTau { delta } => {
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(Error::InvalidParameter(format!("delta = {delta} not in (0, 1)")));
                }
                c_tau(delta, tau, horizon)
            }
            Self::Fixed { value } => value,
        };
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon = {eps} not in (0, 1]")));
        }
        Ok(eps)
    }
}

/// Default epsilon, `min(1/2, tau/2)`.
pub fn choose_epsilon(tau: f64) -> f64 {
    (0.5 * tau).min(0.5)
}

/// `delta sqrt(tau) / (delta sqrt(tau) + 2 sqrt(T))`.
pub fn c_tau(delta: f64, tau: f64, horizon: f64) -> f64 {
    let d = delta * tau.sqrt();
    d / (d + 2.0 * horizon.sqrt())
}

/// Contraction factor `sqrt(-delta^2 + 8 delta + 2) / (2 + delta)` of the
/// GMRES residual bound.
pub fn gmres_rate(delta: f64) -> f64 {
    (-delta * delta + 8.0 * delta + 2.0).sqrt() / (2.0 + delta)
}

/// Builds the inner solver requested by `kind` for the given discretization.
pub fn build_inner_solver(
    kind: InnerSolverKind,
    grid: &TimeSpaceGrid,
    ops: &SpatialOperators,
    problem: &ParabolicControlProblem,
    mg: MultigridConfig,
) -> Result<Arc<dyn ShiftedSolver>> {
    Ok(match kind {
        InnerSolverKind::Dst => Arc::new(DstShiftedSolver::new(grid, ops)?),
        InnerSolverKind::Mg => {
            if !ops.has_identity_mass() {
                return Err(Error::Unsupported("multigrid needs an identity mass matrix".into()));
            }
            let a = problem.a.clone();
            Arc::new(MultigridVCycle::new(grid, move |x1, x2| a(x1, x2), mg)?)
        }
    })
}

/// Relative size of imaginary residue tolerated in the preconditioner output.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-11;

/// `P_eps^{-1}` applied through the four-step FFT procedure.
pub struct RbdEpsPreconditioner {
    pub spectrum: EpsSpectrum,
    pub alpha: f64,
    pub tau: f64,
    m: usize,
    fft: TimeFft,
    inner: Arc<dyn ShiftedSolver>,
    /// Solve only frequencies `0..=n/2` and conjugate the rest.
    pub exploit_conjugacy: bool,
}

impl std::fmt::Debug for RbdEpsPreconditioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RbdEpsPreconditioner")
            .field("n", &self.spectrum.n)
            .field("m", &self.m)
            .field("eps", &self.spectrum.eps)
            .field("alpha", &self.alpha)
            .field("exploit_conjugacy", &self.exploit_conjugacy)
            .finish()
    }
}

impl RbdEpsPreconditioner {
    pub fn new(
        n: usize,
        tau: f64,
        alpha: f64,
        eps: f64,
        inner: Arc<dyn ShiftedSolver>,
        exploit_conjugacy: bool,
    ) -> Result<Self> {
        if !(alpha > 0.0 && tau > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha}, tau = {tau}")));
        }
        let m = inner.dim();
        Ok(Self {
            spectrum: EpsSpectrum::new(n, eps)?,
            alpha,
            tau,
            m,
            fft: TimeFft::new(n, m)?,
            inner,
            exploit_conjugacy,
        })
    }

    /// Preconditioner for the grid and regularization weight `gamma`.
    pub fn for_grid(
        grid: &TimeSpaceGrid,
        gamma: f64,
        eps: f64,
        inner: Arc<dyn ShiftedSolver>,
        exploit_conjugacy: bool,
    ) -> Result<Self> {
        check_len(grid.m, inner.dim())?;
        Self::new(grid.n, grid.tau, grid.tau / gamma.sqrt(), eps, inner, exploit_conjugacy)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.spectrum.n
    }

    /// Shift of frequency `k` in the lower (`C_eps`) half; the upper half uses
    /// its conjugate.
    pub fn shift(&self, k: usize) -> Complex64 {
        self.spectrum.lambdas[k] + self.alpha
    }

    /// Inverts one diagonal block. `transposed` selects `C_eps^T + alpha I(x)M`.
    fn solve_block(&self, v: &[f64], transposed: bool) -> Result<(Vec<f64>, f64)> {
        let (m, n) = (self.m, self.n());
        let scalings = &self.spectrum.scalings;
        // D applied before the FFT for C_eps, D^{-1} for C_eps^T
        let pre = |k: usize| if transposed { 1.0 / scalings[k] } else { scalings[k] };

        let mut data = vec![Complex64::default(); m * n];
        data.par_chunks_mut(m).zip(v.par_chunks(m)).enumerate().for_each(|(k, (dst, src))| {
            let s = pre(k);
            dst.iter_mut().zip(src).for_each(|(d, &x)| *d = Complex64::new(x * s, 0.0));
        });
        self.fft.transform(&mut data, Direction::Forward)?;

        let solved = if self.exploit_conjugacy { n / 2 + 1 } else { n };
        data.par_chunks_mut(m)
            .enumerate()
            .take(solved)
            .try_for_each_init(
                || vec![Complex64::default(); m],
                |out, (k, block)| -> Result<()> {
                    let shift = if transposed { self.shift(k).conj() } else { self.shift(k) };
                    self.inner.solve(shift, block, out)?;
                    block.copy_from_slice(out);
                    Ok(())
                },
            )?;
        if self.exploit_conjugacy {
            let (low, high) = data.split_at_mut(solved * m);
            for k in solved..n {
                let src = &low[(n - k) * m..(n - k + 1) * m];
                let dst = &mut high[(k - solved) * m..(k - solved + 1) * m];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d = s.conj());
            }
        }

        self.fft.transform(&mut data, Direction::Inverse)?;
        let mut out = vec![0.0; m * n];
        let (mut re_sq, mut im_sq) = (0.0, 0.0);
        for (k, (dst, src)) in out.chunks_mut(m).zip(data.chunks(m)).enumerate() {
            let s = 1.0 / pre(k);
            for (d, z) in dst.iter_mut().zip(src) {
                let z = z * s;
                *d = z.re;
                re_sq += z.re * z.re;
                im_sq += z.im * z.im;
            }
        }
        let residue = if re_sq > 0.0 { (im_sq / re_sq).sqrt() } else { im_sq.sqrt() };
        Ok((out, residue))
    }

    /// `w = P_eps^{-1} v`.
    pub fn apply_inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        let half = self.m * self.n();
        check_len(2 * half, v.len())?;
        let (v_top, v_bot) = v.split_at(half);
        let (upper, lower) = rayon::join(
            || self.solve_block(v_top, true),
            || self.solve_block(v_bot, false),
        );
        let (upper, r1) = upper?;
        let (lower, r2) = lower?;
        let residue = r1.max(r2);
        if residue > IMAGINARY_RESIDUE_TOL {
            return Err(Error::ImaginaryResidue(residue));
        }
        // undo the rotation: [I -I; I I]
        let mut w = vec![0.0; 2 * half];
        let (w_top, w_bot) = w.split_at_mut(half);
        for i in 0..half {
            w_top[i] = upper[i] - lower[i];
            w_bot[i] = upper[i] + lower[i];
        }
        Ok(w)
    }
}

impl LinearOperator for RbdEpsPreconditioner {
    fn dim(&self) -> usize {
        2 * self.m * self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.dim(), y.len())?;
        let w = self.apply_inverse(x)?;
        y.copy_from_slice(&w);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_policy_values() {
        assert_eq!(choose_epsilon(1.0 / 32.0), 1.0 / 64.0);
        assert_eq!(choose_epsilon(2.0), 0.5);
        assert!((c_tau(0.5, 0.25, 1.0) - 1.0 / 9.0).abs() < 1e-15);
        let expected = 0.5 * 0.125f64.sqrt() / (0.5 * 0.125f64.sqrt() + 2.0);
        assert!((c_tau(0.5, 0.125, 1.0) - expected).abs() < 1e-15);
        assert!((c_tau(0.5, 0.125, 1.0) - 0.0812).abs() < 1e-3);
        assert_eq!(gmres_rate(1.0), 1.0);
        assert!((gmres_rate(0.9) - 8.39f64.sqrt() / 2.9).abs() < 1e-15);
        assert!((gmres_rate(0.9) - 0.9988).abs() < 1e-4);
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("half_tau".parse::<EpsilonPolicy>().unwrap(), EpsilonPolicy::HalfTau);
        assert_eq!(
            "c_tau(0.5)".parse::<EpsilonPolicy>().unwrap(),
            EpsilonPolicy::CTau { delta: 0.5 }
        );
        assert_eq!(
            "fixed(0.01)".parse::<EpsilonPolicy>().unwrap(),
            EpsilonPolicy::Fixed { value: 0.01 }
        );
        assert!("bogus".parse::<EpsilonPolicy>().is_err());
        assert!(EpsilonPolicy::Fixed { value: 2.0 }.resolve(0.1, 1.0).is_err());
        assert!(EpsilonPolicy::CTau { delta: 1.0 }.resolve(0.1, 1.0).is_err());
        assert_eq!("mg".parse::<InnerSolverKind>().unwrap(), InnerSolverKind::Mg);
    }
}
