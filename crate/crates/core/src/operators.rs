//! Matrix-free all-at-once operators.
//!
//! With `T = B_n (x) M + tau I_n (x) K` the scaled saddle-point operator is
//!
//! ```text
//! A = [ alpha I(x)M    T^T        ]
//!     [ -T             alpha I(x)M ]
//! ```
//!
//! and every application below costs `O(mn)`.

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::grid::{SpatialOperators, TimeSpaceGrid};
use crate::sparse::CsrMatrix;

/// A real linear map on vectors of fixed length.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;

    fn apply_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y)?;
        Ok(y)
    }
}

/// The identity map, usable as a "no preconditioner" placeholder.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.0, x.len())?;
        y.copy_from_slice(x);
        Ok(())
    }
}

/// Adapts a closure `x -> y` into a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.dim, x.len())?;
        check_len(self.dim, y.len())?;
        (self.f)(x, y)
    }
}

/// Matrix-free representation of the scaled all-at-once operator.
#[derive(Debug, Clone)]
pub struct AllAtOnceOperator {
    /// `tau / sqrt(gamma)`
    pub alpha: f64,
    pub tau: f64,
    pub n: usize,
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
}

impl AllAtOnceOperator {
    pub fn new(grid: &TimeSpaceGrid, ops: &SpatialOperators, gamma: f64) -> Result<Self> {
        check_len(grid.m, ops.dim())?;
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma}")));
        }
        Self::from_parts(
            ops.stiffness.clone(),
            ops.mass.clone(),
            grid.tau,
            grid.n,
            grid.tau / gamma.sqrt(),
        )
    }

    pub fn from_parts(
        stiffness: CsrMatrix,
        mass: CsrMatrix,
        tau: f64,
        n: usize,
        alpha: f64,
    ) -> Result<Self> {
        check_len(stiffness.dim(), mass.dim())?;
        if n == 0 {
            return Err(Error::InvalidSize("n = 0".into()));
        }
        if !(alpha > 0.0 && tau > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha}, tau = {tau}")));
        }
        Ok(Self { alpha, tau, n, stiffness, mass })
    }

    pub fn m(&self) -> usize {
        self.stiffness.dim()
    }

    /// Length of one half (`mn`).
    pub fn half_len(&self) -> usize {
        self.m() * self.n
    }

    /// Block `k` of `T v` or `T^T v`; `neighbour` is the coupled block if any.
    fn t_block(&self, vk: &[f64], neighbour: Option<&[f64]>, out: &mut [f64]) {
        let m = self.m();
        for i in 0..m {
            let mass: f64 = match neighbour {
                Some(nb) => self.mass.row(i).map(|(j, v)| v * (vk[j] - nb[j])).sum(),
                None => self.mass.row(i).map(|(j, v)| v * vk[j]).sum(),
            };
            let stiff: f64 = self.stiffness.row(i).map(|(j, v)| v * vk[j]).sum();
            out[i] = mass + self.tau * stiff;
        }
    }

    /// `(B_n (x) M + tau I (x) K) v`
    pub fn apply_t(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let m = self.m();
        check_len(self.half_len(), v.len())?;
        check_len(self.half_len(), out.len())?;
        out.par_chunks_mut(m).enumerate().for_each(|(k, ok)| {
            let vk = &v[k * m..(k + 1) * m];
            let prev = (k > 0).then(|| &v[(k - 1) * m..k * m]);
            self.t_block(vk, prev, ok);
        });
        Ok(())
    }

    /// `(B_n^T (x) M + tau I (x) K) v`
    pub fn apply_t_transpose(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let (m, n) = (self.m(), self.n);
        check_len(self.half_len(), v.len())?;
        check_len(self.half_len(), out.len())?;
        out.par_chunks_mut(m).enumerate().for_each(|(k, ok)| {
            let vk = &v[k * m..(k + 1) * m];
            let next = (k + 1 < n).then(|| &v[(k + 1) * m..(k + 2) * m]);
            self.t_block(vk, next, ok);
        });
        Ok(())
    }

    /// `alpha (I (x) M) v`
    fn mass_scaled(&self, v: &[f64], out: &mut [f64]) {
        let m = self.m();
        out.par_chunks_mut(m).enumerate().for_each(|(k, ok)| {
            self.mass.mul_vec_into(&v[k * m..(k + 1) * m], ok);
            ok.iter_mut().for_each(|x| *x *= self.alpha);
        });
    }

    /// Full saddle-point product.
    pub fn apply_a(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let half = self.half_len();
        check_len(2 * half, v.len())?;
        check_len(2 * half, out.len())?;
        let (v_top, v_bot) = v.split_at(half);
        let (o_top, o_bot) = out.split_at_mut(half);
        let mut scratch = vec![0.0; half];

        self.mass_scaled(v_top, o_top);
        self.apply_t_transpose(v_bot, &mut scratch)?;
        o_top.iter_mut().zip(&scratch).for_each(|(o, s)| *o += s);

        self.mass_scaled(v_bot, o_bot);
        self.apply_t(v_top, &mut scratch)?;
        o_bot.iter_mut().zip(&scratch).for_each(|(o, s)| *o -= s);
        Ok(())
    }
}

impl LinearOperator for AllAtOnceOperator {
    fn dim(&self) -> usize {
        2 * self.half_len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.apply_a(x, y)
    }
}
