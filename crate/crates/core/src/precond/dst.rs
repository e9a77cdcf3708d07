use num_complex::Complex64;

use super::ShiftedSolver;
use crate::error::{check_len, Error, Result};
use crate::grid::{SpatialOperators, TimeSpaceGrid};
use crate::transforms::Dst2d;

/// Direct solver for `(shift I + tau K) z = r` when `K` is a constant multiple
/// of the five-point Laplacian and the mass matrix is the identity.
#[derive(Debug, Clone)]
pub struct DstShiftedSolver {
    dst: Dst2d,
    /// Eigenvalues of `tau K` in transform order.
    scaled_eigs: Vec<f64>,
}

impl DstShiftedSolver {
    pub fn new(grid: &TimeSpaceGrid, ops: &SpatialOperators) -> Result<Self> {
        check_len(grid.m, ops.dim())?;
        let c = ops.constant_coefficient.ok_or_else(|| {
            Error::Unsupported(
                "sine-transform solver needs a constant coefficient; use multigrid".into(),
            )
        })?;
        if !ops.has_identity_mass() {
            return Err(Error::Unsupported(
                "sine-transform solver needs an identity mass matrix".into(),
            ));
        }
        let dst = Dst2d::new(grid.m1)?;
        let scaled_eigs = dst
            .laplacian_eigenvalues()
            .into_iter()
            .map(|e| grid.tau * c * e)
            .collect();
        Ok(Self { dst, scaled_eigs })
    }
}

impl ShiftedSolver for DstShiftedSolver {
    fn dim(&self) -> usize {
        self.scaled_eigs.len()
    }

    fn solve(&self, shift: Complex64, rhs: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        check_len(self.dim(), rhs.len())?;
        check_len(self.dim(), out.len())?;
        out.copy_from_slice(rhs);
        self.dst.apply(out)?;
        for (z, &mu) in out.iter_mut().zip(&self.scaled_eigs) {
            let d = shift + mu;
            if d.norm() == 0.0 {
                return Err(Error::InnerSolve(format!("singular shift {shift}")));
            }
            *z /= d;
        }
        self.dst.apply(out)
    }
}
