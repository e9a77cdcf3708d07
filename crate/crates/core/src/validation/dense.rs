//! Explicit dense assembly of every matrix in the preconditioner analysis.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::build_time_difference;
use crate::operators::LinearOperator;
use crate::transforms::eps_circulant_matrix;

pub(crate) fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

pub(crate) fn block2(
    a11: &DMatrix<f64>,
    a12: &DMatrix<f64>,
    a21: &DMatrix<f64>,
    a22: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (r, c) = (a11.nrows(), a11.ncols());
    let mut out = DMatrix::zeros(r + a21.nrows(), c + a12.ncols());
    out.view_mut((0, 0), (r, c)).copy_from(a11);
    out.view_mut((0, c), a12.shape()).copy_from(a12);
    out.view_mut((r, 0), a21.shape()).copy_from(a21);
    out.view_mut((r, c), a22.shape()).copy_from(a22);
    out
}

pub(crate) fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    block2(
        a,
        &DMatrix::zeros(a.nrows(), b.ncols()),
        &DMatrix::zeros(b.nrows(), a.ncols()),
        b,
    )
}

/// `f(M)` for symmetric `M` through its eigendecomposition.
pub(crate) fn sym_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Eigenvalues of a general real matrix.
///
/// Identically zero columns are split off first: with them permuted to the
/// front the matrix is block upper triangular with a zero diagonal block, so
/// they contribute exact zero eigenvalues and the rest of the spectrum is that
/// of the principal submatrix on the remaining indices. The Schur iteration
/// deflates relative to the diagonal and stalls on exact zero eigenvalues
/// otherwise.
pub(crate) fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<num_complex::Complex64>> {
    let live: Vec<usize> = (0..a.ncols())
        .filter(|&j| a.column(j).iter().any(|&v| v != 0.0))
        .collect();
    let zeros = a.ncols() - live.len();
    let mut out = vec![num_complex::Complex64::new(0.0, 0.0); zeros];
    if live.is_empty() {
        return Ok(out);
    }
    let sub = a.select_rows(&live).select_columns(&live);
    let max_iter = 500 * sub.nrows();
    let schur = [f64::EPSILON, 1e-15, 1e-14, 1e-13]
        .iter()
        .find_map(|&tol| sub.clone().try_schur(tol, max_iter))
        .ok_or_else(|| Error::InvalidParameter("Schur iteration did not converge".into()))?;
    out.extend(schur.complex_eigenvalues().iter().copied());
    Ok(out)
}

pub(crate) fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    a.singular_values().max()
}

/// `a^{-1} b` via LU.
pub(crate) fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::InvalidParameter("singular dense matrix".into()))
}

pub(crate) fn symmetric_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Dense forms of the saddle-point operator, its splittings, the
/// preconditioner and the `M^{-1/2}`-similar ("tilde") versions.
#[derive(Debug, Clone)]
pub struct DenseBundle {
    pub m: usize,
    pub n: usize,
    pub gamma: f64,
    pub tau: f64,
    pub eps: f64,
    pub alpha: f64,
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,

    /// `T = B_n (x) M + tau I (x) K`
    pub t: DMatrix<f64>,
    pub a: DMatrix<f64>,
    /// Rotation `1/2 [I I; -I I]`.
    pub g: DMatrix<f64>,
    /// `[T^T + aM, T^T - aM; -T + aM, T + aM]` so that `A = B G`.
    pub b: DMatrix<f64>,
    /// `C_eps = C_{eps,n} (x) M + tau I (x) K`
    pub c_eps: DMatrix<f64>,
    pub h_eps: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub p_eps: DMatrix<f64>,
    /// `blockdiag(I (x) M, I (x) M)`
    pub w: DMatrix<f64>,
    pub w_half: DMatrix<f64>,
    pub w_inv_half: DMatrix<f64>,

    pub t_tilde: DMatrix<f64>,
    pub c_tilde_eps: DMatrix<f64>,
    pub b_tilde: DMatrix<f64>,
    pub h_tilde: DMatrix<f64>,
    pub h_tilde_eps: DMatrix<f64>,
    /// `(1 + alpha) I + tau M^{-1/2} K M^{-1/2}`
    pub t0: DMatrix<f64>,
    /// `eps^{-1} (I - eps T0^{-n})`
    pub z_eps: DMatrix<f64>,
    pub e1: DMatrix<f64>,
    pub en: DMatrix<f64>,
}

impl DenseBundle {
    pub fn new(
        n: usize,
        gamma: f64,
        tau: f64,
        eps: f64,
        mass: DMatrix<f64>,
        stiffness: DMatrix<f64>,
    ) -> Result<Self> {
        let m = mass.nrows();
        if mass.shape() != (m, m) || stiffness.shape() != (m, m) {
            return Err(Error::InvalidSize("mass/stiffness must be square and equal".into()));
        }
        if !(gamma > 0.0 && tau > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma}, tau = {tau}")));
        }
        let alpha = tau / gamma.sqrt();
        let mn = m * n;
        let i_n = DMatrix::<f64>::identity(n, n);
        let i_m = DMatrix::<f64>::identity(m, m);
        let i_mn = DMatrix::<f64>::identity(mn, mn);
        let bn = build_time_difference(n)?.to_dense();
        let cn = eps_circulant_matrix(n, eps)?;

        let im_m = kron(&i_n, &mass);
        let am = &im_m * alpha;
        let tk = kron(&i_n, &stiffness) * tau;
        let t = kron(&bn, &mass) + &tk;
        let tt = t.transpose();
        let a = block2(&am, &tt, &(-&t), &am);
        let g = block2(&i_mn, &i_mn, &(-&i_mn), &i_mn) * 0.5;
        let b = block2(&(&tt + &am), &(&tt - &am), &(-&t + &am), &(&t + &am));
        let c_eps = kron(&cn, &mass) + &tk;
        let h_eps = block_diag(&(c_eps.transpose() + &am), &(&c_eps + &am));
        let h = block_diag(&(&tt + &am), &(&t + &am));
        let p_eps = &h_eps * &g;

        let m_half = sym_fn(&mass, f64::sqrt);
        let m_inv_half = sym_fn(&mass, |x| 1.0 / x.sqrt());
        let w = block_diag(&im_m, &im_m);
        let w_half_1 = kron(&i_n, &m_half);
        let w_half = block_diag(&w_half_1, &w_half_1);
        let w_inv_half_1 = kron(&i_n, &m_inv_half);
        let w_inv_half = block_diag(&w_inv_half_1, &w_inv_half_1);

        let k_tilde = &m_inv_half * &stiffness * &m_inv_half;
        let tk_tilde = kron(&i_n, &k_tilde) * tau;
        let t_tilde = kron(&bn, &i_m) + &tk_tilde;
        let c_tilde_eps = kron(&cn, &i_m) + &tk_tilde;
        let ai = &i_mn * alpha;
        let ttt = t_tilde.transpose();
        let b_tilde = block2(&(&ttt + &ai), &(&ttt - &ai), &(-&t_tilde + &ai), &(&t_tilde + &ai));
        let h_tilde = block_diag(&(&ttt + &ai), &(&t_tilde + &ai));
        let h_tilde_eps = block_diag(&(c_tilde_eps.transpose() + &ai), &(&c_tilde_eps + &ai));

        let t0 = &i_m * (1.0 + alpha) + &k_tilde * tau;
        let t0_inv_n = sym_fn(&t0, |x| x.powi(-(n as i32)));
        let z_eps = (&i_m - t0_inv_n * eps) / eps;

        let unit = |k: usize| {
            let mut e = DMatrix::zeros(n, 1);
            e[(k, 0)] = 1.0;
            kron(&e, &i_m)
        };
        Ok(Self {
            m,
            n,
            gamma,
            tau,
            eps,
            alpha,
            mass,
            stiffness,
            t,
            a,
            g,
            b,
            c_eps,
            h_eps,
            h,
            p_eps,
            w,
            w_half,
            w_inv_half,
            t_tilde,
            c_tilde_eps,
            b_tilde,
            h_tilde,
            h_tilde_eps,
            t0,
            z_eps,
            e1: unit(0),
            en: unit(n - 1),
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.m * self.n
    }

    /// `P_eps^{-1} v` by dense LU.
    pub fn p_eps_solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        let x = self
            .p_eps
            .clone()
            .lu()
            .solve(&DVector::from_column_slice(v))
            .ok_or_else(|| Error::InvalidParameter("singular P_eps".into()))?;
        Ok(x.as_slice().to_vec())
    }
}

/// Dense matrix as a [`LinearOperator`].
#[derive(Debug, Clone)]
pub struct DenseOperator(pub DMatrix<f64>);

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        crate::error::check_len(self.0.ncols(), x.len())?;
        let r = &self.0 * DVector::from_column_slice(x);
        y.copy_from_slice(r.as_slice());
        Ok(())
    }
}

/// Symmetric tridiagonal `tridiag(off, diag, off)`; its condition number is at
/// most `(diag + 2|off|) / (diag - 2|off|)`.
pub fn tridiagonal_mass(m: usize, diag: f64, off: f64) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            diag
        } else if i.abs_diff(j) == 1 {
            off
        } else {
            0.0
        }
    })
}
