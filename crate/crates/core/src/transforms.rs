//! Time-direction FFTs, the 2D sine transform, and the spectrum of the
//! epsilon-circulant time matrix.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};

/// `Forward` applies `F^* (x) I` (negative exponent, as in the usual DFT),
/// `Inverse` applies `F (x) I`, with `F` from [`fourier_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

fn check_eps(n: usize, eps: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidSize("n = 0".into()));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {eps} not in (0, 1]")));
    }
    Ok(())
}

/// Dense `n x n` epsilon-circulant matrix: the backward-difference matrix with
/// `-eps` in the top-right corner.
pub fn eps_circulant_matrix(n: usize, eps: f64) -> Result<DMatrix<f64>> {
    check_eps(n, eps)?;
    let mut c = DMatrix::zeros(n, n);
    for k in 0..n {
        c[(k, k)] = 1.0;
        if k > 0 {
            c[(k, k - 1)] = -1.0;
        }
    }
    c[(0, n - 1)] -= eps;
    Ok(c)
}

/// Unitary Fourier matrix `F[j,k] = exp(2 pi i jk / n) / sqrt(n)`.
pub fn fourier_matrix(n: usize) -> DMatrix<Complex64> {
    let s = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |j, k| {
        Complex64::from_polar(s, 2.0 * PI * ((j * k) % n) as f64 / n as f64)
    })
}

/// Eigen-data of the epsilon-circulant matrix `C = D^{-1} F diag(lambda) F^* D`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsSpectrum {
    pub n: usize,
    pub eps: f64,
    /// `lambda_k = 1 - eps^{1/n} exp(-2 pi i k / n)`, `k = 0..n`.
    pub lambdas: Vec<Complex64>,
    /// Diagonal of `D`: `eps^{k/n}`, `k = 0..n`.
    pub scalings: Vec<f64>,
}

impl EpsSpectrum {
    pub fn new(n: usize, eps: f64) -> Result<Self> {
        check_eps(n, eps)?;
        let root = eps.powf(1.0 / n as f64);
        let lambdas = (0..n)
            .map(|k| {
                Complex64::new(1.0, 0.0)
                    - Complex64::from_polar(root, -2.0 * PI * k as f64 / n as f64)
            })
            .collect();
        let scalings = (0..n).map(|k| eps.powf(k as f64 / n as f64)).collect();
        Ok(Self { n, eps, lambdas, scalings })
    }

    /// Lower bound `1 - eps^{1/n}` on every real part.
    pub fn min_real_part_bound(&self) -> f64 {
        1.0 - self.eps.powf(1.0 / self.n as f64)
    }

    /// Reassembles the dense matrix from the factorization (validation use).
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let n = self.n;
        let f = fourier_matrix(n);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            self.scalings.iter().map(|&s| Complex64::new(s, 0.0)),
        ));
        let d_inv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            self.scalings.iter().map(|&s| Complex64::new(1.0 / s, 0.0)),
        ));
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.lambdas.clone()));
        d_inv * &f * lam * f.adjoint() * d
    }
}

/// Epsilon-circulant spectrum; see [`EpsSpectrum`].
pub fn eps_spectrum(n: usize, eps: f64) -> Result<EpsSpectrum> {
    EpsSpectrum::new(n, eps)
}

/// Batched unitary DFT along the time index of time-major `m x n` block vectors.
///
/// `Forward` applies `F^* (x) I_m` (negative exponent), `Inverse` applies `F (x) I_m`.
#[derive(Clone)]
pub struct TimeFft {
    n: usize,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for TimeFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TimeFft").field("n", &self.n).field("m", &self.m).finish()
    }
}

impl TimeFft {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidSize(format!("n = {n}, m = {m}")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            m,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn transform(&self, data: &mut [Complex64], dir: Direction) -> Result<()> {
        let (n, m) = (self.n, self.m);
        check_len(n * m, data.len())?;
        if n == 1 {
            return Ok(());
        }
        let plan = match dir {
            Direction::Forward => &self.forward,
            Direction::Inverse => &self.inverse,
        };
        let scale = 1.0 / (n as f64).sqrt();
        // Gather tiles of spatial indices into contiguous length-n signals and
        // transform them while the tile is still in cache. Sub-tiles of 16
        // rows avoid L1 set conflicts from the power-of-two stride n.
        const TILE: usize = 64;
        const SUB: usize = 16;
        let mut work = vec![Complex64::default(); n * m];
        {
            let data = &*data;
            work.par_chunks_mut(n * TILE).enumerate().for_each(|(t, chunk)| {
                let i0 = t * TILE;
                let width = chunk.len() / n;
                for ib in (0..width).step_by(SUB) {
                    let ie = (ib + SUB).min(width);
                    for k in 0..n {
                        let src = &data[k * m + i0 + ib..k * m + i0 + ie];
                        for (ii, &z) in (ib..ie).zip(src) {
                            chunk[ii * n + k] = z;
                        }
                    }
                }
                plan.process(chunk);
                chunk.iter_mut().for_each(|z| *z *= scale);
            });
        }
        // scatter groups of time levels; wide groups read each work row in
        // one run, so only split as far as the thread count needs
        let steps = n.div_ceil(rayon::current_num_threads()).max(16);
        data.par_chunks_mut(m * steps).enumerate().for_each(|(g, block)| {
            let k0 = g * steps;
            let width = block.len() / m;
            for i in 0..m {
                let row = &work[i * n + k0..i * n + k0 + width];
                for (kk, &z) in row.iter().enumerate() {
                    block[kk * m + i] = z;
                }
            }
        });
        Ok(())
    }
}

/// Free-function form of [`TimeFft::transform`].
pub fn time_block_fft(v: &[Complex64], m: usize, dir: Direction) -> Result<Vec<Complex64>> {
    if m == 0 || !v.len().is_multiple_of(m) {
        return Err(Error::LengthMismatch { expected: m, actual: v.len() });
    }
    let mut out = v.to_vec();
    TimeFft::new(v.len() / m, m)?.transform(&mut out, dir)?;
    Ok(out)
}

/// Orthonormal 2D DST-I, `S (x) S` with
/// `S[j,k] = sqrt(2/(m1+1)) sin(jk pi/(m1+1))`. It is an involution.
#[derive(Clone)]
pub struct Dst2d {
    m1: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dst2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dst2d").field("m1", &self.m1).finish()
    }
}

impl Dst2d {
    pub fn new(m1: usize) -> Result<Self> {
        if m1 == 0 {
            return Err(Error::InvalidSize("m1 = 0".into()));
        }
        let fft = FftPlanner::new().plan_fft_forward(2 * (m1 + 1));
        Ok(Self { m1, fft })
    }

    /// Builds the transform for `m = m1^2` unknowns.
    pub fn for_len(m: usize) -> Result<Self> {
        let m1 = (m as f64).sqrt().round() as usize;
        if m1 * m1 != m || m == 0 {
            return Err(Error::InvalidSize(format!("{m} is not a perfect square")));
        }
        Self::new(m1)
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    /// DST-I of each contiguous row of length `m1`.
    fn rows(&self, data: &mut [Complex64]) {
        let m1 = self.m1;
        let len = 2 * (m1 + 1);
        let scale = (2.0 / (m1 + 1) as f64).sqrt();
        let i_half = Complex64::new(0.0, 0.5 * scale);
        data.par_chunks_mut(m1).for_each_init(
            || vec![Complex64::default(); 2 * len],
            |buf, row| {
                let (ext, scratch) = buf.split_at_mut(len);
                ext.iter_mut().for_each(|z| *z = Complex64::default());
                for (j, &x) in row.iter().enumerate() {
                    ext[j + 1] = x;
                    ext[len - j - 1] = -x;
                }
                self.fft.process_with_scratch(ext, scratch);
                for (k, r) in row.iter_mut().enumerate() {
                    *r = ext[k + 1] * i_half;
                }
            },
        );
    }

    fn transpose(&self, data: &[Complex64], out: &mut [Complex64]) {
        let m1 = self.m1;
        out.par_chunks_mut(m1).enumerate().for_each(|(i, row)| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = data[j * m1 + i];
            }
        });
    }

    pub fn apply(&self, data: &mut [Complex64]) -> Result<()> {
        check_len(self.m1 * self.m1, data.len())?;
        self.rows(data);
        let mut t = vec![Complex64::default(); data.len()];
        self.transpose(data, &mut t);
        self.rows(&mut t);
        self.transpose(&t, data);
        Ok(())
    }

    /// Eigenvalues of the unit-coefficient five-point stiffness, in the
    /// transform's index order.
    pub fn laplacian_eigenvalues(&self) -> Vec<f64> {
        let m1 = self.m1;
        let h = 1.0 / (m1 + 1) as f64;
        let one_d: Vec<f64> = (1..=m1).map(|i| 2.0 - 2.0 * (i as f64 * PI * h).cos()).collect();
        let mut out = Vec::with_capacity(m1 * m1);
        for j in 0..m1 {
            for i in 0..m1 {
                out.push((one_d[i] + one_d[j]) / (h * h));
            }
        }
        out
    }
}

/// Applies the 2D sine transform to a real vector. The direction is accepted
/// for symmetry with [`time_block_fft`]; the transform is its own inverse.
pub fn dst2d(v: &[f64], _dir: Direction) -> Result<Vec<f64>> {
    let dst = Dst2d::for_len(v.len())?;
    let mut z: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    dst.apply(&mut z)?;
    Ok(z.into_iter().map(|c| c.re).collect())
}
