//! Dense numerical checks of the spectral and convergence properties of the
//! preconditioned all-at-once system.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::dense::{eigenvalues, solve, spectral_norm, sym_fn, symmetric_part, DenseBundle, DenseOperator};
use crate::error::Result;
use crate::gmres::{gmres_solve, GmresConfig};
use crate::grid::{build_stiffness, TimeSpaceGrid};
use crate::precond::{gmres_rate, DstShiftedSolver, RbdEpsPreconditioner};

/// Absolute tolerance used to decide that an eigenvalue of
/// `H_eps^{-1} H - I` vanishes.
pub const UNIT_EIGENVALUE_TOL: f64 = 1e-10;
/// Relative singular value cut-off for numerical rank.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub config: String,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    pub failures: Vec<String>,
}

impl CheckReport {
    fn new(check: &str, config: String) -> Self {
        Self {
            check: check.to_string(),
            config,
            passed: true,
            metrics: BTreeMap::new(),
            failures: Vec::new(),
        }
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    fn expect(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.passed = false;
            self.failures.push(msg());
        }
    }

    fn error(check: &str, config: String, err: crate::Error) -> Self {
        let mut r = Self::new(check, config);
        r.expect(false, || format!("error: {err}"));
        r
    }
}

fn describe(b: &DenseBundle) -> String {
    format!(
        "m={} n={} gamma={:e} tau={} eps={:.4e} mass_identity={}",
        b.m,
        b.n,
        b.gamma,
        b.tau,
        b.eps,
        b.mass == DMatrix::identity(b.m, b.m)
    )
}

fn run(check: &str, b: &DenseBundle, f: impl FnOnce(&mut CheckReport) -> Result<()>) -> CheckReport {
    let mut report = CheckReport::new(check, describe(b));
    match f(&mut report) {
        Ok(()) => report,
        Err(e) => CheckReport::error(check, describe(b), e),
    }
}

/// `(T~ + alpha I)^{-1} (alpha I - T~)`
fn e_tilde(b: &DenseBundle) -> Result<DMatrix<f64>> {
    let dim = b.m * b.n;
    let ai = DMatrix::<f64>::identity(dim, dim) * b.alpha;
    solve(&(&b.t_tilde + &ai), &(&ai - &b.t_tilde))
}

/// Eigenvalues of `H~^{-1} B~` lie on `{1 + ix : |x| <= 1}`.
pub fn check_rbd_spectrum(b: &DenseBundle) -> CheckReport {
    run("rbd_spectrum", b, |r| {
        let x = solve(&b.h_tilde, &b.b_tilde)?;
        let eig = eigenvalues(&x)?;
        let re_dev = eig.iter().map(|z| (z.re - 1.0).abs()).fold(0.0, f64::max);
        let im_max = eig.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let e_norm = spectral_norm(&e_tilde(b)?);
        r.metric("max_abs_real_minus_1", re_dev);
        r.metric("max_abs_imag", im_max);
        r.metric("norm_e_tilde", e_norm);
        r.expect(re_dev <= 1e-10, || format!("real part deviates by {re_dev:e}"));
        r.expect(im_max <= 1.0 + 1e-10, || format!("|imag| reaches {im_max}"));
        r.expect(e_norm < 1.0, || format!("||E||_2 = {e_norm} not below 1"));
        Ok(())
    })
}

/// Nonzero eigenvalues of `H~_eps^{-1} H~ - I` predicted from `T0`: each half
/// contributes `eps mu^n / (1 - eps mu^n)` for every eigenvalue `1/mu` of `T0`.
fn predicted_deviations(b: &DenseBundle) -> Vec<f64> {
    let t0_eig = b.t0.clone().symmetric_eigen().eigenvalues;
    let one_half: Vec<f64> = t0_eig
        .iter()
        .map(|&l| {
            let q = b.eps * l.powi(-(b.n as i32));
            q / (1.0 - q)
        })
        .collect();
    one_half.iter().chain(one_half.iter()).copied().collect()
}

/// Low-rank structure of `H~_eps^{-1} H~ - I` and the size of its spectrum.
pub fn check_eps_perturbation(b: &DenseBundle, eta: f64) -> CheckReport {
    run("eps_perturbation", b, |r| {
        let (m, n) = (b.m, b.n);
        r.expect(b.eps > 0.0 && b.eps <= eta && eta < 1.0, || {
            format!("requires 0 < eps <= eta < 1 (eps = {}, eta = {eta})", b.eps)
        });
        let diff = &b.h_tilde - &b.h_tilde_eps;
        let dev = solve(&b.h_tilde_eps, &diff)?;

        let sv = dev.singular_values();
        let smax = sv.max();
        let rank = sv.iter().filter(|&&s| s > RANK_TOL * smax).count();
        r.metric("rank", rank as f64);
        r.expect(rank == 2 * m, || format!("rank {rank}, expected {}", 2 * m));

        let eig = eigenvalues(&dev)?;
        let max_dev = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let bound = b.eps / (1.0 - eta);
        r.metric("max_abs_lambda_minus_1", max_dev);
        r.metric("bound", bound);
        r.expect(max_dev <= bound + 1e-12, || format!("max |lambda - 1| = {max_dev:e} > {bound:e}"));

        // Deviations below the tolerance are counted as unit eigenvalues too;
        // for large alpha they reach 1e-20 and cannot be told apart from 1.
        let predicted = predicted_deviations(b);
        let unresolved = predicted.iter().filter(|d| d.abs() <= UNIT_EIGENVALUE_TOL).count();
        let ones = eig.iter().filter(|z| z.norm() <= UNIT_EIGENVALUE_TOL).count();
        let expected = 2 * (n - 1) * m + unresolved;
        r.metric("unit_eigenvalues", ones as f64);
        r.metric("unresolved_deviations", unresolved as f64);
        r.expect(ones == expected, || {
            format!("{ones} unit eigenvalues, expected {expected} ({unresolved} below tolerance)")
        });

        let mut got: Vec<f64> = eig.iter().map(|z| z.norm()).filter(|&v| v > UNIT_EIGENVALUE_TOL).collect();
        let mut want: Vec<f64> = predicted.iter().map(|d| d.abs()).filter(|&v| v > UNIT_EIGENVALUE_TOL).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        if got.len() == want.len() {
            let err = got.iter().zip(&want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
            r.metric("predicted_deviation_error", err);
            r.expect(err <= 1e-10 * (1.0 + bound), || format!("deviations differ from T0 prediction by {err:e}"));
        }
        Ok(())
    })
}

/// Identity `(C~_eps + aI)^{-1}(T~ + aI) = I + (T~ + aI)^{-1} E1 Z^{-1} En^T`,
/// its transposed counterpart, and the block structure of both corrections.
pub fn check_smw_identity(b: &DenseBundle) -> CheckReport {
    run("smw_identity", b, |r| {
        let (m, n) = (b.m, b.n);
        let dim = m * n;
        let id = DMatrix::<f64>::identity(dim, dim);
        let ai = &id * b.alpha;
        let z_inv = b
            .z_eps
            .clone()
            .try_inverse()
            .ok_or_else(|| crate::Error::InvalidParameter("singular Z_eps".into()))?;
        let t0_inv = sym_fn(&b.t0, |x| 1.0 / x);
        let t0_pow = |j: usize| {
            let mut p = DMatrix::<f64>::identity(m, m);
            for _ in 0..j {
                p = &p * &t0_inv;
            }
            p
        };

        for transposed in [false, true] {
            let tag = if transposed { "transpose" } else { "plain" };
            let (t, c, left, right) = if transposed {
                (b.t_tilde.transpose(), b.c_tilde_eps.transpose(), &b.en, &b.e1)
            } else {
                (b.t_tilde.clone(), b.c_tilde_eps.clone(), &b.e1, &b.en)
            };
            let lhs = solve(&(&c + &ai), &(&t + &ai))?;
            let corr = solve(&(&t + &ai), &(left * &z_inv * right.transpose()))?;
            let rhs = &id + &corr;
            let rel = (&lhs - &rhs).norm() / lhs.norm();
            r.metric(&format!("{tag}_relative_error"), rel);
            r.expect(rel <= 1e-11, || format!("{tag}: sides differ by {rel:e}"));

            // explicit block structure of the correction
            let mut expected = DMatrix::<f64>::zeros(dim, dim);
            let col = if transposed { 0 } else { n - 1 };
            for j in 0..n {
                let power = if transposed { n - j } else { j + 1 };
                expected
                    .view_mut((j * m, col * m), (m, m))
                    .copy_from(&(t0_pow(power) * &z_inv));
            }
            let scale = expected.norm().max(f64::MIN_POSITIVE);
            let rel_struct = (&lhs - &id - &expected).norm() / scale.max(1.0);
            r.metric(&format!("{tag}_structure_error"), rel_struct);
            r.expect(rel_struct <= 1e-11, || format!("{tag}: block structure off by {rel_struct:e}"));
        }
        Ok(())
    })
}

/// The three 2-norm bounds on the preconditioned operator.
pub fn check_norm_bounds(b: &DenseBundle, eta: f64) -> CheckReport {
    run("norm_bounds", b, |r| {
        let dim = b.m * b.n;
        let id = DMatrix::<f64>::identity(dim, dim);
        let ai = &id * b.alpha;
        let root_n = (b.n as f64).sqrt();
        let q = b.eps * root_n / (1.0 - eta);
        r.expect(b.eps <= eta, || format!("eps = {} exceeds eta = {eta}", b.eps));

        let c_inv_t = solve(&(&b.c_tilde_eps + &ai), &(&b.t_tilde + &ai))?;
        let n1 = spectral_norm(&(c_inv_t - &id));
        let pre = solve(&b.h_tilde_eps, &b.b_tilde)?;
        let n2 = spectral_norm(&pre);
        let big_id = DMatrix::<f64>::identity(2 * dim, 2 * dim);
        let n3 = spectral_norm(&symmetric_part(&(pre - big_id)));

        for (name, value, bound) in [
            ("c_inv_t_minus_i", n1, q),
            ("h_eps_inv_b", n2, 2f64.sqrt() * (1.0 + q)),
            ("sym_part_minus_i", n3, 2.0 * q),
        ] {
            r.metric(name, value);
            r.metric(&format!("{name}_bound"), bound);
            r.expect(value <= bound + 1e-12, || format!("{name} = {value:e} > {bound:e}"));
        }
        Ok(())
    })
}

/// Deterministic test vector.
pub(crate) fn probe_vector(len: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
    (0..len)
        .map(|_| {
            // splitmix64
            s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

fn gmres_history(op: DMatrix<f64>, pre: DMatrix<f64>, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let dim = op.nrows();
    let config = GmresConfig { tol: 1e-12, max_iter: dim, track_orthogonality: false };
    let (_, report) = gmres_solve(&DenseOperator(op), &DenseOperator(pre), rhs, &config)?;
    Ok((report.residual_history, report.initial_residual))
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen().eigenvalues;
    eig.max() / eig.min()
}

/// GMRES on `P_eps^{-1} A` stays below `sqrt(c0) rho(delta)^k`, and the
/// symmetric part of `H~_eps^{-1} B~` is bounded below by `1 - delta`.
pub fn check_gmres_rate(b: &DenseBundle, delta: f64) -> CheckReport {
    run("gmres_rate", b, |r| {
        let c_tau = crate::precond::c_tau(delta, b.tau, b.tau * b.n as f64);
        r.metric("delta", delta);
        r.metric("c_tau", c_tau);
        r.expect(b.eps <= c_tau * (1.0 + 1e-14), || format!("eps = {} exceeds c_tau = {c_tau}", b.eps));

        let pre = solve(&b.h_tilde_eps, &b.b_tilde)?;
        let lmin = symmetric_part(&pre).symmetric_eigen().eigenvalues.min();
        r.metric("lambda_min_sym", lmin);
        r.expect(lmin >= 1.0 - delta - 1e-12, || format!("lambda_min = {lmin} < 1 - delta"));

        let rho = gmres_rate(delta);
        let c0 = condition_number(&b.mass);
        r.metric("rho", rho);
        r.metric("c0", c0);

        let dim = b.dim();
        let p_inv = b
            .p_eps
            .clone()
            .try_inverse()
            .ok_or_else(|| crate::Error::InvalidParameter("singular P_eps".into()))?;
        let rhs = probe_vector(dim, 7);
        let (hist, _) = gmres_history(b.a.clone(), p_inv, &rhs)?;
        let mut worst = 0.0f64;
        for (k, &h) in hist.iter().enumerate() {
            let env = c0.sqrt() * rho.powi(k as i32);
            worst = worst.max(h / env);
        }
        r.metric("iterations", (hist.len() - 1) as f64);
        r.metric("max_ratio_to_envelope", worst);
        r.expect(worst <= 1.0 + 1e-10, || format!("residual exceeds envelope by factor {worst}"));

        // auxiliary system, where the bound holds without c0
        let id = DMatrix::<f64>::identity(dim, dim);
        let (hist_aux, _) = gmres_history(pre, id, &rhs)?;
        let worst_aux = hist_aux
            .iter()
            .enumerate()
            .map(|(k, &h)| h / rho.powi(k as i32))
            .fold(0.0, f64::max);
        r.metric("aux_max_ratio_to_envelope", worst_aux);
        r.expect(worst_aux <= 1.0 + 1e-10, || format!("auxiliary residual exceeds envelope by {worst_aux}"));
        Ok(())
    })
}

/// `||r_j|| <= sqrt(2) ||W^{-1/2}|| ||r~_j||` between GMRES on the
/// preconditioned system and on the auxiliary system `H~_eps^{-1} B~ x~ = b~`.
pub fn check_residual_relation(b: &DenseBundle) -> CheckReport {
    run("residual_relation", b, |r| {
        let dim = b.dim();
        let id = DMatrix::<f64>::identity(dim, dim);
        let rhs = DVector::from_vec(probe_vector(dim, 11));
        let p_inv = b
            .p_eps
            .clone()
            .try_inverse()
            .ok_or_else(|| crate::Error::InvalidParameter("singular P_eps".into()))?;
        let (hist, r0) = gmres_history(b.a.clone(), p_inv, rhs.as_slice())?;

        let aux = solve(&b.h_tilde_eps, &b.b_tilde)?;
        let wb = &b.w_inv_half * &rhs;
        let b_aux = solve(&b.h_tilde_eps, &DMatrix::from_column_slice(wb.len(), 1, wb.as_slice()))?;
        let (hist_aux, r0_aux) = gmres_history(aux, id, b_aux.as_slice())?;

        let factor = 2f64.sqrt() * spectral_norm(&b.w_inv_half);
        r.metric("factor", factor);
        let common = hist.len().min(hist_aux.len());
        let mut worst = 0.0f64;
        for j in 1..common {
            let rj = hist[j] * r0;
            let rt = hist_aux[j] * r0_aux;
            // past the noise floor the comparison says nothing
            if rt <= 1e-10 * r0_aux {
                break;
            }
            worst = worst.max(rj / (factor * rt));
        }
        r.metric("compared_steps", common.saturating_sub(1) as f64);
        r.metric("max_ratio", worst);
        r.expect(worst <= 1.0 + 1e-9, || format!("relation violated by factor {worst}"));
        Ok(())
    })
}

/// FFT-based `P_eps^{-1}` against dense LU on `P_eps`, with and without the
/// conjugate-symmetry shortcut. Uses the constant-coefficient Laplacian.
pub fn check_preconditioner_equivalence(
    m1: usize,
    n: usize,
    gamma: f64,
    eps: f64,
    horizon: f64,
) -> CheckReport {
    let config = format!("m1={m1} n={n} gamma={gamma:e} eps={eps:.4e}");
    let mut r = CheckReport::new("preconditioner_equivalence", config.clone());
    let body = |r: &mut CheckReport| -> Result<()> {
        let grid = TimeSpaceGrid::new(m1, n, horizon)?;
        let ops = build_stiffness(&grid, |_, _| 1.0)?;
        let bundle = DenseBundle::new(
            n,
            gamma,
            grid.tau,
            eps,
            ops.mass.to_dense(),
            ops.stiffness.to_dense(),
        )?;
        let inner = Arc::new(DstShiftedSolver::new(&grid, &ops)?);
        let mut worst = 0.0f64;
        for conj in [true, false] {
            let p = RbdEpsPreconditioner::for_grid(&grid, gamma, eps, inner.clone(), conj)?;
            for seed in 0..3 {
                let v = probe_vector(bundle.dim(), 100 + seed);
                let fast = p.apply_inverse(&v)?;
                let exact = bundle.p_eps_solve(&v)?;
                let num: f64 = fast.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let den: f64 = exact.iter().map(|a| a * a).sum::<f64>().sqrt();
                worst = worst.max(num / den);
            }
        }
        r.metric("max_relative_error", worst);
        r.expect(worst <= 1e-10, || format!("relative error {worst:e}"));
        Ok(())
    };
    if let Err(e) = body(&mut r) {
        return CheckReport::error("preconditioner_equivalence", config, e);
    }
    r
}
