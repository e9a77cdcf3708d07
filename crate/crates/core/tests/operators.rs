use allatonce::validation::{tridiagonal_mass, DenseBundle};
use allatonce::*;
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_vec(rng: &mut StdRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

fn grid_stiffness(m: usize) -> DMatrix<f64> {
    let m1 = (m as f64).sqrt().round() as usize;
    let grid = TimeSpaceGrid::new(m1, 1, 1.0).unwrap();
    build_stiffness(&grid, |x1, x2| 1.0 + x1 * x2).unwrap().stiffness.to_dense()
}

fn dense_a(k: &DMatrix<f64>, mass: &DMatrix<f64>, n: usize, tau: f64, gamma: f64) -> DMatrix<f64> {
    DenseBundle::new(n, gamma, tau, 0.5, mass.clone(), k.clone()).unwrap().a
}

#[test]
fn apply_a_matches_dense_assembly() {
    let mut rng = StdRng::seed_from_u64(1);
    for m in [1, 4, 9] {
        for n in [1, 2, 4] {
            let k = grid_stiffness(m);
            for mass in [DMatrix::identity(m, m), tridiagonal_mass(m, 2.0, 0.5)] {
                let tau = 1.0 / n as f64;
                let gamma: f64 = 1e-2;
                let op = AllAtOnceOperator::from_parts(
                    CsrMatrix::from_dense(&k),
                    CsrMatrix::from_dense(&mass),
                    tau,
                    n,
                    tau / gamma.sqrt(),
                )
                .unwrap();
                let dense = dense_a(&k, &mass, n, tau, gamma);
                for _ in 0..10 {
                    let v = random_vec(&mut rng, 2 * m * n);
                    let fast = op.apply_vec(&v).unwrap();
                    let exact = &dense * DVector::from_column_slice(&v);
                    assert!(rel_err(&fast, exact.as_slice()) <= 1e-12, "m={m} n={n}");
                }
            }
        }
    }
}

#[test]
fn apply_t_and_transpose_match_kronecker_oracle() {
    let mut rng = StdRng::seed_from_u64(2);
    let (m, n, tau) = (9, 4, 0.25);
    let k = grid_stiffness(m);
    let mass = tridiagonal_mass(m, 2.0, 0.8);
    let op = AllAtOnceOperator::from_parts(
        CsrMatrix::from_dense(&k),
        CsrMatrix::from_dense(&mass),
        tau,
        n,
        1.0,
    )
    .unwrap();
    let bn = build_time_difference(n).unwrap().to_dense();
    let t = bn.kronecker(&mass) + DMatrix::<f64>::identity(n, n).kronecker(&k) * tau;
    let u = random_vec(&mut rng, m * n);
    let v = random_vec(&mut rng, m * n);
    let mut tu = vec![0.0; m * n];
    let mut ttv = vec![0.0; m * n];
    op.apply_t(&u, &mut tu).unwrap();
    op.apply_t_transpose(&v, &mut ttv).unwrap();
    let tu_exact = &t * DVector::from_column_slice(&u);
    let ttv_exact = t.transpose() * DVector::from_column_slice(&v);
    assert!(rel_err(&tu, tu_exact.as_slice()) <= 1e-13);
    assert!(rel_err(&ttv, ttv_exact.as_slice()) <= 1e-13);

    let lhs: f64 = tu.iter().zip(&v).map(|(a, b)| a * b).sum();
    let rhs: f64 = u.iter().zip(&ttv).map(|(a, b)| a * b).sum();
    assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs().max(rhs.abs()));
}

#[test]
fn skew_part_vanishes_in_quadratic_form() {
    let mut rng = StdRng::seed_from_u64(3);
    let (m, n, tau, gamma) = (9, 4, 0.25, 1e-3_f64);
    let k = grid_stiffness(m);
    let mass = tridiagonal_mass(m, 2.0, 0.5);
    let alpha = tau / gamma.sqrt();
    let op = AllAtOnceOperator::from_parts(
        CsrMatrix::from_dense(&k),
        CsrMatrix::from_dense(&mass),
        tau,
        n,
        alpha,
    )
    .unwrap();
    assert!((op.alpha * gamma.sqrt() - tau).abs() <= 1e-16);
    let w = DMatrix::<f64>::identity(2 * n, 2 * n).kronecker(&mass);
    for _ in 0..5 {
        let v = random_vec(&mut rng, 2 * m * n);
        let av = op.apply_vec(&v).unwrap();
        let q: f64 = av.iter().zip(&v).map(|(a, b)| a * b).sum();
        let vv = DVector::from_column_slice(&v);
        let weighted = alpha * vv.dot(&(&w * &vv));
        assert!((q - weighted).abs() <= 1e-12 * weighted);
    }
}

#[test]
fn decoupled_chain_entrywise() {
    // K = 0, M = I: A = [[aI, B^T (x) I], [-B (x) I, aI]]
    let (m, n, alpha) = (2, 3, 0.7);
    let op = AllAtOnceOperator::from_parts(CsrMatrix::zeros(m), CsrMatrix::identity(m), 0.1, n, alpha)
        .unwrap();
    let v: Vec<f64> = (0..2 * m * n).map(|i| (i + 1) as f64).collect();
    let out = op.apply_vec(&v).unwrap();
    let (top, bot) = v.split_at(m * n);
    for k in 0..n {
        for i in 0..m {
            let idx = k * m + i;
            let next = if k + 1 < n { bot[idx + m] } else { 0.0 };
            let prev = if k > 0 { top[idx - m] } else { 0.0 };
            assert!((out[idx] - (alpha * top[idx] + bot[idx] - next)).abs() <= 1e-13);
            assert!((out[m * n + idx] - (-(top[idx] - prev) + alpha * bot[idx])).abs() <= 1e-13);
        }
    }
}

#[test]
fn length_mismatch_is_an_error() {
    let op = AllAtOnceOperator::from_parts(CsrMatrix::identity(2), CsrMatrix::identity(2), 0.5, 2, 1.0)
        .unwrap();
    let mut out = vec![0.0; 8];
    assert!(matches!(op.apply(&[0.0; 7], &mut out), Err(Error::LengthMismatch { .. })));
    let mut short = vec![0.0; 3];
    assert!(op.apply_t(&[0.0; 4], &mut short).is_err());
}
