//! Desk-scale dense verification of the preconditioner theory.
//!
//! Every matrix is assembled explicitly, so sizes are kept to a few hundred.

mod checks;
mod dense;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

pub use checks::{
    check_eps_perturbation, check_gmres_rate, check_norm_bounds, check_preconditioner_equivalence,
    check_rbd_spectrum, check_residual_relation, check_smw_identity, CheckReport, RANK_TOL,
    UNIT_EIGENVALUE_TOL,
};
pub use dense::{tridiagonal_mass, DenseBundle, DenseOperator};

use crate::error::Result;
use crate::grid::{build_stiffness, TimeSpaceGrid};
use crate::precond::EpsilonPolicy;

/// Mass matrices used by the suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MassFixture {
    Identity,
    /// `tridiag(off, 2, off)`, condition number at most `(2 + 2 off) / (2 - 2 off)`.
    Tridiagonal { off: f64 },
}

impl MassFixture {
    pub fn build(&self, m: usize) -> DMatrix<f64> {
        match *self {
            Self::Identity => DMatrix::identity(m, m),
            Self::Tridiagonal { off } => tridiagonal_mass(m, 2.0, off),
        }
    }
}

/// Parameter grid swept by [`run_suite`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationGrid {
    pub m1: Vec<usize>,
    pub n: Vec<usize>,
    pub gamma: Vec<f64>,
    pub policies: Vec<EpsilonPolicy>,
    pub masses: Vec<MassFixture>,
    pub eta: f64,
    pub horizon: f64,
}

impl Default for ValidationGrid {
    fn default() -> Self {
        Self {
            m1: vec![1, 3],
            n: vec![2, 4, 8],
            gamma: vec![1e-8, 1e-4, 1.0],
            policies: vec![EpsilonPolicy::HalfTau, EpsilonPolicy::CTau { delta: 0.5 }],
            masses: vec![
                MassFixture::Identity,
                MassFixture::Tridiagonal { off: 0.5 },
                MassFixture::Tridiagonal { off: 0.8 },
            ],
            eta: 0.5,
            horizon: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckReport>,
    pub wall_time: f64,
}

/// Per-check pass counts.
#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub check: String,
    pub runs: usize,
    pub failed: usize,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn summary(&self) -> Vec<CheckSummary> {
        let mut out: Vec<CheckSummary> = Vec::new();
        for c in &self.checks {
            let entry = match out.iter_mut().find(|s| s.check == c.check) {
                Some(e) => e,
                None => {
                    out.push(CheckSummary { check: c.check.clone(), runs: 0, failed: 0 });
                    out.last_mut().unwrap()
                }
            };
            entry.runs += 1;
            entry.failed += usize::from(!c.passed);
        }
        out
    }
}

/// The `delta` for which `eps = c_tau(delta)`.
fn delta_for(eps: f64, tau: f64, horizon: f64) -> f64 {
    2.0 * eps * horizon.sqrt() / (tau.sqrt() * (1.0 - eps))
}

#[derive(Debug, Clone, Copy)]
struct Case {
    m1: usize,
    n: usize,
    gamma: f64,
    policy: EpsilonPolicy,
    mass: MassFixture,
}

fn run_case(case: Case, grid: &ValidationGrid) -> Vec<CheckReport> {
    let result = (|| -> Result<Vec<CheckReport>> {
        let tg = TimeSpaceGrid::new(case.m1, case.n, grid.horizon)?;
        let eps = case.policy.resolve(tg.tau, grid.horizon)?;
        let ops = build_stiffness(&tg, |_, _| 1.0)?;
        let bundle = DenseBundle::new(
            case.n,
            case.gamma,
            tg.tau,
            eps,
            case.mass.build(tg.m),
            ops.stiffness.to_dense(),
        )?;
        let mut out = vec![
            check_rbd_spectrum(&bundle),
            check_eps_perturbation(&bundle, grid.eta),
            check_smw_identity(&bundle),
            check_norm_bounds(&bundle, grid.eta),
        ];
        let delta = match case.policy {
            EpsilonPolicy::CTau { delta } => Some(delta),
            _ => Some(delta_for(eps, tg.tau, grid.horizon)).filter(|d| *d < 1.0),
        };
        if let Some(delta) = delta {
            out.push(check_gmres_rate(&bundle, delta));
        }
        if case.mass == MassFixture::Identity {
            out.push(check_preconditioner_equivalence(
                case.m1,
                case.n,
                case.gamma,
                eps,
                grid.horizon,
            ));
        } else {
            out.push(check_residual_relation(&bundle));
        }
        Ok(out)
    })();
    result.unwrap_or_else(|e| {
        vec![CheckReport {
            check: "setup".into(),
            config: format!("{case:?}"),
            passed: false,
            metrics: Default::default(),
            failures: vec![e.to_string()],
        }]
    })
}

/// Runs every check over the grid. Checks are independent and run in parallel.
pub fn run_suite(grid: &ValidationGrid) -> ValidationReport {
    let start = std::time::Instant::now();
    let mut cases = Vec::new();
    for &m1 in &grid.m1 {
        for &n in &grid.n {
            for &gamma in &grid.gamma {
                for &policy in &grid.policies {
                    for &mass in &grid.masses {
                        cases.push(Case { m1, n, gamma, policy, mass });
                    }
                }
            }
        }
    }
    let checks: Vec<CheckReport> = cases
        .into_par_iter()
        .flat_map_iter(|c| run_case(c, grid))
        .collect();
    ValidationReport { checks, wall_time: start.elapsed().as_secs_f64() }
}
