//! Experiment driver: one GMRES solve per `(gamma, h)` cell.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmres::{gmres_solve, GmresConfig, SolveReport};
use crate::grid::{assemble_rhs, build_stiffness, error_norm, unscale_solution, TimeSpaceGrid};
use crate::operators::AllAtOnceOperator;
use crate::precond::{
    build_inner_solver, EpsilonPolicy, InnerSolverKind, MultigridConfig, RbdEpsPreconditioner,
};
use crate::problem::{problem_by_name, ParabolicControlProblem};

/// Finest mesh width run without `allow_large`.
pub const FINEST_DEFAULT_H: f64 = 1.0 / 64.0;

pub const DEFAULT_GAMMAS: [f64; 6] = [1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Text,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "text" | "aligned" => Ok(Self::Text),
            _ => Err(Error::Config(format!("unknown output format '{s}' (csv|text)"))),
        }
    }
}

/// Solver options shared by every cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub epsilon: EpsilonPolicy,
    pub inner: InnerSolverKind,
    pub multigrid: MultigridConfig,
    pub exploit_conjugacy: bool,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            epsilon: EpsilonPolicy::HalfTau,
            inner: InnerSolverKind::Dst,
            multigrid: MultigridConfig::default(),
            exploit_conjugacy: true,
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Registered problem name (`example1`, `example2`, or `1`/`2`).
    pub example: String,
    pub h: Vec<f64>,
    pub gamma: Vec<f64>,
    pub epsilon: EpsilonPolicy,
    pub inner: InnerSolverKind,
    pub multigrid: MultigridConfig,
    pub exploit_conjugacy: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    /// Run cells concurrently.
    pub parallel: bool,
    /// Permit `h` finer than [`FINEST_DEFAULT_H`].
    pub allow_large: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let d = SolverSettings::default();
        Self {
            example: "example1".into(),
            h: vec![1.0 / 32.0, 1.0 / 64.0],
            gamma: DEFAULT_GAMMAS.to_vec(),
            epsilon: d.epsilon,
            inner: d.inner,
            multigrid: d.multigrid,
            exploit_conjugacy: d.exploit_conjugacy,
            tol: d.tol,
            max_iter: d.max_iter,
            out: None,
            format: OutputFormat::Csv,
            parallel: false,
            allow_large: false,
        }
    }
}

/// Parses `2^-5`, `1/32` or `0.03125`.
pub fn parse_h(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse mesh width '{s}'"));
    let v = if let Some(e) = s.strip_prefix("2^") {
        let e: i32 = e.trim_matches(|c| c == '(' || c == ')').parse().map_err(|_| bad())?;
        2f64.powi(e)
    } else if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        a / b
    } else {
        s.parse().map_err(|_| bad())?
    };
    Ok(v)
}

/// `k` with `h = 2^-k`, if there is one.
pub fn negative_power_of_two(h: f64) -> Option<u32> {
    if !(h > 0.0 && h < 1.0) {
        return None;
    }
    let k = (-h.log2()).round();
    (k >= 1.0 && h == 2f64.powi(-(k as i32))).then_some(k as u32)
}

impl ExperimentSpec {
    pub fn solver(&self) -> SolverSettings {
        SolverSettings {
            epsilon: self.epsilon,
            inner: self.inner,
            multigrid: self.multigrid,
            exploit_conjugacy: self.exploit_conjugacy,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for &h in &self.h {
            if negative_power_of_two(h).is_none() {
                return Err(Error::Config(format!("h = {h} is not a negative power of two")));
            }
            if h < FINEST_DEFAULT_H && !self.allow_large {
                return Err(Error::Config(format!(
                    "h = {h} is finer than {FINEST_DEFAULT_H}; set allow_large to run it"
                )));
            }
        }
        for &g in &self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("gamma = {g} must be positive")));
            }
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("tol = {} not in (0, 1)", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub gamma: f64,
    pub h: f64,
    pub dof: usize,
    pub iter: usize,
    pub cpu_s: f64,
    pub e_h: Option<f64>,
    pub converged: bool,
    pub final_residual: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub example: String,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }
}

/// Outcome of a single solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub grid: TimeSpaceGrid,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    pub eps: f64,
    pub report: SolveReport,
}

/// Assembles and solves the all-at-once system for `problem` on mesh `h`.
/// `report.wall_time` covers the GMRES iteration only.
pub fn solve_problem(
    problem: &ParabolicControlProblem,
    h: f64,
    settings: &SolverSettings,
) -> Result<Solution> {
    problem.validate()?;
    let grid = TimeSpaceGrid::from_h(h, problem.horizon)?;
    let a = problem.a.clone();
    let ops = build_stiffness(&grid, move |x1, x2| a(x1, x2))?;
    let eps = settings.epsilon.resolve(grid.tau, grid.horizon)?;
    let inner = build_inner_solver(settings.inner, &grid, &ops, problem, settings.multigrid)?;
    let precond =
        RbdEpsPreconditioner::for_grid(&grid, problem.gamma, eps, inner, settings.exploit_conjugacy)?;
    let op = AllAtOnceOperator::new(&grid, &ops, problem.gamma)?;
    let rhs = assemble_rhs(problem, &grid, &ops)?;
    let config = GmresConfig { tol: settings.tol, max_iter: settings.max_iter, track_orthogonality: false };
    let (x, mut report) = gmres_solve(&op, &precond, &rhs, &config)?;
    let (y, p) = unscale_solution(&x, problem.gamma);
    if problem.has_exact_solution() {
        report.e_h = Some(error_norm(&y, &p, problem, &grid)?);
    }
    Ok(Solution { grid, y, p, eps, report })
}

fn check_compatibility(spec: &ExperimentSpec) -> Result<()> {
    if spec.inner != InnerSolverKind::Dst {
        return Ok(());
    }
    let probe_gamma = spec.gamma.first().copied().unwrap_or(1.0);
    let problem = problem_by_name(&spec.example, probe_gamma)?;
    for &h in &spec.h {
        let grid = TimeSpaceGrid::from_h(h, problem.horizon)?;
        let a = problem.a.clone();
        let ops = build_stiffness(&grid, move |x1, x2| a(x1, x2))?;
        if ops.constant_coefficient.is_none() {
            return Err(Error::Config(format!(
                "inner solver 'dst' needs a constant coefficient, '{}' has a variable one",
                problem.name
            )));
        }
    }
    Ok(())
}

/// Runs every `(gamma, h)` cell, gamma-major. Incompatible solver settings
/// are reported before anything is solved.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let name = problem_by_name(&spec.example, 1.0)?.name;
    check_compatibility(spec)?;
    let cells: Vec<(f64, f64)> = spec
        .gamma
        .iter()
        .flat_map(|&g| spec.h.iter().map(move |&h| (g, h)))
        .collect();
    let settings = spec.solver();
    let run_cell = |&(gamma, h): &(f64, f64)| -> Result<ResultRow> {
        let problem = problem_by_name(&spec.example, gamma)?;
        let sol = solve_problem(&problem, h, &settings)?;
        Ok(ResultRow {
            gamma,
            h,
            dof: sol.grid.dof(),
            iter: sol.report.iterations,
            cpu_s: sol.report.wall_time,
            e_h: sol.report.e_h,
            converged: sol.report.converged,
            final_residual: sol.report.final_residual(),
        })
    };
    let rows: Result<Vec<ResultRow>> = if spec.parallel {
        cells.par_iter().map(run_cell).collect()
    } else {
        cells.iter().map(run_cell).collect()
    };
    Ok(ResultTable { example: name, rows: rows? })
}

pub const CSV_HEADER: &str = "gamma,h,dof,iter,cpu_s,e_h,e_h_raw";

fn fmt_opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map(f).unwrap_or_default()
}

/// Renders the table as CSV or as aligned text.
pub fn render_table(table: &ResultTable, format: OutputFormat) -> String {
    let mut s = String::new();
    match format {
        OutputFormat::Csv => {
            s.push_str(CSV_HEADER);
            s.push('\n');
            for r in &table.rows {
                let _ = writeln!(
                    s,
                    "{:e},{:e},{},{},{:.3},{},{}",
                    r.gamma,
                    r.h,
                    r.dof,
                    r.iter,
                    r.cpu_s,
                    fmt_opt(r.e_h, |e| format!("{e:.2e}")),
                    fmt_opt(r.e_h, |e| format!("{e:e}")),
                );
            }
        }
        OutputFormat::Text => {
            let _ = writeln!(
                s,
                "{:>8} {:>10} {:>9} {:>5} {:>9} {:>9}",
                "gamma", "h", "dof", "iter", "cpu_s", "e_h"
            );
            for r in &table.rows {
                let _ = writeln!(
                    s,
                    "{:>8} {:>10} {:>9} {:>5} {:>9.3} {:>9}",
                    format!("{:e}", r.gamma),
                    format!("{:e}", r.h),
                    r.dof,
                    r.iter,
                    r.cpu_s,
                    fmt_opt(r.e_h, |e| format!("{e:.2e}")),
                );
            }
        }
    }
    s
}

/// Writes the rendered table to `path`.
pub fn emit_output(table: &ResultTable, format: OutputFormat, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    file.write_all(render_table(table, format).as_bytes())
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}
