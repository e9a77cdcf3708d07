use std::path::PathBuf;
use std::process::ExitCode;

use allatonce::validation::{run_suite, ValidationGrid};
use allatonce::{
    emit_output, parse_h, render_table, run_experiment, EpsilonPolicy, ExperimentSpec, InnerSolverKind,
    MultigridConfig, OutputFormat,
};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(version, about = "All-at-once parabolic optimal control solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a registered example over a grid of (h, gamma).
    Solve(SolveArgs),
    /// Run the dense spectral validation suite.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Example number or name (1, 2, example1, example2).
    #[arg(long, default_value = "1")]
    example: String,
    /// Mesh sizes, e.g. 2^-5,2^-6 or 1/32.
    #[arg(long, value_delimiter = ',', default_values_t = ["2^-5".to_string(), "2^-6".to_string()])]
    h: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = allatonce::experiment::DEFAULT_GAMMAS.to_vec())]
    gamma: Vec<f64>,
    /// Shifted-system solver: dst or mg.
    #[arg(long, default_value = "dst")]
    inner: InnerSolverKind,
    /// half_tau, c_tau(DELTA) or fixed(VALUE).
    #[arg(long, default_value = "half_tau")]
    epsilon: EpsilonPolicy,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    #[arg(long, default_value_t = MultigridConfig::default().pre_smooth)]
    pre_smooth: usize,
    #[arg(long, default_value_t = MultigridConfig::default().post_smooth)]
    post_smooth: usize,
    /// Solve every time frequency instead of mirroring conjugate pairs.
    #[arg(long)]
    no_conjugacy: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or text.
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Run (gamma, h) cells concurrently.
    #[arg(long)]
    parallel: bool,
    /// Permit h finer than 2^-6.
    #[arg(long)]
    allow_large: bool,
    /// TOML file; keys present there override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Write the full JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn spec_from_flags(a: &SolveArgs) -> Result<ExperimentSpec> {
    let h = a.h.iter().map(|s| parse_h(s)).collect::<allatonce::Result<Vec<_>>>()?;
    Ok(ExperimentSpec {
        example: a.example.clone(),
        h,
        gamma: a.gamma.clone(),
        epsilon: a.epsilon,
        inner: a.inner,
        multigrid: MultigridConfig { pre_smooth: a.pre_smooth, post_smooth: a.post_smooth, ..Default::default() },
        exploit_conjugacy: !a.no_conjugacy,
        tol: a.tol,
        max_iter: a.max_iter,
        out: a.out.clone(),
        format: a.format,
        parallel: a.parallel,
        allow_large: a.allow_large,
    })
}

/// Overlays the keys of a TOML config onto the flag values. `h` entries may
/// be strings like `"2^-5"`.
fn apply_config(spec: ExperimentSpec, text: &str) -> Result<ExperimentSpec> {
    let mut base = toml::Table::try_from(&spec).context("serializing flags")?;
    let mut overlay: toml::Table = text.parse().context("parsing config")?;
    if let Some(toml::Value::Array(hs)) = overlay.get_mut("h") {
        for v in hs.iter_mut() {
            if let toml::Value::String(s) = v {
                *v = toml::Value::Float(parse_h(s)?);
            }
        }
    }
    if let Some(toml::Value::Integer(k)) = overlay.get("example") {
        let k = k.to_string();
        overlay.insert("example".into(), toml::Value::String(k));
    }
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(dst)), toml::Value::Table(src)) if key == "multigrid" => dst.extend(src),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
    base.try_into().context("invalid config")
}

fn solve(args: SolveArgs) -> Result<ExitCode> {
    let mut spec = spec_from_flags(&args)?;
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        spec = apply_config(spec, &text)?;
    }
    let table = run_experiment(&spec)?;
    match &spec.out {
        Some(path) => {
            emit_output(&table, spec.format, path)?;
            print!("{}", render_table(&table, OutputFormat::Text));
        }
        None => print!("{}", render_table(&table, spec.format)),
    }
    let failed: Vec<_> = table.rows.iter().filter(|r| !r.converged).collect();
    for r in &failed {
        eprintln!(
            "not converged: gamma={:e} h={} after {} iterations (residual {:.2e})",
            r.gamma, r.h, r.iter, r.final_residual
        );
    }
    Ok(if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn validate(args: ValidateArgs) -> Result<ExitCode> {
    let report = run_suite(&ValidationGrid::default());
    println!("{:<28} {:>6} {:>7}  status", "check", "runs", "failed");
    for s in report.summary() {
        let status = if s.failed == 0 { "PASS" } else { "FAIL" };
        println!("{:<28} {:>6} {:>7}  {status}", s.check, s.runs, s.failed);
    }
    for f in report.failures() {
        println!("  {} [{}]: {}", f.check, f.config, f.failures.join("; "));
    }
    println!("wall time {:.2}s", report.wall_time);
    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&report)?;
        std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    }
    if report.checks.is_empty() {
        bail!("validation grid is empty");
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Solve(a) => solve(a),
        Command::Validate(a) => validate(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
