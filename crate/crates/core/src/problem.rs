//! Problem definitions: coefficient, data and optional closed-form solutions.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type SpaceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Tracking-type parabolic optimal control problem on the unit square with
/// homogeneous Dirichlet boundary data.
#[derive(Clone)]
pub struct ParabolicControlProblem {
    pub name: String,
    /// Regularization weight of the control cost.
    pub gamma: f64,
    pub horizon: f64,
    /// Diffusion coefficient `a(x)` of `div(a grad)`.
    pub a: SpaceFn,
    /// State source.
    pub f: SpaceTimeFn,
    /// Target trajectory.
    pub g: SpaceTimeFn,
    /// Initial state.
    pub y0: SpaceFn,
    pub exact_y: Option<SpaceTimeFn>,
    pub exact_p: Option<SpaceTimeFn>,
}

impl fmt::Debug for ParabolicControlProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParabolicControlProblem")
            .field("name", &self.name)
            .field("gamma", &self.gamma)
            .field("horizon", &self.horizon)
            .field("has_exact", &self.has_exact_solution())
            .finish()
    }
}

impl ParabolicControlProblem {
    pub fn has_exact_solution(&self) -> bool {
        self.exact_y.is_some() && self.exact_p.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma = {}", self.gamma)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon = {}", self.horizon)));
        }
        Ok(())
    }
}

/// Names accepted by [`problem_by_name`].
pub const REGISTERED_PROBLEMS: &[&str] = &["example1", "example2"];

/// Looks up a registered problem. `"1"`/`"2"` are accepted as aliases.
pub fn problem_by_name(name: &str, gamma: f64) -> Result<ParabolicControlProblem> {
    let p = match name {
        "example1" | "1" => example1(gamma),
        "example2" | "2" => example2(gamma),
        other => {
            return Err(Error::Config(format!(
                "unknown problem '{other}', expected one of {REGISTERED_PROBLEMS:?}"
            )))
        }
    };
    p.validate()?;
    Ok(p)
}

fn sin_sin(x1: f64, x2: f64) -> f64 {
    (PI * x1).sin() * (PI * x2).sin()
}

/// Constant unit diffusion, `y = exp(-t) sin(pi x1) sin(pi x2)`, `p = 0`.
pub fn example1(gamma: f64) -> ParabolicControlProblem {
    ParabolicControlProblem {
        name: "example1".into(),
        gamma,
        horizon: 1.0,
        a: Arc::new(|_, _| 1.0),
        f: Arc::new(|x1, x2, t| (2.0 * PI * PI - 1.0) * (-t).exp() * sin_sin(x1, x2)),
        g: Arc::new(|x1, x2, t| (-t).exp() * sin_sin(x1, x2)),
        y0: Arc::new(sin_sin),
        exact_y: Some(Arc::new(|x1, x2, t| (-t).exp() * sin_sin(x1, x2))),
        exact_p: Some(Arc::new(|_, _, _| 0.0)),
    }
}

const EX2_SCALE: f64 = 1e-5;

/// Variable diffusion `a = 1e-5 sin(pi x1 x2)` with
/// `y = exp(-t) x1(1-x1) x2(1-x2)` and `p = gamma sin(pi t) sin(pi x1) sin(pi x2)`.
///
/// `f` and `g` are the residuals of the optimality system at the exact pair.
pub fn example2(gamma: f64) -> ParabolicControlProblem {
    let bubble = |x1: f64, x2: f64| x1 * (1.0 - x1) * x2 * (1.0 - x2);
    ParabolicControlProblem {
        name: "example2".into(),
        gamma,
        horizon: 1.0,
        a: Arc::new(|x1, x2| EX2_SCALE * (PI * x1 * x2).sin()),
        f: Arc::new(|x1, x2, t| {
            let u = x1 * (1.0 - x1);
            let v = x2 * (1.0 - x2);
            let s = (PI * x1 * x2).sin();
            let c = (PI * x1 * x2).cos();
            let e = (-t).exp();
            -(PI * t).sin() * sin_sin(x1, x2)
                + e * u * (2.0 * EX2_SCALE * s - v - EX2_SCALE * PI * c * x1 * (1.0 - 2.0 * x2))
                + e * v * (2.0 * EX2_SCALE * s - EX2_SCALE * PI * c * x2 * (1.0 - 2.0 * x1))
        }),
        g: Arc::new(move |x1, x2, t| {
            let s = (PI * x1 * x2).sin();
            let c = (PI * x1 * x2).cos();
            let bracket = -2.0 * s * sin_sin(x1, x2)
                + c * (x1 * (PI * x1).sin() * (PI * x2).cos()
                    + x2 * (PI * x1).cos() * (PI * x2).sin());
            -gamma * PI * (PI * t).cos() * sin_sin(x1, x2)
                + (-t).exp() * x1 * (1.0 - x1) * x2 * (1.0 - x2)
                - EX2_SCALE * gamma * PI * PI * (PI * t).sin() * bracket
        }),
        y0: Arc::new(bubble),
        exact_y: Some(Arc::new(move |x1, x2, t| (-t).exp() * bubble(x1, x2))),
        exact_p: Some(Arc::new(move |x1, x2, t| {
            gamma * (PI * t).sin() * sin_sin(x1, x2)
        })),
    }
}
