//! Smooth nonlinear programs
//!
//! ```txt
//!   minimize or maximize  φ(x)
//!   subject to            l_c ≤ c(x) ≤ u_c,   ℓ ≤ x ≤ u
//! ```
//!
//! A [`Problem`] owns the bounds and start point and forwards evaluations to
//! an [`Evaluator`], counting every call. Solvers consume problems through the
//! [`Nlp`] trait, which always presents a minimization.

mod problem;
mod slack;

use alloc::vec::Vec;

pub use problem::{CounterSnapshot, Counters, Evaluator, Problem, ProblemBuilder, Sense};
pub use slack::{to_slack_form, SlackMap};

use crate::linalg::Triplets;

/// Infinite bound sentinel.
pub const INF: f64 = f64::INFINITY;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("non-finite value in {what}")]
    Domain { what: &'static str },
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("{what} has length {got}, expected {expected}")]
    BadDimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("lower bound exceeds upper bound for {what} {index}")]
    CrossedBounds { what: &'static str, index: usize },
    #[error("NaN in {what}")]
    NotANumber { what: &'static str },
}

/// A primal-dual point for a problem with `n` variables and `m` constraints.
///
/// `y` uses the convention `∇φ − Jᵀy − z = 0` (for a minimization), and the
/// bound multipliers are split into nonnegative lower and upper parts with
/// `z = z_lower − z_upper`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Point {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z_lower: Vec<f64>,
    pub z_upper: Vec<f64>,
}

impl Point {
    pub fn z(&self) -> Vec<f64> {
        self.z_lower
            .iter()
            .zip(&self.z_upper)
            .map(|(l, u)| l - u)
            .collect()
    }
}

/// How a model is laid out, so the interior-point solver can exploit the
/// residual block of an NCL subproblem.
pub enum Structure<'a> {
    Plain,
    /// Variables are `(x, r)` with `r` the trailing `m` entries; objective is
    /// `f(x) + yᵀr + ½ρ‖r‖²` and constraints `c(x) + r`, where `f` and `c` come
    /// from `inner` (minimization view).
    Residual {
        inner: &'a Problem,
        y: &'a [f64],
        rho: f64,
    },
}

/// Evaluation interface seen by solvers. Always a minimization.
///
/// `hess` returns `σ ∇²f(x) − Σ yᵢ ∇²cᵢ(x)` in lower-triangle storage.
pub trait Nlp {
    fn name(&self) -> &str;
    fn n(&self) -> usize;
    fn m(&self) -> usize;
    fn x0(&self) -> &[f64];
    fn var_lower(&self) -> &[f64];
    fn var_upper(&self) -> &[f64];
    fn con_lower(&self) -> &[f64];
    fn con_upper(&self) -> &[f64];

    fn obj(&self, x: &[f64]) -> Result<f64, EvalError>;
    fn grad(&self, x: &[f64]) -> Result<Vec<f64>, EvalError>;
    fn cons(&self, x: &[f64]) -> Result<Vec<f64>, EvalError>;
    fn jac(&self, x: &[f64]) -> Result<Triplets, EvalError>;
    fn hess(&self, x: &[f64], y: &[f64], sigma: f64) -> Result<Triplets, EvalError>;

    fn counters(&self) -> CounterSnapshot;

    fn structure(&self) -> Structure<'_> {
        Structure::Plain
    }

    /// Slack bookkeeping when the variables include slacks introduced by
    /// [`to_slack_form`].
    fn slack_map(&self) -> Option<&SlackMap> {
        None
    }

    /// True when every constraint is an equality.
    fn is_equality_form(&self) -> bool {
        self.con_lower()
            .iter()
            .zip(self.con_upper())
            .all(|(l, u)| l == u)
    }
}

pub(crate) fn check_len(what: &'static str, v: &[f64], expected: usize) -> Result<(), EvalError> {
    if v.len() != expected {
        return Err(EvalError::Dimension {
            what,
            expected,
            got: v.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_finite(what: &'static str, v: &[f64]) -> Result<(), EvalError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(EvalError::Domain { what })
    }
}
