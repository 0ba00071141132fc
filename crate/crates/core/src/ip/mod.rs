//! Primal-dual interior-point method for equality-constrained problems with
//! variable bounds.
//!
//! Bounds are handled by logarithmic barriers with a monotone barrier
//! parameter; steps are Newton steps on the perturbed KKT conditions,
//! shortened by the fraction-to-boundary rule and an Armijo backtracking
//! search on the ℓ1 merit function. Problems with general constraint bounds
//! go through [`solve_problem`], which introduces slacks first.
//!
//! When the model has the residual structure of an NCL subproblem, the Newton
//! system is solved in its quasi-definite reduced form (see [`kkt`]).

pub mod kkt;
mod solver;

use alloc::vec::Vec;
use core::fmt;

pub use kkt::{
    factorize, fraction_to_boundary, regularize, regularize_factor, solve_kkt, step_lengths, Direction, KktError,
    KktFactor, KktMethod, KktSystem, Regularization,
};
pub use solver::{assemble_kkt, solve_problem, solve_subproblem, IpState, Reduction};

use crate::model::{CounterSnapshot, EvalError, Point};
use crate::sci::sci;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct IpOptions {
    pub mu_init: f64,
    /// Tolerance on `‖∇f − Jᵀλ − z‖∞`.
    pub tol_dual: f64,
    /// Tolerance on `‖c(x) − b‖∞`.
    pub tol_primal: f64,
    /// Tolerance on the bound complementarity products.
    pub tol_comp: f64,
    pub max_iter: usize,
    /// Seconds, measured by the caller's clock.
    pub max_time: f64,
    /// Start close to the given point and multipliers rather than pushing the
    /// point well inside its bounds.
    pub warm_start: bool,
    pub delta_min: f64,
    pub delta_growth: f64,
    pub kkt_method: KktMethod,
    /// Keep one [`IterationRow`] per iteration in the result.
    pub record_log: bool,
}

impl Default for IpOptions {
    fn default() -> Self {
        IpOptions {
            mu_init: 0.1,
            tol_dual: 1e-8,
            tol_primal: 1e-8,
            tol_comp: 1e-8,
            max_iter: 500,
            max_time: 1800.0,
            warm_start: false,
            delta_min: 1e-8,
            delta_growth: 10.0,
            kkt_method: KktMethod::Auto,
            record_log: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SubStatus {
    Optimal,
    MaxIter,
    MaxTime,
    Diverged,
    /// Line search or inertia correction broke down.
    Failed,
}

impl SubStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SubStatus::Optimal => "optimal",
            SubStatus::MaxIter => "max_iter",
            SubStatus::MaxTime => "max_time",
            SubStatus::Diverged => "diverged",
            SubStatus::Failed => "failed",
        }
    }
}

impl fmt::Display for SubStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of the inner iteration log.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRow {
    pub iter: usize,
    pub objective: f64,
    pub inf_pr: f64,
    pub inf_du: f64,
    pub mu: f64,
    pub step_norm: f64,
    pub delta: f64,
    pub alpha_du: f64,
    pub alpha_pr: f64,
    pub backtracks: usize,
}

impl IterationRow {
    pub const HEADER: &'static str =
        "iter    objective    inf_pr   inf_du    mu       ||d||    delta    alpha_du alpha_pr  ls";
}

impl fmt::Display for IterationRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:4}  {:>13}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}  {:2}",
            self.iter,
            sci(self.objective, 6),
            sci(self.inf_pr, 1),
            sci(self.inf_du, 1),
            sci(self.mu, 1),
            sci(self.step_norm, 1),
            sci(self.delta, 1),
            sci(self.alpha_du, 1),
            sci(self.alpha_pr, 1),
            self.backtracks
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubStats {
    pub iterations: usize,
    /// Iterations whose Newton matrix needed `δ > 0` or `δ_c > 0`.
    pub regularized_iterations: usize,
    pub max_delta: f64,
    pub time: f64,
    pub final_mu: f64,
    /// Objective at the final iterate (minimization view).
    pub objective: f64,
    pub inf_pr: f64,
    pub inf_du: f64,
    pub compl: f64,
    pub evals: CounterSnapshot,
    pub log: Vec<IterationRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubResult {
    /// Final iterate. `y` satisfies `∇f − Jᵀy − z ≈ 0`.
    pub point: Point,
    pub status: SubStatus,
    pub stats: SubStats,
}

/// Where to start. Missing multipliers are estimated.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IpStart {
    pub x: Vec<f64>,
    pub lambda: Option<Vec<f64>>,
    pub z: Option<(Vec<f64>, Vec<f64>)>,
}

impl IpStart {
    pub fn cold(x: &[f64]) -> Self {
        IpStart {
            x: x.to_vec(),
            lambda: None,
            z: None,
        }
    }

    pub fn warm(p: &Point) -> Self {
        IpStart {
            x: p.x.clone(),
            lambda: Some(p.y.clone()),
            z: Some((p.z_lower.clone(), p.z_upper.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IpError {
    #[error("evaluation failed: {error}")]
    Eval { error: EvalError, last: Point },
    #[error("the solver needs equality constraints; convert with to_slack_form")]
    NotEqualityForm,
    #[error("start point has length {got}, expected {expected}")]
    BadStart { expected: usize, got: usize },
}
