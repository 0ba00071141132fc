//! Nonlinear least squares through NCL.
//!
//! An equality system `c(x) = b`, `ℓ ≤ x ≤ u` (usually inconsistent) is read
//! as `minimize ½‖c(x) − b‖²` subject to the bounds. With `y = 0` and `ρ = 1`
//! the first NCL subproblem
//!
//! ```txt
//!   minimize    ½‖r‖²
//!   subject to  c(x) + r = b,   ℓ ≤ x ≤ u
//! ```
//!
//! is that least-squares problem, so one subproblem solve with final
//! tolerances gives the answer.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::clock::Clock;
use crate::driver::{ncl_solve, NclError, NclOptions, NclOutcome};
use crate::linalg::{dot, Triplets};
use crate::model::{to_slack_form, Evaluator, Nlp, Problem};
use crate::ncl_model::NclProblem;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NlsError {
    #[error("the problem has no constraints")]
    NoConstraints,
    #[error("least-squares problems need equality constraints")]
    NotEqualityForm,
    #[error(transparent)]
    Ncl(#[from] NclError),
}

fn check_form(p: &Problem) -> Result<(), NlsError> {
    if p.m() == 0 {
        return Err(NlsError::NoConstraints);
    }
    if !p.is_equality_form() {
        return Err(NlsError::NotEqualityForm);
    }
    Ok(())
}

/// `½‖c(x) − b‖²` over the variables of an equality system. Residual
/// evaluations are charged to the system's counters as constraint and
/// Jacobian evaluations.
struct ResidualEvaluator {
    system: Problem,
}

impl ResidualEvaluator {
    fn residual(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut c = self.system.eval_cons(x).ok()?;
        c.iter_mut()
            .zip(self.system.con_lower())
            .for_each(|(c, b)| *c -= b);
        Some(c)
    }
}

impl Evaluator for ResidualEvaluator {
    fn obj(&self, x: &[f64]) -> f64 {
        match self.residual(x) {
            Some(c) => 0.5 * dot(&c, &c),
            None => f64::NAN,
        }
    }

    fn grad(&self, x: &[f64], g: &mut [f64]) {
        match (self.residual(x), self.system.eval_jac(x)) {
            (Some(c), Ok(j)) => g.copy_from_slice(&j.tmul_vec(&c)),
            _ => g.iter_mut().for_each(|v| *v = f64::NAN),
        }
    }

    fn cons(&self, _x: &[f64], _c: &mut [f64]) {}

    fn jac(&self, x: &[f64]) -> Triplets {
        Triplets::new(0, x.len())
    }

    /// `σ(JᵀJ + Σ cᵢ ∇²cᵢ)`.
    fn hess(&self, x: &[f64], _y: &[f64], sigma: f64) -> Triplets {
        let n = x.len();
        let mut h = Triplets::new(n, n);
        let (c, j) = match (self.residual(x), self.system.eval_jac(x)) {
            (Some(c), Ok(j)) => (c, j),
            _ => {
                h.push(0, 0, f64::NAN);
                return h;
            }
        };
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); c.len()];
        for &(i, k, v) in &j.entries {
            rows[i].push((k, v));
        }
        for row in &rows {
            for &(a, va) in row {
                for &(b, vb) in row {
                    if b <= a {
                        h.push(a, b, sigma * va * vb);
                    }
                }
            }
        }
        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
        match self.system.eval_hess_lag(x, &neg, 0.0) {
            Ok(second) => {
                for (a, b, v) in second.entries {
                    h.push(a, b, sigma * v);
                }
            }
            Err(_) => h.push(0, 0, f64::NAN),
        }
        h
    }
}

/// The least-squares problem `minimize ½‖c(x) − b‖²`, `ℓ ≤ x ≤ u`, of an
/// equality system `c(x) = b`. The objective of `p`, if any, is ignored.
pub fn feasibility_residual(p: &Problem) -> Result<Problem, NlsError> {
    check_form(p)?;
    let ls = Problem::builder(
        format!("{}-ls", p.name()),
        p.n(),
        0,
        ResidualEvaluator { system: p.clone() },
    )
    .x0(p.x0().to_vec())
    .var_bounds(p.var_lower().to_vec(), p.var_upper().to_vec())
    .build()
    .expect("bounds come from a valid problem");
    Ok(ls)
}

/// `p` with its objective replaced by zero; evaluations stay charged to `p`.
struct ZeroObjective {
    inner: Arc<dyn Evaluator>,
}

impl Evaluator for ZeroObjective {
    fn obj(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn grad(&self, _x: &[f64], g: &mut [f64]) {
        g.iter_mut().for_each(|v| *v = 0.0);
    }

    fn cons(&self, x: &[f64], c: &mut [f64]) {
        self.inner.cons(x, c)
    }

    fn jac(&self, x: &[f64]) -> Triplets {
        self.inner.jac(x)
    }

    fn hess(&self, x: &[f64], y: &[f64], _sigma: f64) -> Triplets {
        self.inner.hess(x, y, 0.0)
    }
}

fn without_objective(p: &Problem) -> Problem {
    Problem::builder(p.name(), p.n(), p.m(), ZeroObjective {
        inner: p.evaluator().clone(),
    })
    .x0(p.x0().to_vec())
    .var_bounds(p.var_lower().to_vec(), p.var_upper().to_vec())
    .con_bounds(p.con_lower().to_vec(), p.con_upper().to_vec())
    .counters(p.counters().clone())
    .build()
    .expect("bounds come from a valid problem")
}

/// Subproblem NC_0 for the system `p`: `y = 0`, `ρ = 1`, objective of `p`
/// dropped.
pub fn make_nc0(p: &Problem) -> Result<NclProblem, NlsError> {
    check_form(p)?;
    let sys = to_slack_form(&without_objective(p));
    let m = sys.m();
    Ok(NclProblem::new(sys, vec![0.0; m], 1.0).expect("valid parameters"))
}

/// Solves the least-squares problem of the system `p` with a single NCL
/// subproblem. The reported objective is `½‖c(x*) − b‖²`.
pub fn ncl_nls_solve(p: &Problem, opts: &NclOptions, clock: &dyn Clock) -> Result<NclOutcome, NlsError> {
    check_form(p)?;
    let opts = NclOptions {
        nls_mode: true,
        ..opts.clone()
    };
    let sys = without_objective(p);
    let mut out = ncl_solve(&sys, &opts, clock)?;
    let r = match &out.state.last {
        Some(pt) => &pt.x[pt.x.len() - p.m()..],
        None => &[][..],
    };
    out.objective = if r.is_empty() {
        f64::NAN
    } else {
        0.5 * dot(r, r)
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{build_problem, parse_model};
    use crate::driver::NclStatus;
    use crate::NoClock;

    fn problem(src: &str) -> Problem {
        build_problem(&parse_model(src).unwrap(), "t")
    }

    #[test]
    fn scalar_residual() {
        let p = problem("var x; subject to x == 1;");
        let ls = feasibility_residual(&p).unwrap();
        assert_eq!(ls.eval_obj(&[3.0]).unwrap(), 2.0);
        assert_eq!(ls.eval_grad(&[3.0]).unwrap(), vec![2.0]);
        assert_eq!(p.counters().snapshot().cons, 2);
    }

    #[test]
    fn linear_gradient_is_normal_equations() {
        let p = problem("var a; var b; subject to 2*a + b == 3; a + 3*b == 5; a - b == 0;");
        let ls = feasibility_residual(&p).unwrap();
        let x = [0.3, -0.7];
        let r = [2.0 * x[0] + x[1] - 3.0, x[0] + 3.0 * x[1] - 5.0, x[0] - x[1]];
        let g = ls.eval_grad(&x).unwrap();
        assert!((g[0] - (2.0 * r[0] + r[1] + r[2])).abs() < 1e-12);
        assert!((g[1] - (r[0] + 3.0 * r[1] - r[2])).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let p = problem("var x; minimize x;");
        assert_eq!(feasibility_residual(&p).unwrap_err(), NlsError::NoConstraints);
        let q = problem("var x; subject to x <= 1;");
        assert_eq!(make_nc0(&q).unwrap_err(), NlsError::NotEqualityForm);
    }

    #[test]
    fn nc0_objective_is_half_squared_residual() {
        let p = problem("var a; var b; subject to a*b == 2; a - b == 1;");
        let nc0 = make_nc0(&p).unwrap();
        assert_eq!(nc0.n(), 4);
        let x = [1.5, -0.25];
        let c = p.eval_cons(&x).unwrap();
        let r = [-(c[0] - 2.0), -(c[1] - 1.0)];
        let v = [x[0], x[1], r[0], r[1]];
        let want = 0.5 * (r[0] * r[0] + r[1] * r[1]);
        assert!((nc0.obj(&v).unwrap() - want).abs() < 1e-14);
        assert!(nc0.cons(&v).unwrap().iter().zip(nc0.con_lower()).all(|(c, b)| (c - b).abs() < 1e-14));
    }

    #[test]
    fn inconsistent_pair() {
        let p = problem("var x; subject to x == 0; x == 1;");
        let out = ncl_nls_solve(&p, &NclOptions::default(), &NoClock).unwrap();
        assert_eq!(out.status, NclStatus::FirstOrder);
        assert_eq!(out.state.log.len(), 1);
        assert!((out.point.x[0] - 0.5).abs() < 1e-6);
        assert!((out.objective - 0.25).abs() < 1e-6);
    }
}
