//! The NCL outer loop.
//!
//! Each outer iteration `k` solves the subproblem NC_k with the interior-point
//! solver, warm-started from the previous solution, and then either updates
//! the multiplier estimate (`‖r*‖∞ ≤ η_k`) or increases the penalty `ρ`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::clock::Clock;
use crate::ip::{solve_subproblem, IpOptions, IpStart, KktMethod, SubResult, SubStatus};
use crate::linalg::{dot, norm_inf};
use crate::model::{to_slack_form, CounterSnapshot, EvalError, Nlp, Point, Problem};
use crate::ncl_model::NclProblem;
use crate::sci::sci;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct NclOptions {
    pub eta0: f64,
    pub omega0: f64,
    pub rho0: f64,
    /// Initial barrier parameter of the first subproblem.
    pub mu0: f64,
    pub eta_star: f64,
    pub omega_star: f64,
    pub rho_star: f64,
    pub max_outer: usize,
    /// Reduction factor for `η`, `ω` and growth factor for `ρ`.
    pub factor: f64,
    /// Least-squares mode: `y₀ = 0`, `ρ₀ = 1`, `η₀ = η*`, `ω₀ = ω*`, one outer
    /// iteration.
    pub nls_mode: bool,
    /// Initial multiplier estimate; ones by default (zeros in least-squares
    /// mode).
    pub y0: Option<Vec<f64>>,
    /// Interior-point iteration limit per subproblem.
    pub max_iter: usize,
    /// Seconds for the whole solve.
    pub max_time: f64,
    /// Solve every subproblem to this tolerance instead of `ω_k`.
    pub inner_tol: Option<f64>,
    pub kkt_method: KktMethod,
}

impl Default for NclOptions {
    fn default() -> Self {
        NclOptions {
            eta0: 10.0,
            omega0: 10.0,
            rho0: 100.0,
            mu0: 0.1,
            eta_star: 1e-6,
            omega_star: 1e-6,
            rho_star: 1e12,
            max_outer: 20,
            factor: 10.0,
            nls_mode: false,
            y0: None,
            max_iter: 500,
            max_time: 1800.0,
            inner_tol: None,
            kkt_method: KktMethod::Auto,
        }
    }
}

impl NclOptions {
    /// Options for a least-squares solve: one subproblem with `y = 0`,
    /// `ρ = 1` and final tolerances.
    pub fn nls() -> Self {
        NclOptions {
            nls_mode: true,
            ..NclOptions::default()
        }
    }

    fn effective(&self) -> NclOptions {
        let mut o = self.clone();
        if o.nls_mode {
            o.rho0 = 1.0;
            o.eta0 = o.eta_star;
            o.omega0 = o.omega_star;
            o.max_outer = 1;
        }
        o.eta0 = o.eta0.max(o.eta_star);
        o.omega0 = o.omega0.max(o.omega_star);
        o.rho0 = o.rho0.min(o.rho_star);
        o
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NclStatus {
    Running,
    FirstOrder,
    /// `ρ` reached its ceiling without the residual test passing; the
    /// problem may be infeasible.
    InfeasibleRegularization,
    MaxOuter,
    MaxTime,
    SubsolverFailure,
}

impl NclStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            NclStatus::Running => "running",
            NclStatus::FirstOrder => "first_order",
            NclStatus::InfeasibleRegularization => "infeasible_regularization",
            NclStatus::MaxOuter => "max_outer",
            NclStatus::MaxTime => "max_time",
            NclStatus::SubsolverFailure => "subsolver_failure",
        }
    }
}

impl fmt::Display for NclStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of the outer iteration log. Tolerances, `ρ` and `μ` are the
/// values the subproblem was solved with.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OuterLogRow {
    pub outer: usize,
    pub inner: usize,
    /// Objective `φ(x*)` in the problem's own sense.
    pub objective: f64,
    pub r_norm: f64,
    pub eta: f64,
    /// `‖g(x*) − J(x*)ᵀy_{k+1} − z*‖∞`.
    pub grad_lag: f64,
    pub omega: f64,
    pub rho: f64,
    pub mu_init: f64,
    pub y_norm: f64,
    pub x_norm: f64,
    pub time: f64,
}

impl OuterLogRow {
    pub const HEADER: &'static str =
        "outer inner   NCL obj      ||r||    eta      ||dL||   omega    rho      mu init  ||y||    ||x||    time";
}

impl fmt::Display for OuterLogRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:5} {:5}  {:>10}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}  {:.2}",
            self.outer,
            self.inner,
            sci(self.objective, 2),
            sci(self.r_norm, 1),
            sci(self.eta, 1),
            sci(self.grad_lag, 1),
            sci(self.omega, 1),
            sci(self.rho, 1),
            sci(self.mu_init, 1),
            sci(self.y_norm, 1),
            sci(self.x_norm, 1),
            self.time
        )
    }
}

/// Parameters of the outer loop between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterState {
    /// Index of the next subproblem, starting at 1.
    pub k: usize,
    pub eta: f64,
    pub omega: f64,
    pub rho: f64,
    pub y: Vec<f64>,
    /// Last accepted subproblem solution over the stacked variables `(x, r)`.
    pub last: Option<Point>,
    pub status: NclStatus,
    pub log: Vec<OuterLogRow>,
}

/// Initial barrier parameter for subproblem `k` (1-based): `μ₀` first, then
/// a staircase from `1e-4` down to `1e-8` in steps of two iterations.
pub fn mu_init_schedule(k: usize, mu0: f64) -> f64 {
    match k {
        0 | 1 => mu0,
        2 | 3 => 1e-4,
        4 | 5 => 1e-5,
        6 | 7 => 1e-6,
        8 | 9 => 1e-7,
        _ => 1e-8,
    }
}

impl OuterState {
    pub fn new(m: usize, opts: &NclOptions) -> Self {
        let o = opts.effective();
        let y = match &o.y0 {
            Some(y) => y.clone(),
            None if o.nls_mode => vec![0.0; m],
            None => vec![1.0; m],
        };
        OuterState {
            k: 1,
            eta: o.eta0,
            omega: o.omega0,
            rho: o.rho0,
            y,
            last: None,
            status: NclStatus::Running,
            log: Vec::new(),
        }
    }

    /// Applies the update rules after a subproblem with residual `r`. On
    /// success `y ← y + ρr` and the tolerances shrink; otherwise `ρ` grows,
    /// or the status turns to [`NclStatus::InfeasibleRegularization`] if it
    /// is already at its ceiling. Returns true on success.
    pub fn update_outer(&mut self, r: &[f64], opts: &NclOptions) -> bool {
        let o = opts.effective();
        if norm_inf(r) <= self.eta.max(o.eta_star) {
            for (y, r) in self.y.iter_mut().zip(r) {
                *y += self.rho * r;
            }
            self.eta = shrink(self.eta, o.factor, o.eta_star);
            self.omega = shrink(self.omega, o.factor, o.omega_star);
            true
        } else {
            self.fail_branch(&o);
            false
        }
    }

    fn fail_branch(&mut self, o: &NclOptions) {
        if self.rho >= o.rho_star {
            self.status = NclStatus::InfeasibleRegularization;
        } else {
            self.rho = (self.rho * o.factor).min(o.rho_star);
        }
    }

    /// Status after subproblem `k` with residual norm `r_norm`, before the
    /// parameters are updated.
    pub fn check_termination(&self, r_norm: f64, sub_optimal: bool, opts: &NclOptions) -> NclStatus {
        let o = opts.effective();
        if o.nls_mode {
            if sub_optimal {
                return NclStatus::FirstOrder;
            }
        } else if sub_optimal && r_norm <= o.eta_star && self.omega <= o.omega_star {
            return NclStatus::FirstOrder;
        }
        if self.k >= o.max_outer {
            NclStatus::MaxOuter
        } else {
            NclStatus::Running
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NclOutcome {
    /// Solution of the original problem. `y` are the multipliers of the last
    /// subproblem, in the convention `∇f − Jᵀy − z = 0` for the minimization
    /// view `f` of the objective.
    pub point: Point,
    pub status: NclStatus,
    pub state: OuterState,
    /// `φ(x*)` in the problem's own sense.
    pub objective: f64,
    pub r_norm: f64,
    pub inner_iterations: usize,
    pub evals: CounterSnapshot,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NclError {
    #[error("evaluation failed at the starting point: {0}")]
    Eval(EvalError),
    #[error("initial multiplier estimate has length {got}, expected {expected}")]
    BadMultipliers { expected: usize, got: usize },
}

/// Solves `p` with Algorithm NCL.
///
/// Inequality and range constraints are turned into equalities with slack
/// variables first; the returned point is over the original variables.
pub fn ncl_solve(p: &Problem, opts: &NclOptions, clock: &dyn Clock) -> Result<NclOutcome, NclError> {
    let counters0 = p.counters().snapshot();
    let sp = to_slack_form(p);
    let state = OuterState::new(sp.m(), opts);
    if state.y.len() != sp.m() {
        return Err(NclError::BadMultipliers {
            expected: sp.m(),
            got: state.y.len(),
        });
    }
    let np = NclProblem::new(sp, state.y.clone(), state.rho).expect("checked above");
    let mut out = run(np, state, opts, clock)?;
    // Slack starting values cost one constraint evaluation.
    out.evals = p.counters().snapshot().since(&counters0);
    let n = p.n();
    out.point.x.truncate(n);
    out.point.z_lower.truncate(n);
    out.point.z_upper.truncate(n);
    Ok(out)
}

/// Runs the outer loop on an existing subproblem model, taking `y₀` and `ρ₀`
/// from it. The returned point is over the variables of `np.inner()`.
pub fn ncl_solve_model(np: NclProblem, opts: &NclOptions, clock: &dyn Clock) -> Result<NclOutcome, NclError> {
    let np = if np.inner().is_equality_form() {
        np
    } else {
        let (y, rho) = (np.y().to_vec(), np.rho());
        NclProblem::new(to_slack_form(np.inner()), y, rho).expect("dimensions unchanged")
    };
    let mut state = OuterState::new(np.m(), opts);
    state.y = np.y().to_vec();
    state.rho = np.rho();
    let n = np.inner().slack_map().map_or(np.n_x(), |s| s.n_orig);
    let mut out = run(np, state, opts, clock)?;
    out.point.x.truncate(n);
    out.point.z_lower.truncate(n);
    out.point.z_upper.truncate(n);
    Ok(out)
}

/// `v / factor`, clamped below at `floor`. Values within rounding of the
/// floor land on it exactly, so `10 / 10⁷` compares equal to `1e-6`.
fn shrink(v: f64, factor: f64, floor: f64) -> f64 {
    let next = v / factor;
    if next <= floor * (1.0 + 1e-9) {
        floor
    } else {
        next
    }
}

fn run(
    mut np: NclProblem,
    mut st: OuterState,
    opts: &NclOptions,
    clock: &dyn Clock,
) -> Result<NclOutcome, NclError> {
    let o = opts.effective();
    let t0 = clock.elapsed();
    let counters0 = np.inner().counters().snapshot();
    let n = np.n_x();
    let n_orig = np.inner().slack_map().map_or(n, |s| s.n_orig);
    let m = np.m();
    let sign = np.inner().sense().sign();

    let mut start = IpStart::cold(np.x0());
    let mut inner_iterations = 0;
    let mut failures = 0;
    let mut final_lambda: Option<Vec<f64>> = None;
    let mut r_norm = f64::INFINITY;

    loop {
        np.update_params(&st.y, st.rho).expect("dimensions fixed");
        let elapsed = clock.elapsed() - t0;
        if elapsed > o.max_time {
            st.status = NclStatus::MaxTime;
            break;
        }
        let mu_init = mu_init_schedule(st.k, o.mu0);
        // Without constraints there is a single solve, straight to ω*.
        let omega = if m == 0 { o.omega_star } else { st.omega };
        let tol = o.inner_tol.unwrap_or(omega);
        let ip = IpOptions {
            mu_init,
            tol_dual: tol,
            tol_comp: tol,
            tol_primal: o.inner_tol.unwrap_or(0.1 * o.eta_star),
            max_iter: o.max_iter,
            max_time: o.max_time - elapsed,
            warm_start: st.k > 1,
            kkt_method: o.kkt_method,
            ..IpOptions::default()
        };
        let solved = solve_subproblem(&np, &start, &ip, clock);
        let sub = match solved {
            Ok(sub) if !matches!(sub.status, SubStatus::Failed | SubStatus::Diverged) => sub,
            other => {
                if let Err(crate::ip::IpError::Eval { error, .. }) = &other {
                    if st.k == 1 && st.last.is_none() && inner_iterations == 0 {
                        if let Some(e) = first_point_error(&np, error) {
                            return Err(e);
                        }
                    }
                }
                if let Ok(sub) = &other {
                    inner_iterations += sub.stats.iterations;
                }
                failures += 1;
                log::debug!("outer {}: subproblem failed ({failures} in a row)", st.k);
                if failures >= 3 {
                    st.status = NclStatus::SubsolverFailure;
                    break;
                }
                st.fail_branch(&o);
                if st.status != NclStatus::Running {
                    break;
                }
                if st.k >= o.max_outer {
                    st.status = NclStatus::MaxOuter;
                    break;
                }
                st.k += 1;
                continue;
            }
        };
        failures = 0;
        inner_iterations += sub.stats.iterations;
        if sub.status == SubStatus::MaxTime {
            st.last = Some(sub.point.clone());
            final_lambda = Some(sub.point.y.clone());
            r_norm = norm_inf(&sub.point.x[n..]);
            st.status = NclStatus::MaxTime;
            break;
        }

        let r = &sub.point.x[n..];
        r_norm = norm_inf(r);
        let status = if m == 0 {
            if sub.status == SubStatus::Optimal {
                NclStatus::FirstOrder
            } else {
                NclStatus::MaxOuter
            }
        } else {
            st.check_termination(r_norm, sub.status == SubStatus::Optimal, &o)
        };
        let row_eta = st.eta;
        let row_omega = st.omega;
        let row_rho = st.rho;
        let y_k = st.y.clone();
        if status == NclStatus::Running {
            st.update_outer(r, &o);
        }
        let y_next: Vec<f64> = if status == NclStatus::FirstOrder {
            sub.point.y.clone()
        } else {
            st.y.clone()
        };
        st.log.push(OuterLogRow {
            outer: st.k,
            inner: sub.stats.iterations,
            objective: sign * native_f(&sub, &y_k, row_rho, n),
            r_norm,
            eta: row_eta,
            grad_lag: grad_lag_norm(&np, &sub.point, &y_next),
            omega: row_omega,
            rho: row_rho,
            mu_init,
            y_norm: norm_inf(&y_next),
            x_norm: norm_inf(&sub.point.x[..n_orig]),
            time: clock.elapsed() - t0,
        });
        log::info!("{}", st.log.last().expect("just pushed"));

        start = IpStart::warm(&sub.point);
        final_lambda = Some(sub.point.y.clone());
        st.last = Some(sub.point);
        if status != NclStatus::Running {
            st.status = status;
            break;
        }
        if st.status != NclStatus::Running {
            break;
        }
        st.k += 1;
    }

    let last = st.last.clone().unwrap_or_else(|| Point {
        x: np.x0().to_vec(),
        y: st.y.clone(),
        z_lower: vec![0.0; n + m],
        z_upper: vec![0.0; n + m],
    });
    let point = Point {
        x: last.x[..n].to_vec(),
        y: final_lambda.unwrap_or_else(|| st.y.clone()),
        z_lower: last.z_lower[..n].to_vec(),
        z_upper: last.z_upper[..n].to_vec(),
    };
    let objective = np.inner().eval_obj(&point.x).unwrap_or(f64::NAN);
    Ok(NclOutcome {
        point,
        status: st.status,
        objective,
        r_norm: if m == 0 { 0.0 } else { r_norm },
        inner_iterations,
        evals: np.inner().counters().snapshot().since(&counters0),
        time: clock.elapsed() - t0,
        state: st,
    })
}

/// An evaluation failure at the very first point is reported as an error
/// rather than a failed subproblem.
fn first_point_error(np: &NclProblem, error: &EvalError) -> Option<NclError> {
    let x0 = &np.x0()[..np.n_x()];
    let p = np.inner();
    let bad = p.eval_obj(x0).is_err() || p.eval_cons(x0).is_err();
    bad.then(|| NclError::Eval(error.clone()))
}

/// `f(x*)` from the subproblem objective `f + yᵀr + ½ρ‖r‖²`.
fn native_f(sub: &SubResult, y: &[f64], rho: f64, n: usize) -> f64 {
    let r = &sub.point.x[n..];
    sub.stats.objective - dot(y, r) - 0.5 * rho * dot(r, r)
}

fn grad_lag_norm(np: &NclProblem, pt: &Point, y: &[f64]) -> f64 {
    let n = np.n_x();
    let x = &pt.x[..n];
    let p = np.inner();
    let (g, j) = match (Nlp::grad(p, x), Nlp::jac(p, x)) {
        (Ok(g), Ok(j)) => (g, j),
        _ => return f64::NAN,
    };
    let jty = j.tmul_vec(y);
    (0..n)
        .map(|i| (g[i] - jty[i] - pt.z_lower[i] + pt.z_upper[i]).abs())
        .fold(0.0, f64::max)
}

/// Optimality residuals of `p` at `pt`: stationarity `∇f − Jᵀy − z` and
/// constraint violation, both per component.
pub fn kkt_residuals(p: &Problem, pt: &Point) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    let g = Nlp::grad(p, &pt.x)?;
    let j = Nlp::jac(p, &pt.x)?;
    let jty = j.tmul_vec(&pt.y);
    let dual = (0..p.n())
        .map(|i| g[i] - jty[i] - pt.z_lower[i] + pt.z_upper[i])
        .collect();
    let viol = p.con_violation(&p.eval_cons(&pt.x)?);
    Ok((dual, viol))
}
