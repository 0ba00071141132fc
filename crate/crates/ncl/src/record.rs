//! One solver run on one problem.

use std::fmt;
use std::str::FromStr;

use ncl_core::driver::{kkt_residuals, OuterLogRow};
use ncl_core::ip::{solve_problem, IpError, IpOptions, IterationRow, SubStatus};
use ncl_core::model::CounterSnapshot;
use ncl_core::nls::{feasibility_residual, ncl_nls_solve, NlsError};
use ncl_core::{ncl_solve, Clock, NclError, NclOptions, NclStatus, Point, Problem};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SolverKind {
    /// The interior-point solver on the problem itself (on its least-squares
    /// form for equality systems).
    #[serde(rename = "ip-direct")]
    IpDirect,
    #[serde(rename = "ncl")]
    Ncl,
    /// One NCL subproblem with `y = 0`, `ρ = 1`.
    #[serde(rename = "ncl-nls")]
    NclNls,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::IpDirect, SolverKind::Ncl, SolverKind::NclNls];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::IpDirect => "ip-direct",
            SolverKind::Ncl => "ncl",
            SolverKind::NclNls => "ncl-nls",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ip" | "ip-direct" => Ok(SolverKind::IpDirect),
            "ncl" => Ok(SolverKind::Ncl),
            "ncl-nls" | "nls" => Ok(SolverKind::NclNls),
            _ => Err(format!("unknown solver `{s}` (expected ip, ncl or ncl-nls)")),
        }
    }
}

/// Final status of a run, shared by all solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    FirstOrder,
    InfeasibleRegularization,
    MaxOuter,
    MaxIter,
    MaxTime,
    SubsolverFailure,
    Diverged,
    /// A function evaluation failed (domain error, non-finite value).
    EvalError,
    /// The solver could not be applied, e.g. least squares on inequalities.
    Error,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::FirstOrder => "first_order",
            RunStatus::InfeasibleRegularization => "infeasible_regularization",
            RunStatus::MaxOuter => "max_outer",
            RunStatus::MaxIter => "max_iter",
            RunStatus::MaxTime => "max_time",
            RunStatus::SubsolverFailure => "subsolver_failure",
            RunStatus::Diverged => "diverged",
            RunStatus::EvalError => "eval_error",
            RunStatus::Error => "error",
        }
    }

    pub fn solved(self) -> bool {
        self == RunStatus::FirstOrder
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<NclStatus> for RunStatus {
    fn from(s: NclStatus) -> Self {
        match s {
            NclStatus::FirstOrder => RunStatus::FirstOrder,
            NclStatus::InfeasibleRegularization => RunStatus::InfeasibleRegularization,
            NclStatus::MaxOuter => RunStatus::MaxOuter,
            NclStatus::MaxTime => RunStatus::MaxTime,
            NclStatus::SubsolverFailure | NclStatus::Running => RunStatus::SubsolverFailure,
        }
    }
}

impl From<SubStatus> for RunStatus {
    fn from(s: SubStatus) -> Self {
        match s {
            SubStatus::Optimal => RunStatus::FirstOrder,
            SubStatus::MaxIter => RunStatus::MaxIter,
            SubStatus::MaxTime => RunStatus::MaxTime,
            SubStatus::Diverged => RunStatus::Diverged,
            SubStatus::Failed => RunStatus::SubsolverFailure,
        }
    }
}

/// One row of a results table. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub solver: SolverKind,
    pub status: RunStatus,
    /// Objective in the problem's own sense; `½‖c − b‖²` for least squares.
    pub f: f64,
    /// `‖∇f − Jᵀy − z‖₂` at the returned point.
    pub grad_lag: f64,
    /// `‖c‖₂`, the constraint violation.
    pub cons_viol: f64,
    /// Seconds.
    pub time: f64,
    /// Interior-point iterations, summed over subproblems.
    pub iter: u64,
    pub n_obj: u64,
    pub n_grad: u64,
    pub n_cons: u64,
    pub n_jac: u64,
    pub n_hess: u64,
}

impl RunRecord {
    fn new(problem: &str, solver: SolverKind, status: RunStatus) -> Self {
        RunRecord {
            problem: problem.to_string(),
            solver,
            status,
            f: f64::NAN,
            grad_lag: f64::NAN,
            cons_viol: f64::NAN,
            time: 0.0,
            iter: 0,
            n_obj: 0,
            n_grad: 0,
            n_cons: 0,
            n_jac: 0,
            n_hess: 0,
        }
    }

    fn set_counts(&mut self, c: &CounterSnapshot) {
        self.n_obj = c.obj;
        self.n_grad = c.grad;
        self.n_cons = c.cons;
        self.n_jac = c.jac;
        self.n_hess = c.hess;
    }
}

/// Solver settings. The interior-point limits also apply to each NCL
/// subproblem.
#[derive(Debug, Clone, PartialEq)]
#[derive(Default)]
pub struct Settings {
    pub ncl: NclOptions,
    pub ip: IpOptions,
}


impl Settings {
    pub fn with_limits(mut self, max_iter: usize, max_time: f64) -> Self {
        self.ncl.max_iter = max_iter;
        self.ncl.max_time = max_time;
        self.ip.max_iter = max_iter;
        self.ip.max_time = max_time;
        self
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    /// Outer iterations of an NCL run.
    pub outer_log: Vec<OuterLogRow>,
    /// Iterations of a direct interior-point run.
    pub inner_log: Vec<IterationRow>,
    pub point: Option<Point>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a + x * x).sqrt()
}

/// Solves `p` with `solver` and measures the run. Failures of any kind end up
/// in the record's status. `p` should be fresh: the evaluation counts are
/// those charged to it during the solve.
pub fn run(p: &Problem, least_squares: bool, solver: SolverKind, settings: &Settings, clock: &dyn Clock) -> RunOutput {
    let t0 = clock.elapsed();
    let before = p.counters().snapshot();
    let mut out = RunOutput {
        record: RunRecord::new(p.name(), solver, RunStatus::Error),
        outer_log: Vec::new(),
        inner_log: Vec::new(),
        point: None,
    };
    let ls_form = least_squares || solver == SolverKind::NclNls;
    let result = match solver {
        SolverKind::IpDirect => {
            let ip = IpOptions {
                record_log: true,
                ..settings.ip.clone()
            };
            let solved = if ls_form {
                feasibility_residual(p)
                    .map_err(nls_status)
                    .and_then(|ls| solve_problem(&ls, None, &ip, clock).map_err(ip_status))
            } else {
                solve_problem(p, None, &ip, clock).map_err(ip_status)
            };
            solved.map(|sub| {
                out.inner_log = sub.stats.log;
                out.record.iter = sub.stats.iterations as u64;
                (sub.status.into(), sub.point)
            })
        }
        SolverKind::Ncl => ncl_solve(p, &settings.ncl, clock).map_err(ncl_status).map(|o| {
            out.outer_log = o.state.log;
            out.record.iter = o.inner_iterations as u64;
            (o.status.into(), o.point)
        }),
        SolverKind::NclNls => ncl_nls_solve(p, &settings.ncl, clock).map_err(nls_status).map(|o| {
            out.outer_log = o.state.log;
            out.record.iter = o.inner_iterations as u64;
            (o.status.into(), o.point)
        }),
    };
    out.record.time = clock.elapsed() - t0;
    out.record.set_counts(&p.counters().snapshot().since(&before));
    match result {
        Ok((status, point)) => {
            out.record.status = status;
            // Measured on a copy so that `p`'s counters hold the solve alone.
            let probe = p.detached();
            let measured = if ls_form {
                feasibility_residual(&probe).ok().and_then(|ls| {
                    let pt = Point {
                        y: Vec::new(),
                        ..point.clone()
                    };
                    let f = ls.eval_obj(&pt.x).ok()?;
                    Some((f, kkt_residuals(&ls, &pt).ok()?))
                })
            } else {
                probe
                    .eval_obj(&point.x)
                    .ok()
                    .and_then(|f| Some((f, kkt_residuals(&probe, &point).ok()?)))
            };
            if let Some((f, (dual, viol))) = measured {
                out.record.f = f;
                out.record.grad_lag = norm2(&dual);
                out.record.cons_viol = norm2(&viol);
            }
            out.point = Some(point);
        }
        Err(status) => out.record.status = status,
    }
    out
}

fn ip_status(e: IpError) -> RunStatus {
    match e {
        IpError::Eval { .. } => RunStatus::EvalError,
        _ => RunStatus::Error,
    }
}

fn ncl_status(e: NclError) -> RunStatus {
    match e {
        NclError::Eval(_) => RunStatus::EvalError,
        NclError::BadMultipliers { .. } => RunStatus::Error,
    }
}

fn nls_status(e: NlsError) -> RunStatus {
    match e {
        NlsError::Ncl(e) => ncl_status(e),
        _ => RunStatus::Error,
    }
}
