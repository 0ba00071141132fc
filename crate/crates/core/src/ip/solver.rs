use alloc::vec;
use alloc::vec::Vec;

use super::kkt::{
    regularize_factor, step_lengths, Direction, KktError, KktMethod, KktSystem, Regularization,
};
use super::{IpError, IpOptions, IpStart, IterationRow, SubResult, SubStats, SubStatus};
use crate::clock::Clock;
use crate::linalg::{dot, norm1, norm_inf, Dense, Ldl, Triplets};
use crate::math;
use crate::model::{to_slack_form, EvalError, Nlp, Point, Problem, Structure};

/// Barrier products are kept within `[1/κ, κ]·μ` after each step.
const KAPPA_SIGMA: f64 = 1e10;
/// The barrier parameter is reduced once the barrier error is below `κ·μ`.
const KAPPA_EPS: f64 = 10.0;
const ARMIJO: f64 = 1e-4;

/// An interior iterate with the derivative values at `x`.
#[derive(Debug, Clone)]
pub struct IpState {
    pub x: Vec<f64>,
    /// Multipliers with `∇f − Jᵀλ − z = 0`.
    pub lambda: Vec<f64>,
    pub z_lower: Vec<f64>,
    pub z_upper: Vec<f64>,
    pub mu: f64,
    pub grad: Vec<f64>,
    /// `c(x) − b`.
    pub cons: Vec<f64>,
    pub jac: Triplets,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl IpState {
    fn fixed(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }

    fn has_lower(&self, j: usize) -> bool {
        self.lower[j].is_finite() && !self.fixed(j)
    }

    fn has_upper(&self, j: usize) -> bool {
        self.upper[j].is_finite() && !self.fixed(j)
    }

    /// `∇f − Jᵀλ − z_L + z_U`, zero on fixed variables.
    pub fn dual_residual(&self) -> Vec<f64> {
        let jtl = self.jac.tmul_vec(&self.lambda);
        (0..self.x.len())
            .map(|j| {
                if self.fixed(j) {
                    0.0
                } else {
                    self.grad[j] - jtl[j] - self.z_lower[j] + self.z_upper[j]
                }
            })
            .collect()
    }

    fn complementarity(&self) -> f64 {
        let mut c = 0.0f64;
        for j in 0..self.x.len() {
            if self.has_lower(j) {
                c = c.max((self.x[j] - self.lower[j]) * self.z_lower[j]);
            }
            if self.has_upper(j) {
                c = c.max((self.upper[j] - self.x[j]) * self.z_upper[j]);
            }
        }
        c
    }

    /// Optimality error of the barrier problem for parameter `mu`.
    fn barrier_error(&self, mu: f64) -> f64 {
        let mut e = norm_inf(&self.dual_residual()).max(norm_inf(&self.cons));
        for j in 0..self.x.len() {
            if self.has_lower(j) {
                e = e.max(((self.x[j] - self.lower[j]) * self.z_lower[j] - mu).abs());
            }
            if self.has_upper(j) {
                e = e.max(((self.upper[j] - self.x[j]) * self.z_upper[j] - mu).abs());
            }
        }
        e
    }

    /// `f − μ Σ log(distance to bound)`.
    fn barrier_value(&self, x: &[f64], f: f64) -> f64 {
        let mut phi = f;
        for j in 0..x.len() {
            if self.has_lower(j) {
                phi -= self.mu * math::ln(x[j] - self.lower[j]);
            }
            if self.has_upper(j) {
                phi -= self.mu * math::ln(self.upper[j] - x[j]);
            }
        }
        phi
    }

    fn barrier_gradient(&self) -> Vec<f64> {
        (0..self.x.len())
            .map(|j| {
                let mut g = self.grad[j];
                if self.has_lower(j) {
                    g -= self.mu / (self.x[j] - self.lower[j]);
                }
                if self.has_upper(j) {
                    g += self.mu / (self.upper[j] - self.x[j]);
                }
                g
            })
            .collect()
    }

    fn point(&self) -> Point {
        let mut p = Point {
            x: self.x.clone(),
            y: self.lambda.clone(),
            z_lower: self.z_lower.clone(),
            z_upper: self.z_upper.clone(),
        };
        // Fixed variables carry whatever multiplier balances stationarity.
        let jtl = self.jac.tmul_vec(&self.lambda);
        for j in 0..self.x.len() {
            if self.fixed(j) {
                let z = self.grad[j] - jtl[j];
                p.z_lower[j] = z.max(0.0);
                p.z_upper[j] = (-z).max(0.0);
            }
        }
        p
    }
}

/// Residual block of an NCL subproblem as seen by the solver.
struct ResidualBlock {
    n_x: usize,
    y: Vec<f64>,
    rho: f64,
}

/// Variables removed from a Newton system before factorization, and how to
/// recover their steps.
#[derive(Debug, Clone, Default)]
pub struct Reduction {
    /// Variable behind each column of the reduced system.
    pub kept: Vec<usize>,
    /// Variables outside the system (all of them, residuals included).
    pub n_all: usize,
    /// `(row, var, a, d, rd)`: the variable appears only in `row`, with
    /// coefficient `a`, and has barrier diagonal `d > 0` and dual residual
    /// `rd`.
    elim: Vec<(usize, usize, f64, f64, f64)>,
}

impl Reduction {
    /// Primal right-hand side for constraint values `cons`.
    pub fn rp(&self, cons: &[f64]) -> Vec<f64> {
        let mut rp = cons.to_vec();
        for &(i, _, a, d, rd) in &self.elim {
            rp[i] -= a * rd / d;
        }
        rp
    }

    /// Direction over all variables: `x` followed by the residuals, if any.
    fn expand(&self, dir: &Direction) -> Vec<f64> {
        let mut dx = vec![0.0; self.n_all - dir.dr.len()];
        for (k, &j) in self.kept.iter().enumerate() {
            dx[j] = dir.dx[k];
        }
        for &(i, j, a, d, rd) in &self.elim {
            dx[j] = -(rd + a * dir.dlambda[i]) / d;
        }
        dx.extend_from_slice(&dir.dr);
        dx
    }
}

/// Builds the Newton system at `state` from the Lagrangian Hessian `hess`
/// (lower triangle over all variables). With `residual = Some((n_x, y, ρ))`
/// the last `m` variables are the residuals and only the `x` block of the
/// Hessian is used.
///
/// `slacks` lists `(row, var)` pairs of variables that appear linearly in one
/// row and nowhere else; those with a barrier term are eliminated, which adds
/// to the corner of the system.
pub fn assemble_kkt(
    state: &IpState,
    hess: &Triplets,
    residual: Option<(usize, &[f64], f64)>,
    slacks: &[(usize, usize)],
    method: KktMethod,
) -> Result<(KktSystem, Reduction), KktError> {
    let n_all = state.x.len();
    for j in 0..n_all {
        let inside_l = !state.has_lower(j) || state.x[j] > state.lower[j];
        let inside_u = !state.has_upper(j) || state.x[j] < state.upper[j];
        if !(inside_l && inside_u) {
            return Err(KktError::NonInterior { index: j });
        }
    }
    let m = state.cons.len();
    let n_x = residual.map_or(n_all, |(n_x, _, _)| n_x);

    let bgrad = state.barrier_gradient();
    let jtl = state.jac.tmul_vec(&state.lambda);
    let diag = |j: usize| {
        let mut d = 0.0;
        if state.has_lower(j) {
            d += state.z_lower[j] / (state.x[j] - state.lower[j]);
        }
        if state.has_upper(j) {
            d += state.z_upper[j] / (state.upper[j] - state.x[j]);
        }
        d
    };

    let mut coef = vec![0.0; n_x];
    let mut slack_row = vec![usize::MAX; n_x];
    for &(i, j) in slacks {
        if j < n_x && !state.fixed(j) && diag(j) > 0.0 {
            slack_row[j] = i;
        }
    }
    for &(i, j, v) in &state.jac.entries {
        if j < n_x && slack_row[j] != usize::MAX {
            if slack_row[j] == i {
                coef[j] += v;
            } else {
                slack_row[j] = usize::MAX;
            }
        }
    }
    let mut red = Reduction {
        kept: Vec::new(),
        n_all,
        elim: Vec::new(),
    };
    let mut col = vec![usize::MAX; n_x];
    let mut corner = vec![0.0; m];
    for j in 0..n_x {
        let i = slack_row[j];
        if i != usize::MAX && coef[j] != 0.0 {
            let (a, d) = (coef[j], diag(j));
            corner[i] += a * a / d;
            red.elim.push((i, j, a, d, bgrad[j] - jtl[j]));
        } else {
            col[j] = red.kept.len();
            red.kept.push(j);
        }
    }
    let n = red.kept.len();

    let mut h = Dense::zeros(n, n);
    for &(i, j, v) in &hess.entries {
        if i < n_x && j < n_x && col[i] != usize::MAX && col[j] != usize::MAX {
            let (a, b) = (col[i], col[j]);
            h[(a, b)] += v;
            if a != b {
                h[(b, a)] += v;
            }
        }
    }
    let mut jx = Dense::zeros(m, n);
    for &(i, j, v) in &state.jac.entries {
        if j < n_x && col[j] != usize::MAX && !state.fixed(j) {
            jx[(i, col[j])] += v;
        }
    }
    let mut d = vec![0.0; n];
    let mut rd_x = vec![0.0; n];
    for (k, &j) in red.kept.iter().enumerate() {
        if state.fixed(j) {
            for t in 0..n {
                h[(k, t)] = 0.0;
                h[(t, k)] = 0.0;
            }
            h[(k, k)] = 1.0;
        } else {
            d[k] = diag(j);
            rd_x[k] = bgrad[j] - jtl[j];
        }
    }
    let (rho, rd_r) = match residual {
        Some((n_x, y, rho)) => (
            rho,
            (0..m)
                .map(|i| y[i] + rho * state.x[n_x + i] - state.lambda[i])
                .collect(),
        ),
        None => (1.0, Vec::new()),
    };
    let rp = red.rp(&state.cons);
    let sys = KktSystem {
        h,
        d,
        j: jx,
        rho,
        has_r_block: residual.is_some(),
        rd_x,
        rd_r,
        rp,
        delta: 0.0,
        delta_c: 0.0,
        corner: if red.elim.is_empty() { Vec::new() } else { corner },
        method,
    };
    Ok((sys, red))
}

fn eval_fc<N: Nlp + ?Sized>(nlp: &N, x: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
    let f = nlp.obj(x)?;
    let mut c = nlp.cons(x)?;
    c.iter_mut().zip(b).for_each(|(c, b)| *c -= b);
    Ok((f, c))
}

fn eval_gj<N: Nlp + ?Sized>(nlp: &N, x: &[f64]) -> Result<(Vec<f64>, Triplets), EvalError> {
    Ok((nlp.grad(x)?, nlp.jac(x)?))
}

/// Moves `x` at least `κ·(1 + |bound|)` inside each bound (less for narrow
/// intervals). Fixed variables sit on their value.
fn push_inside(x: &mut [f64], lower: &[f64], upper: &[f64], kappa: f64) {
    for j in 0..x.len() {
        let (l, u) = (lower[j], upper[j]);
        if l == u {
            x[j] = l;
            continue;
        }
        let width = u - l;
        if l.is_finite() {
            let p = (kappa * (1.0 + l.abs())).min(0.49 * width);
            x[j] = x[j].max(l + p);
        }
        if u.is_finite() {
            let p = (kappa * (1.0 + u.abs())).min(0.49 * width);
            x[j] = x[j].min(u - p);
        }
    }
}

/// Least-squares multipliers `argmin ‖g − z − Jᵀλ‖`, or zero if they come
/// out large or there are too many constraints to form `JJᵀ`.
fn ls_multipliers(state: &IpState) -> Vec<f64> {
    let m = state.cons.len();
    let n = state.x.len();
    if m > 1000 {
        return vec![0.0; m];
    }
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(i, j, v) in &state.jac.entries {
        by_col[j].push((i, v));
    }
    let mut a = Dense::zeros(m, m);
    for c in &by_col {
        for &(i, u) in c {
            for &(k, v) in c {
                a[(i, k)] += u * v;
            }
        }
    }
    for i in 0..m {
        a[(i, i)] += 1e-8;
    }
    let w: Vec<f64> = (0..n)
        .map(|j| state.grad[j] - state.z_lower[j] + state.z_upper[j])
        .collect();
    let lambda = Ldl::factor(&a).solve(&state.jac.mul_vec(&w));
    if lambda.iter().all(|v| v.is_finite()) && norm_inf(&lambda) <= 1e3 {
        lambda
    } else {
        vec![0.0; m]
    }
}

/// Moves each slack `s` of a row `cᵢ(x) − s (+ rᵢ) = bᵢ` onto the value that
/// satisfies the row when that lowers its barrier term. Slacks appear in no
/// other row and not in the objective, so only the barrier and the row's
/// residual change.
fn reset_slacks(slacks: &[(usize, usize)], st: &IpState, x: &mut [f64], c: &mut [f64]) {
    for &(i, j) in slacks {
        if st.fixed(j) {
            continue;
        }
        let (l, u) = (st.lower[j], st.upper[j]);
        let s = x[j] + c[i];
        let room = |v: f64| {
            let lo = if l.is_finite() { v - l } else { 1.0 };
            let hi = if u.is_finite() { u - v } else { 1.0 };
            if lo > 0.0 && hi > 0.0 {
                lo * hi
            } else {
                0.0
            }
        };
        let better = match (l.is_finite(), u.is_finite()) {
            (true, false) => s > x[j],
            (false, true) => s < x[j],
            _ => room(s) > room(x[j]),
        };
        if better {
            x[j] = s;
            c[i] = 0.0;
        }
    }
}

/// A primal-dual search direction with its fraction-to-boundary limits.
struct Step {
    dx: Vec<f64>,
    /// In the solver's multiplier convention.
    dlambda: Vec<f64>,
    dzl: Vec<f64>,
    dzu: Vec<f64>,
    alpha_max: f64,
    alpha_z: f64,
}

impl Step {
    fn at(&self, x: &[f64], alpha: f64) -> Vec<f64> {
        x.iter().zip(&self.dx).map(|(x, d)| x + alpha * d).collect()
    }

    fn trial_state(
        &self,
        st: &IpState,
        alpha: f64,
        x: Vec<f64>,
        grad: Vec<f64>,
        cons: Vec<f64>,
        jac: Triplets,
    ) -> IpState {
        let moved = |v: &[f64], d: &[f64], a: f64| v.iter().zip(d).map(|(v, d)| v + a * d).collect();
        IpState {
            x,
            lambda: moved(&st.lambda, &self.dlambda, alpha),
            z_lower: moved(&st.z_lower, &self.dzl, self.alpha_z),
            z_upper: moved(&st.z_upper, &self.dzu, self.alpha_z),
            mu: st.mu,
            grad,
            cons,
            jac,
            lower: st.lower.clone(),
            upper: st.upper.clone(),
        }
    }
}

fn make_step(st: &IpState, red: &Reduction, dir: &Direction, tau: f64) -> Step {
    let n = st.x.len();
    let mu = st.mu;
    let mut dx = red.expand(dir);
    for j in 0..n {
        if st.fixed(j) {
            dx[j] = 0.0;
        }
    }
    let dlambda = dir.dlambda.iter().map(|v| -v).collect();
    let mut dzl = vec![0.0; n];
    let mut dzu = vec![0.0; n];
    let mut zs = Vec::new();
    let mut dzs = Vec::new();
    for j in 0..n {
        if st.has_lower(j) {
            let s = st.x[j] - st.lower[j];
            dzl[j] = mu / s - st.z_lower[j] - st.z_lower[j] / s * dx[j];
            zs.push(st.z_lower[j]);
            dzs.push(dzl[j]);
        }
        if st.has_upper(j) {
            let s = st.upper[j] - st.x[j];
            dzu[j] = mu / s - st.z_upper[j] + st.z_upper[j] / s * dx[j];
            zs.push(st.z_upper[j]);
            dzs.push(dzu[j]);
        }
    }
    let (alpha_max, alpha_z) = step_lengths(&st.x, &dx, &st.lower, &st.upper, &zs, &dzs, tau);
    Step {
        dx,
        dlambda,
        dzl,
        dzu,
        alpha_max,
        alpha_z,
    }
}

struct Accepted {
    alpha: f64,
    x: Vec<f64>,
    f: f64,
    c: Vec<f64>,
    gj: Option<(Vec<f64>, Triplets)>,
    /// Set when a second-order correction replaced the Newton step.
    soc: Option<Step>,
}

impl Accepted {
    fn plain(alpha: f64, x: Vec<f64>, f: f64, c: Vec<f64>) -> Self {
        Accepted {
            alpha,
            x,
            f,
            c,
            gj: None,
            soc: None,
        }
    }
}

/// Solves an equality-constrained model `c(x) = l_c`, `ℓ ≤ x ≤ u` from
/// `start`.
pub fn solve_subproblem<N: Nlp + ?Sized>(
    nlp: &N,
    start: &IpStart,
    opts: &IpOptions,
    clock: &dyn Clock,
) -> Result<SubResult, IpError> {
    let t0 = clock.elapsed();
    let counters0 = nlp.counters();
    let n = nlp.n();
    let m = nlp.m();
    if !nlp.is_equality_form() {
        return Err(IpError::NotEqualityForm);
    }
    if start.x.len() != n {
        return Err(IpError::BadStart {
            expected: n,
            got: start.x.len(),
        });
    }
    let b = nlp.con_lower().to_vec();
    let residual = match nlp.structure() {
        Structure::Residual { y, rho, .. } => Some(ResidualBlock {
            n_x: n - m,
            y: y.to_vec(),
            rho,
        }),
        Structure::Plain => None,
    };

    let lower = nlp.var_lower().to_vec();
    let upper = nlp.var_upper().to_vec();
    let slacks: Vec<(usize, usize)> = nlp.slack_map().map_or_else(Vec::new, |map| {
        map.slack_of_row
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|s| (i, s)))
            .collect()
    });
    let mut x = start.x.clone();
    let kappa = if opts.warm_start { 1e-8 } else { 1e-2 };
    push_inside(&mut x, &lower, &upper, kappa);

    let mut mu = opts.mu_init;
    let mu_min = (opts.tol_comp / 10.0).min(mu);

    let mut z_lower = vec![0.0; n];
    let mut z_upper = vec![0.0; n];
    for j in 0..n {
        if lower[j] == upper[j] {
            continue;
        }
        let given = start.z.as_ref().map(|(zl, zu)| (zl[j], zu[j]));
        if lower[j].is_finite() {
            z_lower[j] = match given {
                Some((zl, _)) => zl.max(1e-10),
                None => (mu / (x[j] - lower[j])).max(1e-8),
            };
        }
        if upper[j].is_finite() {
            z_upper[j] = match given {
                Some((_, zu)) => zu.max(1e-10),
                None => (mu / (upper[j] - x[j])).max(1e-8),
            };
        }
    }

    let fail_at = |x: &[f64], error: EvalError| IpError::Eval {
        error,
        last: Point {
            x: x.to_vec(),
            y: start.lambda.clone().unwrap_or_else(|| vec![0.0; m]),
            z_lower: vec![0.0; n],
            z_upper: vec![0.0; n],
        },
    };
    let (mut f, cons) = eval_fc(nlp, &x, &b).map_err(|e| fail_at(&x, e))?;
    let (grad, jac) = eval_gj(nlp, &x).map_err(|e| fail_at(&x, e))?;

    let mut st = IpState {
        x,
        lambda: vec![0.0; m],
        z_lower,
        z_upper,
        mu,
        grad,
        cons,
        jac,
        lower,
        upper,
    };
    st.lambda = match (&start.lambda, &residual) {
        (Some(l), _) if l.len() == m => l.clone(),
        (_, Some(r)) => r.y.clone(),
        _ if m > 0 => ls_multipliers(&st),
        _ => Vec::new(),
    };

    let mut stats = SubStats::default();
    let status;
    let mut last_delta = 0.0;
    let mut nu = 0.0f64;
    let mut tiny_steps = 0;
    let mut row = IterationRow {
        iter: 0,
        objective: f,
        inf_pr: 0.0,
        inf_du: 0.0,
        mu,
        step_norm: 0.0,
        delta: 0.0,
        alpha_du: 0.0,
        alpha_pr: 0.0,
        backtracks: 0,
    };

    let mut iter = 0;
    loop {
        let inf_du = norm_inf(&st.dual_residual());
        let inf_pr = norm_inf(&st.cons);
        let compl = st.complementarity();
        row.iter = iter;
        row.objective = f;
        row.inf_pr = inf_pr;
        row.inf_du = inf_du;
        row.mu = mu;
        log::trace!("{row}");
        if opts.record_log {
            stats.log.push(row.clone());
        }
        stats.inf_pr = inf_pr;
        stats.inf_du = inf_du;
        stats.compl = compl;

        if inf_du <= opts.tol_dual && inf_pr <= opts.tol_primal && compl <= opts.tol_comp {
            status = SubStatus::Optimal;
            break;
        }
        if iter >= opts.max_iter {
            status = SubStatus::MaxIter;
            break;
        }
        if clock.elapsed() - t0 > opts.max_time {
            status = SubStatus::MaxTime;
            break;
        }
        if norm_inf(&st.x) > 1e20 || !f.is_finite() || f < -1e50 {
            status = SubStatus::Diverged;
            break;
        }

        // Monotone barrier update.
        while mu > mu_min && st.barrier_error(mu) <= KAPPA_EPS * mu {
            let next = if mu < 1.0 {
                (mu / 10.0).max(math::powf(mu, 1.5))
            } else {
                mu / 10.0
            };
            mu = next.max(mu_min);
        }
        st.mu = mu;

        let hess = match nlp.hess(&st.x, &st.lambda, 1.0) {
            Ok(h) => h,
            Err(error) => {
                return Err(IpError::Eval {
                    error,
                    last: st.point(),
                })
            }
        };
        let res = residual.as_ref().map(|r| (r.n_x, r.y.as_slice(), r.rho));
        let (mut sys, red) = match assemble_kkt(&st, &hess, res, &slacks, opts.kkt_method) {
            Ok(s) => s,
            Err(_) => {
                status = SubStatus::Failed;
                break;
            }
        };
        let reg = Regularization {
            delta_min: opts.delta_min,
            growth: opts.delta_growth,
            last_delta,
            delta_c: 1e-8 * math::powf(mu, 0.25),
        };
        let factor = match regularize_factor(&mut sys, &reg) {
            Ok(f) => f,
            Err(_) => {
                status = SubStatus::Failed;
                break;
            }
        };
        last_delta = sys.delta;
        if sys.delta > 0.0 || sys.delta_c > 0.0 {
            stats.regularized_iterations += 1;
        }
        stats.max_delta = stats.max_delta.max(sys.delta);
        let dir = factor.solve(&sys);
        let tau = (1.0 - mu).max(0.99);
        let step = make_step(&st, &red, &dir, tau);

        // Line search on the ℓ1 merit function.
        let lambda_full: Vec<f64> = st.lambda.iter().zip(&step.dlambda).map(|(a, b)| a + b).collect();
        nu = nu.max(1.1 * norm_inf(&lambda_full));
        let c1 = norm1(&st.cons);
        let phi0 = st.barrier_value(&st.x, f) + nu * c1;
        let slope = (dot(&st.barrier_gradient(), &step.dx) - nu * c1).min(0.0);
        let err0 = st.barrier_error(mu);
        let merit = |x: &[f64], f: f64, c: &[f64]| st.barrier_value(x, f) + nu * norm1(c);

        let mut alpha = step.alpha_max;
        let mut backtracks = 0;
        let mut accepted: Option<Accepted> = None;
        let mut first = true;
        while alpha >= 1e-14 {
            let mut xt = step.at(&st.x, alpha);
            if let Ok((ft, mut ct)) = eval_fc(nlp, &xt, &b) {
                reset_slacks(&slacks, &st, &mut xt, &mut ct);
                let phit = merit(&xt, ft, &ct);
                if phit.is_finite() && phit <= phi0 + ARMIJO * alpha * slope {
                    accepted = Some(Accepted::plain(alpha, xt, ft, ct));
                    break;
                }
                if first && phit.is_finite() {
                    // Accept a full step that reduces the barrier KKT error
                    // even if the merit function objects.
                    if let Ok((gt, jt)) = eval_gj(nlp, &xt) {
                        let trial = step.trial_state(&st, alpha, xt.clone(), gt, ct.clone(), jt);
                        if trial.barrier_error(mu) <= 0.9 * err0 {
                            let IpState { grad, jac, .. } = trial;
                            accepted = Some(Accepted {
                                alpha,
                                x: xt,
                                f: ft,
                                c: ct,
                                gj: Some((grad, jac)),
                                soc: None,
                            });
                            break;
                        }
                    }
                    // Second-order corrections for constraint curvature.
                    let mut c_soc: Vec<f64> =
                        st.cons.iter().zip(&ct).map(|(c0, c)| alpha * c0 + c).collect();
                    let mut theta_prev = norm1(&ct);
                    for _ in 0..4 {
                        sys.rp = red.rp(&c_soc);
                        let soc = make_step(&st, &red, &factor.solve(&sys), tau);
                        let a = soc.alpha_max;
                        let mut xs = soc.at(&st.x, a);
                        let Ok((fs, mut cs)) = eval_fc(nlp, &xs, &b) else {
                            break;
                        };
                        reset_slacks(&slacks, &st, &mut xs, &mut cs);
                        let phis = merit(&xs, fs, &cs);
                        if phis.is_finite() && phis <= phi0 + ARMIJO * alpha * slope {
                            accepted = Some(Accepted {
                                alpha: a,
                                x: xs,
                                f: fs,
                                c: cs,
                                gj: None,
                                soc: Some(soc),
                            });
                            break;
                        }
                        let theta = norm1(&cs);
                        if theta > 0.99 * theta_prev {
                            break;
                        }
                        theta_prev = theta;
                        c_soc.iter_mut().zip(&cs).for_each(|(s, c)| *s = a * *s + c);
                    }
                    sys.rp = red.rp(&st.cons);
                    if accepted.is_some() {
                        break;
                    }
                }
            }
            first = false;
            alpha *= 0.5;
            backtracks += 1;
        }

        let acc = match accepted {
            Some(a) => {
                tiny_steps = 0;
                a
            }
            None => {
                tiny_steps += 1;
                if tiny_steps >= 5 {
                    status = SubStatus::Failed;
                    break;
                }
                let alpha = 1e-14_f64.max(alpha);
                let xt = step.at(&st.x, alpha);
                match eval_fc(nlp, &xt, &b) {
                    Ok((ft, ct)) => Accepted::plain(alpha, xt, ft, ct),
                    Err(_) => {
                        status = SubStatus::Failed;
                        break;
                    }
                }
            }
        };
        let (gt, jt) = match acc.gj {
            Some(gj) => gj,
            None => match eval_gj(nlp, &acc.x) {
                Ok(gj) => gj,
                Err(error) => {
                    return Err(IpError::Eval {
                        error,
                        last: st.point(),
                    })
                }
            },
        };
        let alpha = acc.alpha;
        let step = acc.soc.unwrap_or(step);

        row.step_norm = alpha * norm_inf(&step.dx);
        row.delta = sys.delta;
        row.alpha_pr = alpha;
        row.alpha_du = step.alpha_z;
        row.backtracks = backtracks;

        st.x = acc.x;
        f = acc.f;
        st.cons = acc.c;
        st.grad = gt;
        st.jac = jt;
        for (l, d) in st.lambda.iter_mut().zip(&step.dlambda) {
            *l += alpha * d;
        }
        for j in 0..n {
            if st.has_lower(j) {
                let s = st.x[j] - st.lower[j];
                let z = st.z_lower[j] + step.alpha_z * step.dzl[j];
                st.z_lower[j] = z.max(mu / (KAPPA_SIGMA * s)).min(KAPPA_SIGMA * mu / s);
            }
            if st.has_upper(j) {
                let s = st.upper[j] - st.x[j];
                let z = st.z_upper[j] + step.alpha_z * step.dzu[j];
                st.z_upper[j] = z.max(mu / (KAPPA_SIGMA * s)).min(KAPPA_SIGMA * mu / s);
            }
        }
        debug_assert!((0..n).all(|j| (!st.has_lower(j) || st.x[j] > st.lower[j])
            && (!st.has_upper(j) || st.x[j] < st.upper[j])));
        iter += 1;
    }

    stats.iterations = iter;
    stats.final_mu = mu;
    stats.objective = f;
    stats.time = clock.elapsed() - t0;
    stats.evals = nlp.counters().since(&counters0);
    log::debug!(
        "{}: {} after {} iterations (inf_pr {:.1e}, inf_du {:.1e}, compl {:.1e})",
        nlp.name(),
        status,
        iter,
        stats.inf_pr,
        stats.inf_du,
        stats.compl
    );
    Ok(SubResult {
        point: st.point(),
        status,
        stats,
    })
}

/// Solves a general problem directly: inequality and range constraints are
/// converted to equalities with slacks, and the result is mapped back to the
/// original variables.
pub fn solve_problem(
    p: &Problem,
    start: Option<&IpStart>,
    opts: &IpOptions,
    clock: &dyn Clock,
) -> Result<SubResult, IpError> {
    let counters0 = p.counters().snapshot();
    let sp = to_slack_form(p);
    let mut s = match start {
        Some(s) => s.clone(),
        None => IpStart::cold(sp.x0()),
    };
    if s.x.len() == p.n() && sp.n() > p.n() {
        s.x.extend_from_slice(&sp.x0()[p.n()..]);
        if let Some((zl, zu)) = &mut s.z {
            zl.resize(sp.n(), 0.0);
            zu.resize(sp.n(), 0.0);
        }
    }
    let mut res = solve_subproblem(&sp, &s, opts, clock).map_err(|e| match e {
        IpError::Eval { error, mut last } => {
            truncate(&mut last, p.n());
            IpError::Eval { error, last }
        }
        other => other,
    })?;
    truncate(&mut res.point, p.n());
    res.stats.evals = p.counters().snapshot().since(&counters0);
    Ok(res)
}

fn truncate(pt: &mut Point, n: usize) {
    pt.x.truncate(n);
    pt.z_lower.truncate(n);
    pt.z_upper.truncate(n);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{build_problem, parse_model};
    use crate::NoClock;

    fn problem(src: &str) -> Problem {
        build_problem(&parse_model(src).unwrap(), "t")
    }

    #[test]
    fn bound_constrained_quadratic() {
        // min x² s.t. x ≥ 1: x* = 1, z* = 2.
        let p = problem("var x >= 1 start 3; minimize x^2;");
        let r = solve_problem(&p, None, &IpOptions::default(), &NoClock).unwrap();
        assert_eq!(r.status, SubStatus::Optimal);
        assert!((r.point.x[0] - 1.0).abs() < 1e-6);
        assert!((r.point.z_lower[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn equality_constrained_quadratic() {
        let p = problem("var x; var y; minimize (x-2)^2 + (y-1)^2; subject to x + y == 1;");
        let r = solve_problem(&p, None, &IpOptions::default(), &NoClock).unwrap();
        assert_eq!(r.status, SubStatus::Optimal);
        assert!((r.point.x[0] - 1.0).abs() < 1e-8);
        assert!(r.point.x[1].abs() < 1e-8);
        assert!((r.point.y[0] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn warm_start_at_solution_is_immediate() {
        let p = problem("var x >= 1 start 3; var y; minimize x^2 + (y - 2)^2; subject to x + y == 4;");
        let opts = IpOptions {
            tol_dual: 1e-9,
            tol_primal: 1e-9,
            tol_comp: 1e-9,
            ..IpOptions::default()
        };
        let cold = solve_problem(&p, None, &opts, &NoClock).unwrap();
        assert_eq!(cold.status, SubStatus::Optimal);
        let warm_opts = IpOptions {
            mu_init: 1e-8,
            warm_start: true,
            ..opts
        };
        let warm = solve_problem(&p, Some(&IpStart::warm(&cold.point)), &warm_opts, &NoClock).unwrap();
        assert_eq!(warm.status, SubStatus::Optimal);
        assert!(warm.stats.iterations <= 3, "{}", warm.stats.iterations);
    }

    #[test]
    fn fixed_variables_stay_put() {
        let p = problem("var x in [2, 2]; var y; minimize (x - 5)^2 + y^2; subject to x + y >= 3;");
        let r = solve_problem(&p, None, &IpOptions::default(), &NoClock).unwrap();
        assert_eq!(r.status, SubStatus::Optimal);
        assert_eq!(r.point.x[0], 2.0);
        assert!((r.point.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unbounded_variables_have_no_barrier_terms() {
        let p = problem("var x; var y; minimize x^2 + y^2; subject to x + y == 1;");
        let st = IpState {
            x: vec![0.3, 0.2],
            lambda: vec![0.0],
            z_lower: vec![0.0; 2],
            z_upper: vec![0.0; 2],
            mu: 0.1,
            grad: p.eval_grad(&[0.3, 0.2]).unwrap(),
            cons: vec![-0.5],
            jac: p.eval_jac(&[0.3, 0.2]).unwrap(),
            lower: p.var_lower().to_vec(),
            upper: p.var_upper().to_vec(),
        };
        let h = p.eval_hess_lag(&st.x, &[0.0], 1.0).unwrap();
        let (sys, _) = assemble_kkt(&st, &h, None, &[], KktMethod::Reduced).unwrap();
        assert_eq!(sys.d, vec![0.0, 0.0]);
        assert_eq!(sys.rd_x, st.grad);
    }
}
