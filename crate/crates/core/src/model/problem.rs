use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

use super::{check_finite, check_len, EvalError, ModelError, Nlp, SlackMap, INF};
use crate::linalg::Triplets;

/// Raw function evaluations of a model in its native objective sense.
///
/// Implementations must be pure apart from internal caches: the same `x`
/// yields the same values, and calls may arrive from several threads when
/// distinct problems share an evaluator. Non-finite results are reported by
/// [`Problem`] as [`EvalError::Domain`].
pub trait Evaluator: Send + Sync {
    fn obj(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64], g: &mut [f64]);
    fn cons(&self, x: &[f64], c: &mut [f64]);
    /// Constraint Jacobian, `m × n`.
    fn jac(&self, x: &[f64]) -> Triplets;
    /// `σ ∇²φ(x) − Σ yᵢ ∇²cᵢ(x)`, lower triangle.
    fn hess(&self, x: &[f64], y: &[f64], sigma: f64) -> Triplets;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Sense {
    #[default]
    Minimize,
    Maximize,
}

impl Sense {
    /// Multiplier turning the native objective into a minimization.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        }
    }
}

/// Evaluation counts. Shared between a problem and every problem derived from
/// it (slack form, least-squares views), so a solve through any view is
/// charged to the original.
#[derive(Debug, Default)]
pub struct Counters {
    obj: AtomicU64,
    grad: AtomicU64,
    cons: AtomicU64,
    jac: AtomicU64,
    hess: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CounterSnapshot {
    pub obj: u64,
    pub grad: u64,
    pub cons: u64,
    pub jac: u64,
    pub hess: u64,
}

impl Counters {
    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            obj: self.obj.load(Ordering::Relaxed),
            grad: self.grad.load(Ordering::Relaxed),
            cons: self.cons.load(Ordering::Relaxed),
            jac: self.jac.load(Ordering::Relaxed),
            hess: self.hess.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        for c in [&self.obj, &self.grad, &self.cons, &self.jac, &self.hess] {
            c.store(0, Ordering::Relaxed);
        }
    }

    fn bump(c: &AtomicU64) {
        c.fetch_add(1, Ordering::Relaxed);
    }
}

impl CounterSnapshot {
    pub fn since(&self, earlier: &CounterSnapshot) -> CounterSnapshot {
        CounterSnapshot {
            obj: self.obj - earlier.obj,
            grad: self.grad - earlier.grad,
            cons: self.cons - earlier.cons,
            jac: self.jac - earlier.jac,
            hess: self.hess - earlier.hess,
        }
    }
}

/// A smooth NLP with bounds, start point and counted evaluations.
///
/// Cloning is cheap and shares the evaluator and the counters.
#[derive(Clone)]
pub struct Problem {
    name: String,
    x0: Vec<f64>,
    var_lower: Vec<f64>,
    var_upper: Vec<f64>,
    con_lower: Vec<f64>,
    con_upper: Vec<f64>,
    sense: Sense,
    eval: Arc<dyn Evaluator>,
    counters: Arc<Counters>,
    slack: Option<Arc<SlackMap>>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("n", &self.n())
            .field("m", &self.m())
            .field("sense", &self.sense)
            .finish()
    }
}

pub struct ProblemBuilder {
    name: String,
    n: usize,
    m: usize,
    eval: Arc<dyn Evaluator>,
    x0: Option<Vec<f64>>,
    var_lower: Option<Vec<f64>>,
    var_upper: Option<Vec<f64>>,
    con_lower: Option<Vec<f64>>,
    con_upper: Option<Vec<f64>>,
    sense: Sense,
    counters: Option<Arc<Counters>>,
    slack: Option<Arc<SlackMap>>,
}

impl ProblemBuilder {
    pub fn x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn var_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.var_lower = Some(lower);
        self.var_upper = Some(upper);
        self
    }

    pub fn con_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.con_lower = Some(lower);
        self.con_upper = Some(upper);
        self
    }

    /// All constraints `c(x) = 0`.
    pub fn equalities(self) -> Self {
        let m = self.m;
        self.con_bounds(vec![0.0; m], vec![0.0; m])
    }

    pub fn sense(mut self, sense: Sense) -> Self {
        self.sense = sense;
        self
    }

    pub(crate) fn counters(mut self, counters: Arc<Counters>) -> Self {
        self.counters = Some(counters);
        self
    }

    pub(crate) fn slack_map(mut self, map: Arc<SlackMap>) -> Self {
        self.slack = Some(map);
        self
    }

    pub fn build(self) -> Result<Problem, ModelError> {
        let n = self.n;
        let m = self.m;
        let var_lower = self.var_lower.unwrap_or_else(|| vec![-INF; n]);
        let var_upper = self.var_upper.unwrap_or_else(|| vec![INF; n]);
        let con_lower = self.con_lower.unwrap_or_else(|| vec![0.0; m]);
        let con_upper = self.con_upper.unwrap_or_else(|| vec![0.0; m]);
        let x0 = self.x0.unwrap_or_else(|| vec![0.0; n]);
        for (what, v, len) in [
            ("x0", &x0, n),
            ("variable lower bounds", &var_lower, n),
            ("variable upper bounds", &var_upper, n),
            ("constraint lower bounds", &con_lower, m),
            ("constraint upper bounds", &con_upper, m),
        ] {
            if v.len() != len {
                return Err(ModelError::BadDimension {
                    what,
                    expected: len,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| x.is_nan()) {
                return Err(ModelError::NotANumber { what });
            }
        }
        for (i, (l, u)) in var_lower.iter().zip(&var_upper).enumerate() {
            if l > u {
                return Err(ModelError::CrossedBounds {
                    what: "variable",
                    index: i,
                });
            }
        }
        for (i, (l, u)) in con_lower.iter().zip(&con_upper).enumerate() {
            if l > u {
                return Err(ModelError::CrossedBounds {
                    what: "constraint",
                    index: i,
                });
            }
        }
        let x0 = x0
            .iter()
            .zip(var_lower.iter().zip(&var_upper))
            .map(|(x, (l, u))| x.max(*l).min(*u))
            .collect();
        Ok(Problem {
            name: self.name,
            x0,
            var_lower,
            var_upper,
            con_lower,
            con_upper,
            sense: self.sense,
            eval: self.eval,
            counters: self.counters.unwrap_or_default(),
            slack: self.slack,
        })
    }
}

impl Problem {
    /// Starts a problem with `n` variables and `m` constraints. Defaults: free
    /// variables, equality constraints `c(x) = 0`, start at the origin
    /// (projected into the bounds), minimization.
    pub fn builder(
        name: impl Into<String>,
        n: usize,
        m: usize,
        eval: impl Evaluator + 'static,
    ) -> ProblemBuilder {
        Self::builder_shared(name, n, m, Arc::new(eval))
    }

    pub fn builder_shared(
        name: impl Into<String>,
        n: usize,
        m: usize,
        eval: Arc<dyn Evaluator>,
    ) -> ProblemBuilder {
        ProblemBuilder {
            name: name.into(),
            n,
            m,
            eval,
            x0: None,
            var_lower: None,
            var_upper: None,
            con_lower: None,
            con_upper: None,
            sense: Sense::Minimize,
            counters: None,
            slack: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.x0.len()
    }

    pub fn m(&self) -> usize {
        self.con_lower.len()
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn var_lower(&self) -> &[f64] {
        &self.var_lower
    }

    pub fn var_upper(&self) -> &[f64] {
        &self.var_upper
    }

    pub fn con_lower(&self) -> &[f64] {
        &self.con_lower
    }

    pub fn con_upper(&self) -> &[f64] {
        &self.con_upper
    }

    pub fn evaluator(&self) -> &Arc<dyn Evaluator> {
        &self.eval
    }

    pub fn counters(&self) -> &Arc<Counters> {
        &self.counters
    }

    pub fn slack_map(&self) -> Option<&SlackMap> {
        self.slack.as_deref()
    }

    /// A copy with fresh, zeroed counters.
    pub fn detached(&self) -> Problem {
        let mut p = self.clone();
        p.counters = Arc::default();
        p
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Problem {
        self.name = name.into();
        self
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Problem {
        assert_eq!(x0.len(), self.n());
        self.x0 = x0
            .iter()
            .zip(self.var_lower.iter().zip(&self.var_upper))
            .map(|(x, (l, u))| x.max(*l).min(*u))
            .collect();
        self
    }

    /// Objective in the native sense.
    pub fn eval_obj(&self, x: &[f64]) -> Result<f64, EvalError> {
        check_len("x", x, self.n())?;
        Counters::bump(&self.counters.obj);
        let f = self.eval.obj(x);
        if f.is_finite() {
            Ok(f)
        } else {
            Err(EvalError::Domain { what: "objective" })
        }
    }

    pub fn eval_cons(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        check_len("x", x, self.n())?;
        Counters::bump(&self.counters.cons);
        let mut c = vec![0.0; self.m()];
        if self.m() > 0 {
            self.eval.cons(x, &mut c);
        }
        check_finite("constraints", &c)?;
        Ok(c)
    }

    /// Objective gradient in the native sense.
    pub fn eval_grad(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        check_len("x", x, self.n())?;
        Counters::bump(&self.counters.grad);
        let mut g = vec![0.0; self.n()];
        self.eval.grad(x, &mut g);
        check_finite("gradient", &g)?;
        Ok(g)
    }

    pub fn eval_jac(&self, x: &[f64]) -> Result<Triplets, EvalError> {
        check_len("x", x, self.n())?;
        Counters::bump(&self.counters.jac);
        let j = if self.m() > 0 {
            self.eval.jac(x)
        } else {
            Triplets::new(0, self.n())
        };
        if !j.all_finite() {
            return Err(EvalError::Domain { what: "Jacobian" });
        }
        Ok(j)
    }

    /// Gradient and constraint Jacobian together.
    pub fn eval_derivs(&self, x: &[f64]) -> Result<(Vec<f64>, Triplets), EvalError> {
        Ok((self.eval_grad(x)?, self.eval_jac(x)?))
    }

    /// `σ H₀(x) − Σ yᵢ Hᵢ(x)` for the native objective, lower triangle.
    pub fn eval_hess_lag(&self, x: &[f64], y: &[f64], sigma: f64) -> Result<Triplets, EvalError> {
        check_len("x", x, self.n())?;
        check_len("y", y, self.m())?;
        Counters::bump(&self.counters.hess);
        let h = self.eval.hess(x, y, sigma);
        if !h.all_finite() {
            return Err(EvalError::Domain { what: "Hessian" });
        }
        Ok(h)
    }

    /// Violation of `l_c ≤ c ≤ u_c` per constraint (zero when satisfied).
    pub fn con_violation(&self, c: &[f64]) -> Vec<f64> {
        c.iter()
            .zip(self.con_lower.iter().zip(&self.con_upper))
            .map(|(ci, (l, u))| {
                if ci < l {
                    l - ci
                } else if ci > u {
                    ci - u
                } else {
                    0.0
                }
            })
            .collect()
    }
}

impl Nlp for Problem {
    fn name(&self) -> &str {
        &self.name
    }

    fn n(&self) -> usize {
        Problem::n(self)
    }

    fn m(&self) -> usize {
        Problem::m(self)
    }

    fn x0(&self) -> &[f64] {
        &self.x0
    }

    fn var_lower(&self) -> &[f64] {
        &self.var_lower
    }

    fn var_upper(&self) -> &[f64] {
        &self.var_upper
    }

    fn con_lower(&self) -> &[f64] {
        &self.con_lower
    }

    fn con_upper(&self) -> &[f64] {
        &self.con_upper
    }

    fn obj(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(self.sense.sign() * self.eval_obj(x)?)
    }

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut g = self.eval_grad(x)?;
        if self.sense == Sense::Maximize {
            g.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(g)
    }

    fn cons(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.eval_cons(x)
    }

    fn jac(&self, x: &[f64]) -> Result<Triplets, EvalError> {
        self.eval_jac(x)
    }

    fn hess(&self, x: &[f64], y: &[f64], sigma: f64) -> Result<Triplets, EvalError> {
        self.eval_hess_lag(x, y, self.sense.sign() * sigma)
    }

    fn counters(&self) -> CounterSnapshot {
        self.counters.snapshot()
    }

    fn slack_map(&self) -> Option<&SlackMap> {
        self.slack.as_deref()
    }
}
