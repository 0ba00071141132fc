use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::{Evaluator, Problem};
use crate::linalg::Triplets;

/// Bookkeeping for a problem produced by [`to_slack_form`].
#[derive(Debug, Clone, PartialEq)]
pub struct SlackMap {
    /// Variable count of the original problem; original `x` is the prefix.
    pub n_orig: usize,
    /// For each constraint, the index of its slack variable, if any.
    pub slack_of_row: Vec<Option<usize>>,
    /// Right-hand side subtracted from each equality row.
    pub rhs: Vec<f64>,
}

impl SlackMap {
    pub fn original_x<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.n_orig]
    }

    pub fn n_slacks(&self) -> usize {
        self.slack_of_row.iter().flatten().count()
    }

    /// True if variable `j` is a slack.
    pub fn is_slack(&self, j: usize) -> bool {
        j >= self.n_orig
    }
}

struct SlackEvaluator {
    inner: Arc<dyn Evaluator>,
    map: Arc<SlackMap>,
    m: usize,
}

impl Evaluator for SlackEvaluator {
    fn obj(&self, x: &[f64]) -> f64 {
        self.inner.obj(self.map.original_x(x))
    }

    fn grad(&self, x: &[f64], g: &mut [f64]) {
        let n = self.map.n_orig;
        g.iter_mut().for_each(|v| *v = 0.0);
        self.inner.grad(&x[..n], &mut g[..n]);
    }

    fn cons(&self, x: &[f64], c: &mut [f64]) {
        self.inner.cons(self.map.original_x(x), c);
        for (i, ci) in c.iter_mut().enumerate() {
            match self.map.slack_of_row[i] {
                Some(s) => *ci -= x[s],
                None => *ci -= self.map.rhs[i],
            }
        }
    }

    fn jac(&self, x: &[f64]) -> Triplets {
        let mut j = self.inner.jac(self.map.original_x(x));
        j.cols = x.len();
        j.rows = self.m;
        for (i, s) in self.map.slack_of_row.iter().enumerate() {
            if let Some(s) = s {
                j.push(i, *s, -1.0);
            }
        }
        j
    }

    fn hess(&self, x: &[f64], y: &[f64], sigma: f64) -> Triplets {
        let mut h = self.inner.hess(self.map.original_x(x), y, sigma);
        h.rows = x.len();
        h.cols = x.len();
        h
    }
}

/// Converts every range or inequality constraint `l ≤ cᵢ(x) ≤ u` into
/// `cᵢ(x) − sᵢ = 0` with a new bounded variable `l ≤ sᵢ ≤ u`, and shifts
/// equalities `cᵢ(x) = b` to `cᵢ(x) − b = 0`. Slacks start at `c(x₀)`
/// projected into their bounds.
///
/// Problems that are already in this form come back unchanged. The result
/// shares counters with `p`.
pub fn to_slack_form(p: &Problem) -> Problem {
    let m = p.m();
    let needs_slack: Vec<bool> = p
        .con_lower()
        .iter()
        .zip(p.con_upper())
        .map(|(l, u)| l != u)
        .collect();
    if needs_slack.iter().all(|s| !s) && p.con_lower().iter().all(|b| *b == 0.0) {
        return p.clone();
    }

    let n = p.n();
    let mut slack_of_row = vec![None; m];
    let mut rhs = vec![0.0; m];
    let mut next = n;
    for i in 0..m {
        if needs_slack[i] {
            slack_of_row[i] = Some(next);
            next += 1;
        } else {
            rhs[i] = p.con_lower()[i];
        }
    }
    let n_total = next;

    let mut lower = p.var_lower().to_vec();
    let mut upper = p.var_upper().to_vec();
    let mut x0 = p.x0().to_vec();
    // Starting slacks at c(x₀) keeps the initial point feasible when possible.
    let c0 = p.eval_cons(p.x0()).ok();
    for i in 0..m {
        if needs_slack[i] {
            let (l, u) = (p.con_lower()[i], p.con_upper()[i]);
            lower.push(l);
            upper.push(u);
            let guess = c0.as_ref().map_or(0.0, |c| c[i]);
            x0.push(guess.max(l).min(u));
        }
    }

    let map = Arc::new(SlackMap {
        n_orig: n,
        slack_of_row,
        rhs,
    });
    let eval = SlackEvaluator {
        inner: p.evaluator().clone(),
        map: map.clone(),
        m,
    };
    debug_assert_eq!(x0.len(), n_total);
    Problem::builder(p.name(), n_total, m, eval)
        .x0(x0)
        .var_bounds(lower, upper)
        .equalities()
        .sense(p.sense())
        .counters(p.counters().clone())
        .slack_map(map)
        .build()
        .expect("slack form of a valid problem is valid")
}
