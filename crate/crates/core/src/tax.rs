//! Optimal income tax models with incentive-compatibility constraints.
//!
//! Taxpayers come in `T = na·nb·nc·nd·ne` types, one per combination of wage
//! `w`, labor-supply elasticity `η`, basic need `α`, distaste for work `ψ`
//! and consumption elasticity `γ`. Type `i` receives consumption `cᵢ` and
//! earns income `yᵢ`, with utility
//!
//! ```txt
//!   U(c, y) = (c − α)^(1−1/γ) / (1−1/γ) − ψ (y/w)^(1/η+1) / (1/η+1)
//! ```
//!
//! The planner maximizes `Σ λᵢ Uⁱ(cᵢ, yᵢ)` subject to `Uⁱ(cᵢ, yᵢ) ≥ Uⁱ(cⱼ, yⱼ)`
//! for every ordered pair `i ≠ j`, the budget `λᵀ(y − c) ≥ 0` and `c, y ≥ 0`.
//!
//! The consumption term is undefined for `c ≤ α`, so below `c = α + τ` it is
//! continued by the quadratic that matches its value, slope and curvature at
//! the seam.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Triplets;
use crate::math;
use crate::model::{Evaluator, Problem, Sense, INF};

/// Preferences of one taxpayer type.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TypeParams {
    pub w: f64,
    pub eta: f64,
    pub alpha: f64,
    pub psi: f64,
    pub gamma: f64,
}

/// Grid sizes, parameter grids, welfare weights and the seam `τ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TaxConfig {
    pub na: usize,
    pub nb: usize,
    pub nc: usize,
    pub nd: usize,
    pub ne: usize,
    /// Wages, length `na`.
    pub w: Vec<f64>,
    /// Labor-supply elasticities, length `nb`.
    pub eta: Vec<f64>,
    /// Basic needs, length `nc`.
    pub alpha: Vec<f64>,
    /// Distaste for work, length `nd`.
    pub psi: Vec<f64>,
    /// Consumption elasticities, length `ne`.
    pub gamma: Vec<f64>,
    /// Welfare weights, length `T`.
    pub lambda: Vec<f64>,
    pub tau: f64,
    /// Seed for the jitter of the start point.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TaxDims {
    pub t: usize,
    pub n: usize,
    pub m_ic: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TaxError {
    #[error("grid size {what} must be at least 1")]
    EmptyGrid { what: &'static str },
    #[error("{what} has length {got}, expected {expected}")]
    GridLength {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid {what}[{index}] = {value}")]
    InvalidParameter {
        what: &'static str,
        index: usize,
        value: f64,
    },
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect()
}

fn logspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    linspace(math::ln(lo), math::ln(hi), k)
        .into_iter()
        .map(math::exp)
        .collect()
}

/// Type counts for grid sizes `(na, nb, nc, nd, ne)`.
pub fn dims(sizes: [usize; 5]) -> TaxDims {
    let t: usize = sizes.iter().product();
    TaxDims {
        t,
        n: 2 * t,
        m_ic: t * t.saturating_sub(1),
        m: t * t.saturating_sub(1) + 1,
    }
}

impl TaxConfig {
    /// Synthetic defaults: `w` log-spaced in `[1, 5]`, `η` in `[0.25, 1]`,
    /// `α` in `[0, 0.5]`, `ψ` in `[1, 2]`, `γ` in `[2, 3]`, unit weights,
    /// `τ = 0.1`. A grid of size one takes the lower end.
    pub fn new(na: usize, nb: usize, nc: usize, nd: usize, ne: usize) -> Self {
        let t = na * nb * nc * nd * ne;
        TaxConfig {
            na,
            nb,
            nc,
            nd,
            ne,
            w: logspace(1.0, 5.0, na.max(1)),
            eta: linspace(0.25, 1.0, nb.max(1)),
            alpha: linspace(0.0, 0.5, nc.max(1)),
            psi: linspace(1.0, 2.0, nd.max(1)),
            gamma: linspace(2.0, 3.0, ne.max(1)),
            lambda: vec![1.0; t],
            tau: 0.1,
            seed: 0,
        }
    }

    /// Twelve wage types.
    pub fn tax1d() -> Self {
        TaxConfig::new(12, 1, 1, 1, 1)
    }

    /// Twelve wages times five labor-supply elasticities.
    pub fn tax2d() -> Self {
        TaxConfig::new(12, 5, 1, 1, 1)
    }

    pub fn sizes(&self) -> [usize; 5] {
        [self.na, self.nb, self.nc, self.nd, self.ne]
    }

    pub fn dims(&self) -> TaxDims {
        dims(self.sizes())
    }

    pub fn validate(&self) -> Result<(), TaxError> {
        for (what, k) in [
            ("na", self.na),
            ("nb", self.nb),
            ("nc", self.nc),
            ("nd", self.nd),
            ("ne", self.ne),
        ] {
            if k == 0 {
                return Err(TaxError::EmptyGrid { what });
            }
        }
        let t = self.dims().t;
        for (what, v, len) in [
            ("w", &self.w, self.na),
            ("eta", &self.eta, self.nb),
            ("alpha", &self.alpha, self.nc),
            ("psi", &self.psi, self.nd),
            ("gamma", &self.gamma, self.ne),
            ("lambda", &self.lambda, t),
        ] {
            if v.len() != len {
                return Err(TaxError::GridLength {
                    what,
                    expected: len,
                    got: v.len(),
                });
            }
        }
        let positive = |what: &'static str, v: &[f64]| {
            match v.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
                Some(index) => Err(TaxError::InvalidParameter {
                    what,
                    index,
                    value: v[index],
                }),
                None => Ok(()),
            }
        };
        positive("w", &self.w)?;
        positive("eta", &self.eta)?;
        positive("psi", &self.psi)?;
        positive("lambda", &self.lambda)?;
        positive("tau", &[self.tau])?;
        if let Some(index) = self.gamma.iter().position(|g| *g == 1.0 || !(*g > 0.0)) {
            return Err(TaxError::InvalidParameter {
                what: "gamma",
                index,
                value: self.gamma[index],
            });
        }
        if let Some(index) = self.alpha.iter().position(|a| !a.is_finite()) {
            return Err(TaxError::InvalidParameter {
                what: "alpha",
                index,
                value: self.alpha[index],
            });
        }
        Ok(())
    }

    /// Parameters of every type, wage varying slowest.
    pub fn types(&self) -> Vec<TypeParams> {
        let mut out = Vec::with_capacity(self.dims().t);
        for &w in &self.w {
            for &eta in &self.eta {
                for &alpha in &self.alpha {
                    for &psi in &self.psi {
                        for &gamma in &self.gamma {
                            out.push(TypeParams {
                                w,
                                eta,
                                alpha,
                                psi,
                                gamma,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Utility value with its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityEval {
    pub value: f64,
    pub dc: f64,
    pub dy: f64,
    pub dcc: f64,
    pub dyy: f64,
}

/// `(u, u', u'')` of the consumption term at `s = c − α`.
fn consumption(s: f64, gamma: f64, tau: f64) -> (f64, f64, f64) {
    let p = 1.0 - 1.0 / gamma;
    let at = |s: f64| {
        (
            math::powf(s, p) / p,
            math::powf(s, -1.0 / gamma),
            -math::powf(s, -1.0 / gamma - 1.0) / gamma,
        )
    };
    if s >= tau {
        at(s)
    } else {
        let (u0, u1, u2) = at(tau);
        let d = s - tau;
        (u0 + u1 * d + 0.5 * u2 * d * d, u1 + u2 * d, u2)
    }
}

/// `(v, v', v'')` of the work term at income `y ≥ 0`.
fn work(y: f64, th: &TypeParams) -> (f64, f64, f64) {
    let e = 1.0 / th.eta + 1.0;
    let l = y.max(0.0) / th.w;
    (
        th.psi * math::powf(l, e) / e,
        th.psi * math::powf(l, e - 1.0) / th.w,
        th.psi * (e - 1.0) * math::powf(l, e - 2.0) / (th.w * th.w),
    )
}

/// Utility of type `th` at consumption `c` and income `y`.
pub fn utility(c: f64, y: f64, th: &TypeParams, tau: f64) -> UtilityEval {
    let (u, u1, u2) = consumption(c - th.alpha, th.gamma, tau);
    let (v, v1, v2) = work(y, th);
    UtilityEval {
        value: u - v,
        dc: u1,
        dy: -v1,
        dcc: u2,
        dyy: -v2,
    }
}

struct TaxEvaluator {
    types: Vec<TypeParams>,
    lambda: Vec<f64>,
    tau: f64,
}

impl TaxEvaluator {
    fn t(&self) -> usize {
        self.types.len()
    }

    fn u(&self, i: usize, j: usize, x: &[f64]) -> UtilityEval {
        let t = self.t();
        utility(x[j], x[t + j], &self.types[i], self.tau)
    }

    /// Ordered pairs `(i, j)`, `i ≠ j`, in row order.
    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let t = self.t();
        (0..t).flat_map(move |i| (0..t).filter(move |&j| j != i).map(move |j| (i, j)))
    }
}

impl Evaluator for TaxEvaluator {
    fn obj(&self, x: &[f64]) -> f64 {
        (0..self.t())
            .map(|i| self.lambda[i] * self.u(i, i, x).value)
            .sum()
    }

    fn grad(&self, x: &[f64], g: &mut [f64]) {
        let t = self.t();
        for i in 0..t {
            let u = self.u(i, i, x);
            g[i] = self.lambda[i] * u.dc;
            g[t + i] = self.lambda[i] * u.dy;
        }
    }

    fn cons(&self, x: &[f64], c: &mut [f64]) {
        let t = self.t();
        let own: Vec<f64> = (0..t).map(|i| self.u(i, i, x).value).collect();
        for (row, (i, j)) in self.pairs().enumerate() {
            c[row] = own[i] - self.u(i, j, x).value;
        }
        c[t * (t - 1)] = (0..t).map(|i| self.lambda[i] * (x[t + i] - x[i])).sum();
    }

    fn jac(&self, x: &[f64]) -> Triplets {
        let t = self.t();
        let m = t * (t - 1) + 1;
        let mut jac = Triplets::with_capacity(m, 2 * t, 4 * t * (t - 1) + 2 * t);
        let own: Vec<UtilityEval> = (0..t).map(|i| self.u(i, i, x)).collect();
        for (row, (i, j)) in self.pairs().enumerate() {
            let other = self.u(i, j, x);
            jac.push(row, i, own[i].dc);
            jac.push(row, t + i, own[i].dy);
            jac.push(row, j, -other.dc);
            jac.push(row, t + j, -other.dy);
        }
        let last = m - 1;
        for i in 0..t {
            jac.push(last, i, -self.lambda[i]);
            jac.push(last, t + i, self.lambda[i]);
        }
        jac
    }

    fn hess(&self, x: &[f64], y: &[f64], sigma: f64) -> Triplets {
        let t = self.t();
        let mut diag = vec![0.0; 2 * t];
        for i in 0..t {
            let u = self.u(i, i, x);
            diag[i] += sigma * self.lambda[i] * u.dcc;
            diag[t + i] += sigma * self.lambda[i] * u.dyy;
        }
        for (row, (i, j)) in self.pairs().enumerate() {
            let yr = y[row];
            if yr == 0.0 {
                continue;
            }
            let own = self.u(i, i, x);
            let other = self.u(i, j, x);
            diag[i] -= yr * own.dcc;
            diag[t + i] -= yr * own.dyy;
            diag[j] += yr * other.dcc;
            diag[t + j] += yr * other.dyy;
        }
        let mut h = Triplets::with_capacity(2 * t, 2 * t, 2 * t);
        for (k, v) in diag.into_iter().enumerate() {
            h.push(k, k, v);
        }
        h
    }
}

/// Builds the maximization problem for `cfg`. Variables are
/// `(c₁..c_T, y₁..y_T) ≥ 0`; the `T(T−1)` incentive rows come first, ordered
/// by `(i, j)`, and the budget row last. The start point is `c = y = 1` with a
/// small seeded jitter.
pub fn build_tax_problem(cfg: &TaxConfig) -> Result<Problem, TaxError> {
    cfg.validate()?;
    let d = cfg.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x0: Vec<f64> = (0..d.n).map(|_| 1.0 + rng.random_range(-0.05..0.05)).collect();
    let eval = TaxEvaluator {
        types: cfg.types(),
        lambda: cfg.lambda.clone(),
        tau: cfg.tau,
    };
    let name = format!(
        "tax-{}x{}x{}x{}x{}",
        cfg.na, cfg.nb, cfg.nc, cfg.nd, cfg.ne
    );
    Ok(Problem::builder(name, d.n, d.m, eval)
        .x0(x0)
        .var_bounds(vec![0.0; d.n], vec![INF; d.n])
        .con_bounds(vec![0.0; d.m], vec![INF; d.m])
        .sense(Sense::Maximize)
        .build()
        .expect("generated bounds are consistent"))
}
