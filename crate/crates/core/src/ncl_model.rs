//! The NCL subproblem as a model over stacked variables `v = (x, r)`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::linalg::{dot, Triplets};
use crate::model::{check_len, CounterSnapshot, EvalError, Nlp, Problem, SlackMap, Structure, INF};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NclModelError {
    #[error("multiplier estimate has length {got}, expected {expected}")]
    BadDimension { expected: usize, got: usize },
    #[error("penalty parameter must be positive, got {0}")]
    NonPositiveRho(f64),
}

/// Subproblem NC_k for a problem `p`:
///
/// ```txt
///   minimize    f(x) + yᵀr + ½ρ‖r‖²
///   subject to  l_c ≤ c(x) + r ≤ u_c,   ℓ ≤ x ≤ u,   r free
/// ```
///
/// where `f` is the objective of `p` turned into a minimization. With `m = 0`
/// there is no `r` and the model coincides with `p`.
#[derive(Debug, Clone)]
pub struct NclProblem {
    inner: Problem,
    y: Vec<f64>,
    rho: f64,
    name: String,
    x0: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

fn check_params(m: usize, y: &[f64], rho: f64) -> Result<(), NclModelError> {
    if y.len() != m {
        return Err(NclModelError::BadDimension {
            expected: m,
            got: y.len(),
        });
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(NclModelError::NonPositiveRho(rho));
    }
    Ok(())
}

impl NclProblem {
    /// Wraps `p` with multiplier estimate `y` and penalty `rho`. The start
    /// point is `(x0, 0)`.
    pub fn new(p: Problem, y: Vec<f64>, rho: f64) -> Result<Self, NclModelError> {
        check_params(p.m(), &y, rho)?;
        let (n, m) = (p.n(), p.m());
        let mut x0 = p.x0().to_vec();
        x0.resize(n + m, 0.0);
        let mut lower = p.var_lower().to_vec();
        lower.resize(n + m, -INF);
        let mut upper = p.var_upper().to_vec();
        upper.resize(n + m, INF);
        Ok(NclProblem {
            name: alloc::format!("{}-ncl", p.name()),
            inner: p,
            y,
            rho,
            x0,
            lower,
            upper,
        })
    }

    pub fn inner(&self) -> &Problem {
        &self.inner
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Number of original variables `n`; `r` occupies `n..n+m`.
    pub fn n_x(&self) -> usize {
        self.inner.n()
    }

    pub fn split<'a>(&self, v: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        v.split_at(self.n_x())
    }

    /// Replaces the start point; `v` is stacked.
    pub fn set_start(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.x0.len());
        self.x0.copy_from_slice(v);
    }

    /// Sets `y_k` and `ρ_k` for subsequent evaluations.
    pub fn update_params(&mut self, y: &[f64], rho: f64) -> Result<(), NclModelError> {
        check_params(self.inner.m(), y, rho)?;
        self.y.copy_from_slice(y);
        self.rho = rho;
        Ok(())
    }

    pub fn ncl_obj(&self, v: &[f64]) -> Result<f64, EvalError> {
        check_len("v", v, self.x0.len())?;
        let (x, r) = self.split(v);
        let f = Nlp::obj(&self.inner, x)?;
        Ok(f + dot(&self.y, r) + 0.5 * self.rho * dot(r, r))
    }

    /// Gradient `(g(x), y + ρr)`, constraints `c(x) + r` and Jacobian
    /// `[J(x) I]`.
    pub fn ncl_grad_cons_jac(&self, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Triplets), EvalError> {
        Ok((self.grad(v)?, self.cons(v)?, self.jac(v)?))
    }

    /// `blockdiag(H(x, λ, σ), σρI)`, lower triangle.
    pub fn ncl_hess(&self, v: &[f64], lambda: &[f64], sigma: f64) -> Result<Triplets, EvalError> {
        self.hess(v, lambda, sigma)
    }
}

impl Nlp for NclProblem {
    fn name(&self) -> &str {
        &self.name
    }

    fn n(&self) -> usize {
        self.x0.len()
    }

    fn m(&self) -> usize {
        self.inner.m()
    }

    fn x0(&self) -> &[f64] {
        &self.x0
    }

    fn var_lower(&self) -> &[f64] {
        &self.lower
    }

    fn var_upper(&self) -> &[f64] {
        &self.upper
    }

    fn con_lower(&self) -> &[f64] {
        self.inner.con_lower()
    }

    fn con_upper(&self) -> &[f64] {
        self.inner.con_upper()
    }

    fn obj(&self, v: &[f64]) -> Result<f64, EvalError> {
        self.ncl_obj(v)
    }

    fn grad(&self, v: &[f64]) -> Result<Vec<f64>, EvalError> {
        check_len("v", v, self.x0.len())?;
        let (x, r) = self.split(v);
        let mut g = Nlp::grad(&self.inner, x)?;
        g.extend(self.y.iter().zip(r).map(|(y, r)| y + self.rho * r));
        Ok(g)
    }

    fn cons(&self, v: &[f64]) -> Result<Vec<f64>, EvalError> {
        check_len("v", v, self.x0.len())?;
        let (x, r) = self.split(v);
        let mut c = self.inner.eval_cons(x)?;
        c.iter_mut().zip(r).for_each(|(c, r)| *c += r);
        Ok(c)
    }

    fn jac(&self, v: &[f64]) -> Result<Triplets, EvalError> {
        check_len("v", v, self.x0.len())?;
        let (x, _) = self.split(v);
        let n = self.n_x();
        let mut j = self.inner.eval_jac(x)?;
        j.cols = v.len();
        for i in 0..self.m() {
            j.push(i, n + i, 1.0);
        }
        Ok(j)
    }

    fn hess(&self, v: &[f64], lambda: &[f64], sigma: f64) -> Result<Triplets, EvalError> {
        check_len("v", v, self.x0.len())?;
        let (x, _) = self.split(v);
        let n = self.n_x();
        let mut h = Nlp::hess(&self.inner, x, lambda, sigma)?;
        h.rows = v.len();
        h.cols = v.len();
        for i in 0..self.m() {
            h.push(n + i, n + i, sigma * self.rho);
        }
        Ok(h)
    }

    fn counters(&self) -> CounterSnapshot {
        self.inner.counters().snapshot()
    }

    fn structure(&self) -> Structure<'_> {
        if self.m() == 0 {
            Structure::Plain
        } else {
            Structure::Residual {
                inner: &self.inner,
                y: &self.y,
                rho: self.rho,
            }
        }
    }

    fn slack_map(&self) -> Option<&SlackMap> {
        self.inner.slack_map()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{build_problem, parse_model};
    use alloc::vec;
    use nalgebra::DMatrix;

    fn problem(src: &str) -> Problem {
        build_problem(&parse_model(src).unwrap(), "t")
    }

    #[test]
    fn unconstrained_problem_is_unchanged() {
        let p = problem("var x start 2; minimize x^2;");
        let np = NclProblem::new(p.clone(), vec![], 100.0).unwrap();
        assert_eq!(np.n(), 1);
        assert_eq!(np.obj(&[2.0]).unwrap(), 4.0);
        assert!(matches!(np.structure(), Structure::Plain));
    }

    #[test]
    fn stacked_dimensions_and_bounds() {
        let p = problem(
            "var a in [0, 1]; var b; minimize a + b; subject to a == 0; b == 1; a*b <= 2;",
        );
        let np = NclProblem::new(p, vec![1.0; 3], 100.0).unwrap();
        assert_eq!(np.n(), 5);
        assert_eq!(&np.var_lower()[2..], &[-INF; 3]);
        assert_eq!(&np.var_upper()[2..], &[INF; 3]);
        assert_eq!(np.y(), &[1.0, 1.0, 1.0]);
        assert_eq!(np.rho(), 100.0);
        assert_eq!(&np.x0()[2..], &[0.0; 3]);
        assert_eq!(np.con_upper()[2], 2.0);
    }

    #[test]
    fn objective_by_hand() {
        let p = problem("var a; var b; subject to a == 0; b == 0;");
        let mut np = NclProblem::new(p, vec![1.0, 1.0], 2.0).unwrap();
        assert_eq!(np.ncl_obj(&[5.0, 6.0, 1.0, 1.0]).unwrap(), 4.0);

        let q = problem("var a start 1; minimize a^3; subject to a == 0;");
        let nq = NclProblem::new(q, vec![0.0], 2.0).unwrap();
        assert_eq!(nq.ncl_obj(&[1.0, 3.0]).unwrap(), 1.0 + 9.0);

        np.update_params(&[3.0, -1.0], 7.0).unwrap();
        assert_eq!(np.ncl_obj(&[5.0, 6.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(
            np.update_params(&[1.0], 1.0),
            Err(NclModelError::BadDimension {
                expected: 2,
                got: 1
            })
        );
        assert_eq!(
            np.update_params(&[1.0, 1.0], 0.0),
            Err(NclModelError::NonPositiveRho(0.0))
        );
    }

    #[test]
    fn hessian_is_block_diagonal() {
        let p = problem("var a; var b; minimize a^2 + b^2; subject to a + b == 1;");
        let mut np = NclProblem::new(p, vec![0.0], 5.0).unwrap();
        let v = [0.3, -0.2, 0.1];
        let h = np.ncl_hess(&v, &[0.0], 1.0).unwrap().sym_to_dense();
        assert_eq!(h.as_slice(), &[2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 5.0]);
        assert_eq!(h.asymmetry(), 0.0);

        np.update_params(&[0.0], 50.0).unwrap();
        let h10 = np.ncl_hess(&v, &[0.0], 1.0).unwrap().sym_to_dense();
        assert_eq!(h10[(2, 2)], 10.0 * h[(2, 2)]);
    }

    #[test]
    fn residual_jacobian_has_unit_singular_values() {
        // σ_min([J I]) ≥ 1 because [J I][J I]ᵀ = JJᵀ + I.
        let src = "var a; var b; var c; var d; var e; var f; var g; var h;\n\
                   subject to a*b + c == 0; a + a == 0; b - h^2 == 0; d*e*f == 0; g + a*c == 0;";
        let p = problem(src);
        let np = NclProblem::new(p, vec![0.0; 5], 1.0).unwrap();
        let v: Vec<f64> = (0..13).map(|i| (i as f64 * 0.7).sin()).collect();
        let (g, c, j) = np.ncl_grad_cons_jac(&v).unwrap();
        assert_eq!(g.len(), 13);
        assert_eq!(c.len(), 5);
        let jd = j.to_dense();
        for i in 0..5 {
            for k in 0..5 {
                assert_eq!(jd[(i, 8 + k)], if i == k { 1.0 } else { 0.0 });
            }
        }
        let m = DMatrix::from_row_slice(5, 13, jd.as_slice());
        let s = m.singular_values();
        assert!(s.min() >= 1.0 - 1e-12, "{s}");
    }
}
