use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::expr::Expr;
use crate::linalg::Triplets;
use crate::model::{Evaluator, Problem, Sense, INF};

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub start: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub sense: Sense,
    pub expr: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
    Ge,
    Range,
}

/// `lower ≤ expr ≤ upper`, with the infinite side set for one-sided relations.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintDecl {
    pub name: String,
    pub expr: Expr,
    pub relation: Relation,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelFile {
    pub vars: Vec<VarDecl>,
    /// A missing objective means "minimize 0".
    pub objective: Option<Objective>,
    pub constraints: Vec<ConstraintDecl>,
}

impl ModelFile {
    pub fn var_names(&self) -> Vec<&str> {
        self.vars.iter().map(|v| v.name.as_str()).collect()
    }
}

/// Prints the model in source form; parsing the output gives back an equal
/// model.
impl fmt::Display for ModelFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.var_names();
        for v in &self.vars {
            write!(f, "var {}", v.name)?;
            match (v.lower, v.upper) {
                (Some(l), Some(u)) => write!(f, " in [{l}, {u}]")?,
                (Some(l), None) => write!(f, " >= {l}")?,
                (None, Some(u)) => write!(f, " <= {u}")?,
                (None, None) => {}
            }
            if let Some(s) = v.start {
                write!(f, " start {s}")?;
            }
            writeln!(f, ";")?;
        }
        if let Some(obj) = &self.objective {
            let kw = match obj.sense {
                Sense::Minimize => "minimize",
                Sense::Maximize => "maximize",
            };
            writeln!(f, "{kw} {};", obj.expr.display(&names))?;
        }
        if !self.constraints.is_empty() {
            writeln!(f, "subject to")?;
        }
        for c in &self.constraints {
            let e = c.expr.display(&names);
            match c.relation {
                Relation::Eq => writeln!(f, "  {}: {e} == {};", c.name, c.lower)?,
                Relation::Le => writeln!(f, "  {}: {e} <= {};", c.name, c.upper)?,
                Relation::Ge => writeln!(f, "  {}: {e} >= {};", c.name, c.lower)?,
                Relation::Range => {
                    writeln!(f, "  {}: {} <= {e} <= {};", c.name, c.lower, c.upper)?
                }
            }
        }
        Ok(())
    }
}

struct SparseExpr {
    i: usize,
    j: usize,
    expr: Expr,
}

struct DslEvaluator {
    obj: Expr,
    grad: Vec<(usize, Expr)>,
    obj_hess: Vec<SparseExpr>,
    cons: Vec<Expr>,
    jac: Vec<SparseExpr>,
    /// Lower-triangle Hessian entries of each constraint, `i` = constraint.
    con_hess: Vec<Vec<SparseExpr>>,
    n: usize,
}

fn gradient(e: &Expr, n: usize) -> Vec<(usize, Expr)> {
    (0..n)
        .map(|j| (j, e.diff(j)))
        .filter(|(_, d)| !d.is_zero())
        .collect()
}

fn hessian(grad: &[(usize, Expr)]) -> Vec<SparseExpr> {
    let mut out = Vec::new();
    for (i, gi) in grad {
        for (j, _) in grad.iter().filter(|(j, _)| j <= i) {
            let h = gi.diff(*j);
            if !h.is_zero() {
                out.push(SparseExpr {
                    i: *i,
                    j: *j,
                    expr: h,
                });
            }
        }
    }
    out
}

impl DslEvaluator {
    fn new(mf: &ModelFile) -> Self {
        let n = mf.vars.len();
        let obj = match &mf.objective {
            Some(o) => o.expr.clone(),
            None => Expr::Const(0.0),
        };
        let grad = gradient(&obj, n);
        let obj_hess = hessian(&grad);
        let mut jac = Vec::new();
        let mut con_hess = Vec::new();
        for (i, c) in mf.constraints.iter().enumerate() {
            let g = gradient(&c.expr, n);
            con_hess.push(hessian(&g));
            jac.extend(g.into_iter().map(|(j, expr)| SparseExpr { i, j, expr }));
        }
        DslEvaluator {
            obj,
            grad,
            obj_hess,
            cons: mf.constraints.iter().map(|c| c.expr.clone()).collect(),
            jac,
            con_hess,
            n,
        }
    }
}

impl Evaluator for DslEvaluator {
    fn obj(&self, x: &[f64]) -> f64 {
        self.obj.eval(x)
    }

    fn grad(&self, x: &[f64], g: &mut [f64]) {
        g.iter_mut().for_each(|v| *v = 0.0);
        for (j, e) in &self.grad {
            g[*j] = e.eval(x);
        }
    }

    fn cons(&self, x: &[f64], c: &mut [f64]) {
        for (ci, e) in c.iter_mut().zip(&self.cons) {
            *ci = e.eval(x);
        }
    }

    fn jac(&self, x: &[f64]) -> Triplets {
        let mut t = Triplets::with_capacity(self.cons.len(), self.n, self.jac.len());
        for s in &self.jac {
            t.push(s.i, s.j, s.expr.eval(x));
        }
        t
    }

    fn hess(&self, x: &[f64], y: &[f64], sigma: f64) -> Triplets {
        let mut t = Triplets::new(self.n, self.n);
        if sigma != 0.0 {
            for s in &self.obj_hess {
                t.push(s.i, s.j, sigma * s.expr.eval(x));
            }
        }
        for (hess, yi) in self.con_hess.iter().zip(y) {
            if *yi == 0.0 {
                continue;
            }
            for s in hess {
                t.push(s.i, s.j, -yi * s.expr.eval(x));
            }
        }
        t
    }
}

/// Builds a [`Problem`] whose derivatives are the symbolic derivatives of the
/// model's expressions. Variables without a start value start at 0, projected
/// into their bounds.
pub fn build_problem(mf: &ModelFile, name: &str) -> Problem {
    let n = mf.vars.len();
    let m = mf.constraints.len();
    let lower = mf.vars.iter().map(|v| v.lower.unwrap_or(-INF)).collect();
    let upper = mf.vars.iter().map(|v| v.upper.unwrap_or(INF)).collect();
    let x0 = mf.vars.iter().map(|v| v.start.unwrap_or(0.0)).collect();
    let sense = mf.objective.as_ref().map_or(Sense::Minimize, |o| o.sense);
    Problem::builder(name, n, m, DslEvaluator::new(mf))
        .x0(x0)
        .var_bounds(lower, upper)
        .con_bounds(
            mf.constraints.iter().map(|c| c.lower).collect(),
            mf.constraints.iter().map(|c| c.upper).collect(),
        )
        .sense(sense)
        .build()
        .expect("parsed models have consistent bounds")
}
