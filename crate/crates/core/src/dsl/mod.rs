//! A small modeling language for scalar NLPs.
//!
//! ```txt
//! # comments run to the end of the line
//! var x in [0, 10] start 1;
//! var y;
//! minimize (x-2)^2 + (y-1)^2;
//! subject to
//!   g1: x^2 - y <= 0;
//!   1 <= x + y <= 3;
//! ```
//!
//! Expressions use `+ - * / ^`, unary minus and the functions `sin`, `cos`,
//! `exp`, `log` and `sqrt`. `^` binds tighter than unary minus and is
//! right-associative; its exponent must be constant. Derivatives are exact and
//! symbolic, see [`Expr::diff`].

mod expr;
mod model;
mod parser;

pub use expr::{add, div, mul, neg, pow, sub, unary, BinaryOp, DisplayExpr, Expr, UnaryOp};
pub use model::{build_problem, ConstraintDecl, ModelFile, Objective, Relation, VarDecl};
pub use parser::{parse_model, parse_model_bytes};

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DslError {
    #[error("{line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: undeclared variable '{name}'")]
    UndeclaredVariable {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: exponent must be constant")]
    NonConstantExponent { line: usize, col: usize },
}

impl DslError {
    /// 1-based line and column of the error.
    pub fn position(&self) -> (usize, usize) {
        match self {
            DslError::Syntax { line, col, .. }
            | DslError::UndeclaredVariable { line, col, .. }
            | DslError::NonConstantExponent { line, col } => (*line, *col),
        }
    }
}
