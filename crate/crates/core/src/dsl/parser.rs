use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::expr::{default_constraint_name, BinaryOp, Expr, UnaryOp};
use super::model::{ConstraintDecl, ModelFile, Objective, Relation, VarDecl};
use super::DslError;
use crate::model::{Sense, INF};

const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, DslError> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let (tl, tc) = (line, col);
        match b {
            b'\n' => {
                line += 1;
                col = 1;
                i += 1;
            }
            b' ' | b'\t' | b'\r' => {
                col += 1;
                i += 1;
            }
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v: f64 = match text.parse::<f64>() {
                    Ok(v) if v.is_finite() => v,
                    _ => {
                        return Err(DslError::Syntax {
                            line: tl,
                            col: tc,
                            message: alloc::format!("malformed number '{text}'"),
                        })
                    }
                };
                col += i - start;
                out.push(Token {
                    tok: Tok::Num(v),
                    line: tl,
                    col: tc,
                });
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                col += i - start;
                out.push(Token {
                    tok: Tok::Ident(src[start..i].to_string()),
                    line: tl,
                    col: tc,
                });
            }
            _ => {
                let two = if i + 1 < bytes.len() {
                    &bytes[i..i + 2]
                } else {
                    &bytes[i..i + 1]
                };
                let sym: &'static str = match two {
                    b"==" => "==",
                    b"<=" => "<=",
                    b">=" => ">=",
                    _ => match b {
                        b'+' => "+",
                        b'-' => "-",
                        b'*' => "*",
                        b'/' => "/",
                        b'^' => "^",
                        b'(' => "(",
                        b')' => ")",
                        b'[' => "[",
                        b']' => "]",
                        b',' => ",",
                        b';' => ";",
                        b':' => ":",
                        b'=' => "=",
                        _ => {
                            let ch = src[i..].chars().next().unwrap_or('?');
                            return Err(DslError::Syntax {
                                line: tl,
                                col: tc,
                                message: alloc::format!("unexpected character '{ch}'"),
                            });
                        }
                    },
                };
                i += sym.len();
                col += sym.len();
                out.push(Token {
                    tok: Tok::Sym(sym),
                    line: tl,
                    col: tc,
                });
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

const KEYWORDS: &[&str] = &["var", "in", "start", "minimize", "maximize", "subject", "to"];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    vars: Vec<VarDecl>,
    depth: usize,
}

/// Parses a model in the `.ncl-mod` language.
pub fn parse_model(text: &str) -> Result<ModelFile, DslError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        vars: Vec::new(),
        depth: 0,
    };
    p.model()
}

/// Like [`parse_model`] for raw bytes; invalid UTF-8 is a syntax error.
pub fn parse_model_bytes(bytes: &[u8]) -> Result<ModelFile, DslError> {
    match core::str::from_utf8(bytes) {
        Ok(s) => parse_model(s),
        Err(e) => {
            let prefix = &bytes[..e.valid_up_to()];
            let line = 1 + prefix.iter().filter(|b| **b == b'\n').count();
            let col = 1 + prefix.iter().rev().take_while(|b| **b != b'\n').count();
            Err(DslError::Syntax {
                line,
                col,
                message: "invalid UTF-8".to_string(),
            })
        }
    }
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> DslError {
        let t = self.peek();
        DslError::Syntax {
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(t) if *t == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(t) if t == kw)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), DslError> {
        if self.is_sym(s) {
            self.next();
            Ok(())
        } else {
            Err(self.error_here(alloc::format!("expected '{s}'")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), DslError> {
        if self.is_kw(kw) {
            self.next();
            Ok(())
        } else {
            Err(self.error_here(alloc::format!("expected '{kw}'")))
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        match &self.peek().tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            _ => Err(self.error_here("expected identifier")),
        }
    }

    fn signed_number(&mut self) -> Result<f64, DslError> {
        let negative = if self.is_sym("-") {
            self.next();
            true
        } else {
            false
        };
        match self.peek().tok {
            Tok::Num(v) => {
                self.next();
                Ok(if negative { -v } else { v })
            }
            _ => Err(self.error_here("expected number")),
        }
    }

    fn model(&mut self) -> Result<ModelFile, DslError> {
        let mut objective = None;
        let mut constraints: Vec<ConstraintDecl> = Vec::new();
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Eof => break,
                Tok::Ident(k) if k == "var" => {
                    self.next();
                    self.var_decl()?;
                }
                Tok::Ident(k) if k == "minimize" || k == "maximize" => {
                    if objective.is_some() {
                        return Err(self.error_here("objective already given"));
                    }
                    let sense = if k == "minimize" {
                        Sense::Minimize
                    } else {
                        Sense::Maximize
                    };
                    self.next();
                    let expr = self.expr()?;
                    self.expect_sym(";")?;
                    objective = Some(Objective { sense, expr });
                }
                Tok::Ident(k) if k == "subject" => {
                    self.next();
                    self.expect_kw("to")?;
                    loop {
                        match &self.peek().tok {
                            Tok::Eof => break,
                            Tok::Ident(k) if KEYWORDS.contains(&k.as_str()) => break,
                            _ => {}
                        }
                        let idx = constraints.len();
                        constraints.push(self.constraint(idx)?);
                    }
                }
                _ => return Err(self.error_here("expected 'var', 'minimize', 'maximize' or 'subject to'")),
            }
        }
        Ok(ModelFile {
            vars: core::mem::take(&mut self.vars),
            objective,
            constraints,
        })
    }

    fn var_decl(&mut self) -> Result<(), DslError> {
        let at = self.peek().clone();
        let name = self.ident()?;
        if self.vars.iter().any(|v| v.name == name) {
            return Err(DslError::Syntax {
                line: at.line,
                col: at.col,
                message: alloc::format!("variable '{name}' declared twice"),
            });
        }
        let mut decl = VarDecl {
            name,
            lower: None,
            upper: None,
            start: None,
        };
        loop {
            if self.is_kw("in") {
                self.next();
                self.expect_sym("[")?;
                let lo = self.signed_number()?;
                self.expect_sym(",")?;
                let hi = self.signed_number()?;
                self.expect_sym("]")?;
                if lo > hi {
                    return Err(self.error_here("empty bound interval"));
                }
                decl.lower = Some(lo);
                decl.upper = Some(hi);
            } else if self.is_sym(">=") {
                self.next();
                decl.lower = Some(self.signed_number()?);
            } else if self.is_sym("<=") {
                self.next();
                decl.upper = Some(self.signed_number()?);
            } else if self.is_kw("start") {
                self.next();
                decl.start = Some(self.signed_number()?);
            } else {
                break;
            }
        }
        if let (Some(l), Some(u)) = (decl.lower, decl.upper) {
            if l > u {
                return Err(self.error_here("empty bound interval"));
            }
        }
        for b in [decl.lower, decl.upper, decl.start].into_iter().flatten() {
            if !b.is_finite() {
                return Err(self.error_here("bounds and start values must be finite"));
            }
        }
        self.expect_sym(";")?;
        self.vars.push(decl);
        Ok(())
    }

    fn relation(&mut self) -> Option<&'static str> {
        let r = match &self.peek().tok {
            Tok::Sym(s) if matches!(*s, "==" | "=" | "<=" | ">=") => *s,
            _ => return None,
        };
        self.next();
        Some(if r == "=" { "==" } else { r })
    }

    fn constant_value(&self, e: &Expr, at: &Token) -> Result<f64, DslError> {
        let v = e.eval(&[]);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DslError::Syntax {
                line: at.line,
                col: at.col,
                message: "constant bound is not finite".to_string(),
            })
        }
    }

    fn constraint(&mut self, index: usize) -> Result<ConstraintDecl, DslError> {
        let name = match (self.peek_at(0), self.peek_at(1)) {
            (Tok::Ident(_), Tok::Sym(":")) => {
                let n = self.ident()?;
                self.next();
                n
            }
            _ => default_constraint_name(index),
        };
        let first_at = self.peek().clone();
        let first = self.expr()?;
        let r1 = self
            .relation()
            .ok_or_else(|| self.error_here("expected '==', '<=' or '>='"))?;
        let second_at = self.peek().clone();
        let second = self.expr()?;
        let decl = if let Some(r2) = self.relation() {
            let third_at = self.peek().clone();
            let third = self.expr()?;
            if r1 != r2 || r1 == "==" {
                return Err(DslError::Syntax {
                    line: second_at.line,
                    col: second_at.col,
                    message: "a range needs two matching '<=' or '>=' relations".to_string(),
                });
            }
            if !first.is_constant() || !third.is_constant() {
                return Err(DslError::Syntax {
                    line: first_at.line,
                    col: first_at.col,
                    message: "range limits must be constant".to_string(),
                });
            }
            let a = self.constant_value(&first, &first_at)?;
            let b = self.constant_value(&third, &third_at)?;
            let (lower, upper) = if r1 == "<=" { (a, b) } else { (b, a) };
            if lower > upper {
                return Err(DslError::Syntax {
                    line: first_at.line,
                    col: first_at.col,
                    message: "empty range".to_string(),
                });
            }
            ConstraintDecl {
                name,
                expr: second,
                relation: Relation::Range,
                lower,
                upper,
            }
        } else {
            let (expr, rel, bound) = if second.is_constant() {
                (first, r1, self.constant_value(&second, &second_at)?)
            } else if first.is_constant() {
                let flipped = match r1 {
                    "<=" => ">=",
                    ">=" => "<=",
                    r => r,
                };
                (second, flipped, self.constant_value(&first, &first_at)?)
            } else {
                (
                    Expr::Binary(BinaryOp::Sub, Box::new(first), Box::new(second)),
                    r1,
                    0.0,
                )
            };
            let (relation, lower, upper) = match rel {
                "==" => (Relation::Eq, bound, bound),
                "<=" => (Relation::Le, -INF, bound),
                _ => (Relation::Ge, bound, INF),
            };
            ConstraintDecl {
                name,
                expr,
                relation,
                lower,
                upper,
            }
        };
        self.expect_sym(";")?;
        Ok(decl)
    }

    fn enter(&mut self) -> Result<(), DslError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error_here("expression nested too deeply"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = if self.is_sym("+") {
                BinaryOp::Add
            } else if self.is_sym("-") {
                BinaryOp::Sub
            } else {
                break;
            };
            self.next();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.is_sym("*") {
                BinaryOp::Mul
            } else if self.is_sym("/") {
                BinaryOp::Div
            } else {
                break;
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if self.is_sym("-") {
            self.enter()?;
            self.next();
            let inner = self.unary()?;
            self.depth -= 1;
            // `-2.5` is a literal, as the printer writes negative constants.
            return Ok(match inner {
                Expr::Const(c) => Expr::Const(-c),
                e => Expr::Unary(UnaryOp::Neg, Box::new(e)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, DslError> {
        let base = self.primary()?;
        if self.is_sym("^") {
            let at = self.next();
            self.enter()?;
            let exponent = self.unary()?;
            self.depth -= 1;
            if !exponent.is_constant() {
                return Err(DslError::NonConstantExponent {
                    line: at.line,
                    col: at.col,
                });
            }
            return Ok(Expr::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Num(v) => {
                self.next();
                Ok(Expr::Const(*v))
            }
            Tok::Sym("(") => {
                self.next();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if KEYWORDS.contains(&name.as_str()) {
                    return Err(self.error_here(alloc::format!("unexpected keyword '{name}'")));
                }
                self.next();
                if self.is_sym("(") {
                    let op = UnaryOp::from_function_name(name).ok_or_else(|| DslError::Syntax {
                        line: t.line,
                        col: t.col,
                        message: alloc::format!("unknown function '{name}'"),
                    })?;
                    self.next();
                    let arg = self.expr()?;
                    self.expect_sym(")")?;
                    return Ok(Expr::Unary(op, Box::new(arg)));
                }
                match self.vars.iter().position(|v| &v.name == name) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(DslError::UndeclaredVariable {
                        name: name.clone(),
                        line: t.line,
                        col: t.col,
                    }),
                }
            }
            _ => Err(self.error_here("expected expression")),
        }
    }
}
