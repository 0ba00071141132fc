use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    pub fn function_name(self) -> Option<&'static str> {
        match self {
            UnaryOp::Neg => None,
            UnaryOp::Sin => Some("sin"),
            UnaryOp::Cos => Some("cos"),
            UnaryOp::Exp => Some("exp"),
            UnaryOp::Log => Some("log"),
            UnaryOp::Sqrt => Some("sqrt"),
        }
    }

    pub fn from_function_name(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Scalar expression over variables `x[0..n]`.
///
/// The exponent of `Pow` is always free of variables.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Unary(op, a) => {
                let a = a.eval(x);
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Sin => math::sin(a),
                    UnaryOp::Cos => math::cos(a),
                    UnaryOp::Exp => math::exp(a),
                    UnaryOp::Log => math::ln(a),
                    UnaryOp::Sqrt => math::sqrt(a),
                }
            }
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => a / b,
                    BinaryOp::Pow => math::powf(a, b),
                }
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(_) => false,
            Expr::Unary(_, a) => a.is_constant(),
            Expr::Binary(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Unary(_, a) => a.max_var(),
            Expr::Binary(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(p), Some(q)) => Some(p.max(q)),
                (p, q) => p.or(q),
            },
        }
    }

    fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    /// Exact partial derivative with respect to variable `var`.
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Unary(op, a) => {
                let da = a.diff(var);
                if da.is_zero() {
                    return Expr::Const(0.0);
                }
                let a = (**a).clone();
                match op {
                    UnaryOp::Neg => neg(da),
                    UnaryOp::Sin => mul(unary(UnaryOp::Cos, a), da),
                    UnaryOp::Cos => neg(mul(unary(UnaryOp::Sin, a), da)),
                    UnaryOp::Exp => mul(unary(UnaryOp::Exp, a), da),
                    UnaryOp::Log => div(da, a),
                    UnaryOp::Sqrt => div(da, mul(Expr::Const(2.0), unary(UnaryOp::Sqrt, a))),
                }
            }
            Expr::Binary(op, a, b) => {
                let (da, db) = (a.diff(var), b.diff(var));
                let (a, b) = ((**a).clone(), (**b).clone());
                match op {
                    BinaryOp::Add => add(da, db),
                    BinaryOp::Sub => sub(da, db),
                    BinaryOp::Mul => add(mul(da, b), mul(a, db)),
                    BinaryOp::Div => {
                        if db.is_zero() {
                            div(da, b)
                        } else {
                            sub(div(da, b.clone()), div(mul(a, db), pow(b, Expr::Const(2.0))))
                        }
                    }
                    BinaryOp::Pow => {
                        // exponent is constant: d(u^k) = k u^(k−1) u'
                        if da.is_zero() {
                            return Expr::Const(0.0);
                        }
                        let km1 = sub(b.clone(), Expr::Const(1.0));
                        mul(mul(b, pow(a, km1)), da)
                    }
                }
            }
        }
    }

    /// Displays the expression using `names` for variables.
    pub fn display<'a, S: AsRef<str>>(&'a self, names: &'a [S]) -> DisplayExpr<'a, S> {
        DisplayExpr { expr: self, names }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
            Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
            Expr::Unary(UnaryOp::Neg, _) => 3,
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => 3,
            Expr::Binary(BinaryOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

pub fn unary(op: UnaryOp, a: Expr) -> Expr {
    if let Some(c) = a.as_const() {
        let folded = Expr::Unary(op, Box::new(Expr::Const(c))).eval(&[]);
        if folded.is_finite() {
            return Expr::Const(folded);
        }
    }
    Expr::Unary(op, Box::new(a))
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Unary(UnaryOp::Neg, inner) => *inner,
        other => Expr::Unary(UnaryOp::Neg, Box::new(other)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(p), Some(q)) => Expr::Const(p + q),
        (Some(z), _) if z == 0.0 => b,
        (_, Some(z)) if z == 0.0 => a,
        _ => Expr::Binary(BinaryOp::Add, Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(p), Some(q)) => Expr::Const(p - q),
        (_, Some(z)) if z == 0.0 => a,
        (Some(z), _) if z == 0.0 => neg(b),
        _ => Expr::Binary(BinaryOp::Sub, Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(p), Some(q)) => Expr::Const(p * q),
        (Some(z), _) | (_, Some(z)) if z == 0.0 => Expr::Const(0.0),
        (Some(o), _) if o == 1.0 => b,
        (_, Some(o)) if o == 1.0 => a,
        (Some(m), _) if m == -1.0 => neg(b),
        (_, Some(m)) if m == -1.0 => neg(a),
        _ => Expr::Binary(BinaryOp::Mul, Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(p), Some(q)) if q != 0.0 => Expr::Const(p / q),
        (Some(z), _) if z == 0.0 => Expr::Const(0.0),
        (_, Some(o)) if o == 1.0 => a,
        _ => Expr::Binary(BinaryOp::Div, Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Expr, k: Expr) -> Expr {
    match k.as_const() {
        Some(z) if z == 0.0 => Expr::Const(1.0),
        Some(o) if o == 1.0 => a,
        _ => match (a.as_const(), k.as_const()) {
            (Some(p), Some(q)) if math::powf(p, q).is_finite() => Expr::Const(math::powf(p, q)),
            _ => Expr::Binary(BinaryOp::Pow, Box::new(a), Box::new(k)),
        },
    }
}

pub struct DisplayExpr<'a, S> {
    expr: &'a Expr,
    names: &'a [S],
}

impl<S: AsRef<str>> DisplayExpr<'_, S> {
    fn child<'b>(&'b self, e: &'b Expr) -> DisplayExpr<'b, S> {
        DisplayExpr {
            expr: e,
            names: self.names,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({})", self.child(e))
        } else {
            write!(f, "{}", self.child(e))
        }
    }
}

impl<S: AsRef<str>> fmt::Display for DisplayExpr<'_, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expr {
            Expr::Const(c) => {
                if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                    write!(f, "-{}", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Var(i) => match self.names.get(*i) {
                Some(name) => f.write_str(name.as_ref()),
                None => write!(f, "x{i}"),
            },
            Expr::Unary(UnaryOp::Neg, a) => {
                f.write_str("-")?;
                self.write_child(f, a, a.precedence() < 3)
            }
            Expr::Unary(op, a) => {
                write!(f, "{}({})", op.function_name().unwrap_or("?"), self.child(a))
            }
            Expr::Binary(op, a, b) => {
                let (sym, lp, rp) = match op {
                    BinaryOp::Add => (" + ", a.precedence() < 1, b.precedence() <= 1),
                    BinaryOp::Sub => (" - ", a.precedence() < 1, b.precedence() <= 1),
                    BinaryOp::Mul => ("*", a.precedence() < 2, b.precedence() <= 2),
                    BinaryOp::Div => ("/", a.precedence() < 2, b.precedence() <= 2),
                    BinaryOp::Pow => ("^", a.precedence() <= 4, b.precedence() < 3),
                };
                self.write_child(f, a, lp)?;
                f.write_str(sym)?;
                self.write_child(f, b, rp)
            }
        }
    }
}

/// Name used for the `i`-th constraint when none is given.
pub(crate) fn default_constraint_name(i: usize) -> String {
    alloc::format!("c{}", i + 1)
}
