//! Scalar expressions of time.
//!
//! A [`TimeExpr`] is an immutable expression tree in the single real
//! variable `t` with complex constants. Trees can be parsed from text,
//! printed back, evaluated, conjugated and differentiated symbolically.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := unary (('*'|'/') unary)*
//! unary  := ('-'|'+') unary | factor
//! factor := base ('^' ['-'] int)?
//! base   := number | 'i' | 't' | func '(' expr ')' | '(' expr ')'
//!         | 'piecewise' '{' (guard ':' expr ';')+ 'else' ':' expr '}'
//! guard  := '[' bound ',' bound ')' | 't' '<' bound | 't' '>=' bound
//! func   := sin | cos | exp | sqrt | abs | recip
//! ```
//!
//! Piecewise guards are half-open intervals `[lo, hi)`; the first matching
//! guard wins and `else` covers the rest.

mod diff;
mod parse;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use parse::parse;

/// Builtin unary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Recip,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
            UnaryOp::Recip => "recip",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "sqrt" => UnaryOp::Sqrt,
            "abs" => UnaryOp::Abs,
            "recip" => UnaryOp::Recip,
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
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

/// Half-open guard interval `[lo, hi)`; bounds may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t < self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(Complex64),
    Var,
    Unary(UnaryOp, TimeExpr),
    Binary(BinaryOp, TimeExpr, TimeExpr),
    Pow(TimeExpr, i32),
    Piecewise {
        branches: Vec<(Interval, TimeExpr)>,
        default: TimeExpr,
    },
}

/// Immutable, cheaply clonable expression tree in `t`.
#[derive(Clone, PartialEq)]
pub struct TimeExpr(Arc<Node>);

impl fmt::Debug for TimeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TimeExpr({self})")
    }
}

impl TimeExpr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    fn from_node(node: Node) -> Self {
        TimeExpr(Arc::new(node))
    }

    pub fn parse(source: &str) -> Result<Self> {
        parse(source)
    }

    pub fn t() -> Self {
        Self::from_node(Node::Var)
    }

    pub fn constant(c: Complex64) -> Self {
        Self::from_node(Node::Const(c))
    }

    pub fn real(x: f64) -> Self {
        Self::constant(Complex64::new(x, 0.0))
    }

    pub fn zero() -> Self {
        Self::real(0.0)
    }

    pub fn one() -> Self {
        Self::real(1.0)
    }

    pub fn imag_unit() -> Self {
        Self::constant(Complex64::new(0.0, 1.0))
    }

    pub fn as_const(&self) -> Option<Complex64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(Complex64::new(0.0, 0.0))
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(Complex64::new(1.0, 0.0))
    }

    /// Applies a unary builtin, folding constants whose evaluation cannot fail.
    pub fn unary(op: UnaryOp, arg: TimeExpr) -> Self {
        if let Some(c) = arg.as_const() {
            if let Ok(v) = apply_unary(op, c, 0.0, &arg) {
                return Self::constant(v);
            }
        }
        if op == UnaryOp::Neg {
            if let Node::Unary(UnaryOp::Neg, inner) = arg.node() {
                return inner.clone();
            }
        }
        Self::from_node(Node::Unary(op, arg))
    }

    pub fn binary(op: BinaryOp, lhs: TimeExpr, rhs: TimeExpr) -> Self {
        if let (Some(a), Some(b)) = (lhs.as_const(), rhs.as_const()) {
            let folded = match op {
                BinaryOp::Add => Some(a + b),
                BinaryOp::Sub => Some(a - b),
                BinaryOp::Mul => Some(a * b),
                BinaryOp::Div if b != Complex64::new(0.0, 0.0) => Some(a / b),
                BinaryOp::Div => None,
            };
            if let Some(v) = folded {
                return Self::constant(v);
            }
        }
        match op {
            BinaryOp::Add if lhs.is_zero() => return rhs,
            BinaryOp::Add | BinaryOp::Sub if rhs.is_zero() => return lhs,
            BinaryOp::Sub if lhs.is_zero() => return Self::unary(UnaryOp::Neg, rhs),
            BinaryOp::Mul if lhs.is_zero() || rhs.is_zero() => return Self::zero(),
            BinaryOp::Mul if lhs.is_one() => return rhs,
            BinaryOp::Mul | BinaryOp::Div if rhs.is_one() => return lhs,
            BinaryOp::Div if lhs.is_zero() => return Self::zero(),
            _ => {}
        }
        Self::from_node(Node::Binary(op, lhs, rhs))
    }

    pub fn powi(self, k: i32) -> Self {
        match k {
            0 => Self::one(),
            1 => self,
            _ => {
                if let Some(c) = self.as_const() {
                    if c != Complex64::new(0.0, 0.0) || k > 0 {
                        return Self::constant(c.powi(k));
                    }
                }
                Self::from_node(Node::Pow(self, k))
            }
        }
    }

    pub fn piecewise(branches: Vec<(Interval, TimeExpr)>, default: TimeExpr) -> Self {
        if branches.is_empty() {
            return default;
        }
        Self::from_node(Node::Piecewise { branches, default })
    }

    pub fn sin(self) -> Self {
        Self::unary(UnaryOp::Sin, self)
    }
    pub fn cos(self) -> Self {
        Self::unary(UnaryOp::Cos, self)
    }
    pub fn exp(self) -> Self {
        Self::unary(UnaryOp::Exp, self)
    }
    pub fn sqrt(self) -> Self {
        Self::unary(UnaryOp::Sqrt, self)
    }
    pub fn abs(self) -> Self {
        Self::unary(UnaryOp::Abs, self)
    }
    pub fn recip(self) -> Self {
        Self::unary(UnaryOp::Recip, self)
    }

    /// Evaluates the expression at `t`.
    pub fn eval(&self, t: f64) -> Result<Complex64> {
        match self.node() {
            Node::Const(c) => Ok(*c),
            Node::Var => Ok(Complex64::new(t, 0.0)),
            Node::Unary(op, arg) => apply_unary(*op, arg.eval(t)?, t, self),
            Node::Binary(op, lhs, rhs) => {
                let a = lhs.eval(t)?;
                let b = rhs.eval(t)?;
                match op {
                    BinaryOp::Add => Ok(a + b),
                    BinaryOp::Sub => Ok(a - b),
                    BinaryOp::Mul => Ok(a * b),
                    BinaryOp::Div => {
                        if b == Complex64::new(0.0, 0.0) {
                            Err(singularity(t, self))
                        } else {
                            Ok(a / b)
                        }
                    }
                }
            }
            Node::Pow(base, k) => {
                let b = base.eval(t)?;
                if *k < 0 && b == Complex64::new(0.0, 0.0) {
                    Err(singularity(t, self))
                } else {
                    Ok(b.powi(*k))
                }
            }
            Node::Piecewise { branches, default } => branches
                .iter()
                .find(|(guard, _)| guard.contains(t))
                .map_or(default, |(_, e)| e)
                .eval(t),
        }
    }

    /// Convenience for expressions known to be real valued.
    pub fn eval_real(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?.re)
    }

    /// Pointwise complex conjugate (valid because `t` is real).
    pub fn conj(&self) -> Self {
        match self.node() {
            Node::Const(c) => Self::constant(c.conj()),
            Node::Var => self.clone(),
            Node::Unary(op, arg) => Self::unary(*op, arg.conj()),
            Node::Binary(op, a, b) => Self::binary(*op, a.conj(), b.conj()),
            Node::Pow(b, k) => b.conj().powi(*k),
            Node::Piecewise { branches, default } => Self::piecewise(
                branches.iter().map(|(g, e)| (*g, e.conj())).collect(),
                default.conj(),
            ),
        }
    }

    /// Symbolic derivative with respect to `t`.
    ///
    /// Piecewise expressions are differentiated branchwise and `abs(g)`
    /// becomes `g' * g / abs(g)`, so evaluating the derivative at a kink of
    /// `abs` raises a singularity rather than returning a one-sided value.
    pub fn derivative(&self) -> TimeExpr {
        diff::differentiate(self)
    }

    /// Points where the expression (or one of its derivatives) may fail to
    /// be smooth: finite piecewise guard bounds and the roots of affine
    /// arguments of `abs`. Sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_breakpoints(&mut out);
        sort_dedup(&mut out);
        out
    }

    fn collect_breakpoints(&self, out: &mut Vec<f64>) {
        match self.node() {
            Node::Const(_) | Node::Var => {}
            Node::Unary(op, arg) => {
                if *op == UnaryOp::Abs {
                    if let Some((slope, offset)) = arg.as_affine() {
                        if slope != 0.0 {
                            out.push(-offset / slope);
                        }
                    }
                }
                arg.collect_breakpoints(out);
            }
            Node::Binary(_, a, b) => {
                a.collect_breakpoints(out);
                b.collect_breakpoints(out);
            }
            Node::Pow(b, _) => b.collect_breakpoints(out),
            Node::Piecewise { branches, default } => {
                for (guard, e) in branches {
                    out.extend([guard.lo, guard.hi].into_iter().filter(|x| x.is_finite()));
                    e.collect_breakpoints(out);
                }
                default.collect_breakpoints(out);
            }
        }
    }

    /// Returns `(a, b)` when the expression is structurally `a*t + b` with
    /// real coefficients.
    pub fn as_affine(&self) -> Option<(f64, f64)> {
        let real = |c: Complex64| (c.im == 0.0).then_some(c.re);
        match self.node() {
            Node::Const(c) => Some((0.0, real(*c)?)),
            Node::Var => Some((1.0, 0.0)),
            Node::Unary(UnaryOp::Neg, a) => a.as_affine().map(|(s, o)| (-s, -o)),
            Node::Binary(BinaryOp::Add, a, b) => {
                let (s1, o1) = a.as_affine()?;
                let (s2, o2) = b.as_affine()?;
                Some((s1 + s2, o1 + o2))
            }
            Node::Binary(BinaryOp::Sub, a, b) => {
                let (s1, o1) = a.as_affine()?;
                let (s2, o2) = b.as_affine()?;
                Some((s1 - s2, o1 - o2))
            }
            Node::Binary(BinaryOp::Mul, a, b) => match (a.as_const(), b.as_const()) {
                (Some(c), _) => b.as_affine().and_then(|(s, o)| Some((s * real(c)?, o * real(c)?))),
                (_, Some(c)) => a.as_affine().and_then(|(s, o)| Some((s * real(c)?, o * real(c)?))),
                _ => None,
            },
            Node::Binary(BinaryOp::Div, a, b) => {
                let c = real(b.as_const()?)?;
                let (s, o) = a.as_affine()?;
                (c != 0.0).then(|| (s / c, o / c))
            }
            _ => None,
        }
    }
}

fn singularity(t: f64, node: &TimeExpr) -> Error {
    Error::Singularity {
        t,
        node: node.to_string(),
    }
}

fn apply_unary(op: UnaryOp, x: Complex64, t: f64, node: &TimeExpr) -> Result<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    Ok(match op {
        UnaryOp::Neg => -x,
        UnaryOp::Sin => x.sin(),
        UnaryOp::Cos => x.cos(),
        UnaryOp::Exp => x.exp(),
        UnaryOp::Sqrt => {
            if x.im == 0.0 {
                if x.re < 0.0 {
                    return Err(singularity(t, node));
                }
                Complex64::new(x.re.sqrt(), 0.0)
            } else {
                x.sqrt()
            }
        }
        UnaryOp::Abs => Complex64::new(x.norm(), 0.0),
        UnaryOp::Recip => {
            if x == zero {
                return Err(singularity(t, node));
            }
            x.inv()
        }
    })
}

pub(crate) fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + a.abs()));
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl std::ops::$trait for TimeExpr {
            type Output = TimeExpr;
            fn $method(self, rhs: TimeExpr) -> TimeExpr {
                TimeExpr::binary($op, self, rhs)
            }
        }
        impl std::ops::$trait<&TimeExpr> for &TimeExpr {
            type Output = TimeExpr;
            fn $method(self, rhs: &TimeExpr) -> TimeExpr {
                TimeExpr::binary($op, self.clone(), rhs.clone())
            }
        }
        impl std::ops::$trait<f64> for TimeExpr {
            type Output = TimeExpr;
            fn $method(self, rhs: f64) -> TimeExpr {
                TimeExpr::binary($op, self, TimeExpr::real(rhs))
            }
        }
    };
}

impl_binop!(Add, add, BinaryOp::Add);
impl_binop!(Sub, sub, BinaryOp::Sub);
impl_binop!(Mul, mul, BinaryOp::Mul);
impl_binop!(Div, div, BinaryOp::Div);

impl std::ops::Neg for TimeExpr {
    type Output = TimeExpr;
    fn neg(self) -> TimeExpr {
        TimeExpr::unary(UnaryOp::Neg, self)
    }
}

impl std::ops::Neg for &TimeExpr {
    type Output = TimeExpr;
    fn neg(self) -> TimeExpr {
        TimeExpr::unary(UnaryOp::Neg, self.clone())
    }
}

impl From<f64> for TimeExpr {
    fn from(x: f64) -> Self {
        TimeExpr::real(x)
    }
}

impl std::str::FromStr for TimeExpr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}

fn fmt_real(x: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if x.is_infinite() {
        write!(f, "{}", if x > 0.0 { "inf" } else { "-inf" })
    } else if x < 0.0 || (x == 0.0 && x.is_sign_negative()) {
        write!(f, "(-{:?})", -x)
    } else {
        write!(f, "{x:?}")
    }
}

fn fmt_bound(x: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if x.is_infinite() {
        write!(f, "{}", if x > 0.0 { "inf" } else { "-inf" })
    } else {
        write!(f, "{x:?}")
    }
}

/// Prints a fully parenthesized form that [`parse`] reads back to the same tree.
impl fmt::Display for TimeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => {
                if c.im == 0.0 {
                    fmt_real(c.re, f)
                } else if c.re == 0.0 {
                    write!(f, "(")?;
                    fmt_real(c.im, f)?;
                    write!(f, "*i)")
                } else {
                    write!(f, "(")?;
                    fmt_real(c.re, f)?;
                    write!(f, " + ")?;
                    fmt_real(c.im, f)?;
                    write!(f, "*i)")
                }
            }
            Node::Var => write!(f, "t"),
            Node::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            Node::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Node::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Node::Pow(b, k) => write!(f, "({b})^{k}"),
            Node::Piecewise { branches, default } => {
                write!(f, "piecewise{{")?;
                for (g, e) in branches {
                    write!(f, "[")?;
                    fmt_bound(g.lo, f)?;
                    write!(f, ", ")?;
                    fmt_bound(g.hi, f)?;
                    write!(f, "): {e}; ")?;
                }
                write!(f, "else: {default}}}")
            }
        }
    }
}
