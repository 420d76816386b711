//! Analytic data functions: polynomial expressions and named singular
//! functions, with gradients where available.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Point;

type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// A function `(x, y) -> f64`, optionally with its gradient.
#[derive(Clone)]
pub struct AnalyticFunction {
    label: String,
    value: ScalarFn,
    gradient: Option<GradientFn>,
}

impl fmt::Debug for AnalyticFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticFunction")
            .field("label", &self.label)
            .field("has_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl AnalyticFunction {
    pub fn new(label: impl Into<String>, value: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Self { label: label.into(), value: Arc::new(value), gradient: None }
    }

    pub fn with_gradient(mut self, gradient: impl Fn(Point) -> Point + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_| c).with_gradient(|_| [0.0, 0.0])
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Parses a polynomial expression in `x` and `y` (or `x1`, `x2`), or one of
    /// the named functions listed by [`NAMED_FUNCTIONS`].
    pub fn parse(source: &str) -> Result<Self> {
        let trimmed = source.trim();
        if let Some(named) = named_function(trimmed) {
            return Ok(named);
        }
        let expr = Parser::new(trimmed).parse()?;
        let grad = [expr.derivative(0).simplify(), expr.derivative(1).simplify()];
        let expr = Arc::new(expr.simplify());
        let grad = Arc::new(grad);
        let e = expr.clone();
        Ok(Self::new(trimmed, move |p| e.eval(p)).with_gradient(move |p| [grad[0].eval(p), grad[1].eval(p)]))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, p: Point) -> f64 {
        (self.value)(p)
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn gradient(&self, p: Point) -> Option<Point> {
        self.gradient.as_ref().map(|g| g(p))
    }
}

/// Names accepted by [`AnalyticFunction::parse`] besides polynomials.
pub const NAMED_FUNCTIONS: [&str; 2] = ["singular_2_3", "zero"];

fn named_function(name: &str) -> Option<AnalyticFunction> {
    match name {
        "zero" => Some(AnalyticFunction::zero()),
        "singular_2_3" => Some(corner_singular_function(2.0 / 3.0, PI / 2.0)),
        _ => None,
    }
}

/// `r^a sin(a φ)` with `φ` the polar angle measured counterclockwise from the
/// ray at angle `start`, taken in `[0, 2π)`. With `start = π/2` and `a = 2/3`
/// this vanishes on both edges at the reentrant corner of the builtin L-shape
/// and is harmonic in its interior.
pub fn corner_singular_function(a: f64, start: f64) -> AnalyticFunction {
    let phi = move |p: Point| (p[1].atan2(p[0]) - start).rem_euclid(2.0 * PI);
    AnalyticFunction::new(format!("r^{a:.4} sin({a:.4} phi)"), move |p| {
        let r = p[0].hypot(p[1]);
        if r == 0.0 {
            0.0
        } else {
            r.powf(a) * (a * phi(p)).sin()
        }
    })
    .with_gradient(move |p| {
        let r = p[0].hypot(p[1]);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let (s, c) = (a * phi(p)).sin_cos();
        let scale = a * r.powf(a - 1.0);
        let (er, et) = ([p[0] / r, p[1] / r], [-p[1] / r, p[0] / r]);
        [scale * (s * er[0] + c * et[0]), scale * (s * er[1] + c * et[1])]
    })
}

#[derive(Clone, Debug, PartialEq)]
enum Expr {
    Num(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, f64),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    fn eval(&self, p: Point) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::Var(i) => p[*i],
            Expr::Add(a, b) => a.eval(p) + b.eval(p),
            Expr::Sub(a, b) => a.eval(p) - b.eval(p),
            Expr::Mul(a, b) => a.eval(p) * b.eval(p),
            Expr::Div(a, c) => a.eval(p) / c,
            Expr::Neg(a) => -a.eval(p),
            Expr::Pow(a, n) => a.eval(p).powi(*n as i32),
        }
    }

    fn derivative(&self, var: usize) -> Expr {
        use Expr::*;
        match self {
            Num(_) => Num(0.0),
            Var(i) => Num(if *i == var { 1.0 } else { 0.0 }),
            Add(a, b) => Add(Box::new(a.derivative(var)), Box::new(b.derivative(var))),
            Sub(a, b) => Sub(Box::new(a.derivative(var)), Box::new(b.derivative(var))),
            Mul(a, b) => Add(
                Box::new(Mul(Box::new(a.derivative(var)), b.clone())),
                Box::new(Mul(a.clone(), Box::new(b.derivative(var)))),
            ),
            Div(a, c) => Div(Box::new(a.derivative(var)), *c),
            Neg(a) => Neg(Box::new(a.derivative(var))),
            Pow(_, 0) => Num(0.0),
            Pow(a, n) => Mul(
                Box::new(Mul(Box::new(Num(*n as f64)), Box::new(Pow(a.clone(), n - 1)))),
                Box::new(a.derivative(var)),
            ),
        }
    }

    /// Folds constants and drops additive and multiplicative identities.
    fn simplify(&self) -> Expr {
        use Expr::*;
        match self {
            Num(_) | Var(_) => self.clone(),
            Add(a, b) => match (a.simplify(), b.simplify()) {
                (Num(x), Num(y)) => Num(x + y),
                (Num(z), e) | (e, Num(z)) if z == 0.0 => e,
                (x, y) => Add(Box::new(x), Box::new(y)),
            },
            Sub(a, b) => match (a.simplify(), b.simplify()) {
                (Num(x), Num(y)) => Num(x - y),
                (e, Num(0.0)) => e,
                (Num(0.0), e) => Neg(Box::new(e)),
                (x, y) => Sub(Box::new(x), Box::new(y)),
            },
            Mul(a, b) => match (a.simplify(), b.simplify()) {
                (Num(x), Num(y)) => Num(x * y),
                (Num(z), _) | (_, Num(z)) if z == 0.0 => Num(0.0),
                (Num(o), e) | (e, Num(o)) if o == 1.0 => e,
                (x, y) => Mul(Box::new(x), Box::new(y)),
            },
            Div(a, c) => match a.simplify() {
                Num(x) => Num(x / c),
                e if *c == 1.0 => e,
                e => Div(Box::new(e), *c),
            },
            Neg(a) => match a.simplify() {
                Num(x) => Num(-x),
                e => Neg(Box::new(e)),
            },
            Pow(a, n) => match (a.simplify(), n) {
                (_, 0) => Num(1.0),
                (e, 1) => e,
                (Num(x), n) => Num(x.powi(*n as i32)),
                (e, n) => Pow(Box::new(e), *n),
            },
        }
    }

    fn as_constant(&self) -> Option<f64> {
        match self.simplify() {
            Expr::Num(c) => Some(c),
            _ => None,
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

// Grammar:
//   sum     = product (('+' | '-') product)*
//   product = unary (('*' | '/') unary)*
//   unary   = '-' unary | '+' unary | power
//   power   = atom ('^' unsigned-integer)?
//   atom    = number | x | y | x1 | x2 | '(' sum ')'
impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn error(&self, message: impl fmt::Display) -> Error {
        Error::Config(format!("expression `{}`, column {}: {message}", self.src, self.pos + 1))
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn parse(mut self) -> Result<Expr> {
        if self.src.is_empty() {
            return Err(self.error("empty expression"));
        }
        let e = self.sum()?;
        self.skip_ws();
        if self.pos < self.src.len() {
            return Err(self.error(format!("unexpected `{}`", self.peek().unwrap())));
        }
        Ok(e)
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                let at = self.pos;
                let rhs = self.unary()?;
                match rhs.as_constant() {
                    Some(c) if c != 0.0 => lhs = Expr::Div(Box::new(lhs), c),
                    Some(_) => {
                        self.pos = at;
                        return Err(self.error("division by zero"));
                    }
                    None => {
                        self.pos = at;
                        return Err(self.error("only division by constants is supported"));
                    }
                }
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            self.skip_ws();
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            let digits = &self.src[start..self.pos];
            let n: u32 = digits.parse().map_err(|_| self.error("exponent must be a nonnegative integer"))?;
            if n > 64 {
                return Err(self.error("exponent too large"));
            }
            return Ok(Expr::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.sum()?;
                if !self.eat(')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                    self.pos += 1;
                }
                match &self.src[start..self.pos] {
                    "x" | "x1" => Ok(Expr::Var(0)),
                    "y" | "x2" => Ok(Expr::Var(1)),
                    other => {
                        self.pos = start;
                        Err(self.error(format!("unknown identifier `{other}`")))
                    }
                }
            }
            Some(c) => Err(self.error(format!("unexpected `{c}`"))),
            None => Err(self.error("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut end = start;
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
            end += 1;
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut k = end + 1;
            if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                k += 1;
            }
            if k < bytes.len() && bytes[k].is_ascii_digit() {
                while k < bytes.len() && bytes[k].is_ascii_digit() {
                    k += 1;
                }
                end = k;
            }
        }
        let text = &self.src[start..end];
        let value: f64 = text.parse().map_err(|_| self.error(format!("bad number `{text}`")))?;
        self.pos = end;
        Ok(Expr::Num(value))
    }
}
