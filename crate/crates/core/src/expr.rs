//! Small arithmetic expression language used by the JSON definition files.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'pi' | name | func '(' expr ')' | '(' expr ')'
//! func  := 'sin' | 'cos' | 'sqrt'
//! ```
//!
//! Variable names are resolved against a caller-supplied list (typically
//! `x1..xn` or `u1..um`). Exponents must be constant. Expressions can be
//! differentiated symbolically, which gives user-defined frames analytic
//! Jacobians.

use std::fmt;

use thiserror::Error;

/// Parse failure with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Power with a constant exponent.
    Pow(Box<Expr>, f64),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Sqrt(Box<Expr>),
}

impl Expr {
    /// Parses `src` with variables named by `vars` (index = position).
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expr, ParseError> {
        let mut p = Parser::new(src, vars);
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error(format!("unexpected character '{}'", p.chars[p.pos])));
        }
        Ok(e)
    }

    /// Parses with variables `{prefix}1 .. {prefix}n`.
    pub fn parse_indexed(src: &str, prefix: &str, n: usize) -> Result<Expr, ParseError> {
        let names: Vec<String> = (1..=n).map(|i| format!("{prefix}{i}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        Expr::parse(src, &refs)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, k) => powf(a.eval(x), *k),
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cos(a) => a.eval(x).cos(),
            Expr::Sqrt(a) => a.eval(x).sqrt(),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sin(a) | Expr::Cos(a) | Expr::Sqrt(a) => {
                a.max_var()
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(i), Some(j)) => Some(i.max(j)),
                    (i, j) => i.or(j),
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 1.0)
    }

    /// Partial derivative with respect to variable `var`.
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(var)),
            Expr::Add(a, b) => add(a.diff(var), b.diff(var)),
            Expr::Sub(a, b) => sub(a.diff(var), b.diff(var)),
            Expr::Mul(a, b) => add(
                mul(a.diff(var), (**b).clone()),
                mul((**a).clone(), b.diff(var)),
            ),
            Expr::Div(a, b) => {
                // (a'b - ab') / b^2
                let num = sub(
                    mul(a.diff(var), (**b).clone()),
                    mul((**a).clone(), b.diff(var)),
                );
                div(num, pow((**b).clone(), 2.0))
            }
            Expr::Pow(a, k) => mul(
                mul(Expr::Const(*k), pow((**a).clone(), k - 1.0)),
                a.diff(var),
            ),
            Expr::Sin(a) => mul(Expr::Cos(a.clone()), a.diff(var)),
            Expr::Cos(a) => neg(mul(Expr::Sin(a.clone()), a.diff(var))),
            Expr::Sqrt(a) => div(a.diff(var), mul(Expr::Const(2.0), Expr::Sqrt(a.clone()))),
        }
    }

    /// Gradient as a vector of expressions over `n` variables.
    pub fn gradient(&self, n: usize) -> Vec<Expr> {
        (0..n).map(|i| self.diff(i)).collect()
    }
}

fn powf(b: f64, k: f64) -> f64 {
    if k.fract() == 0.0 && k.abs() <= 64.0 {
        b.powi(k as i32)
    } else {
        b.powf(k)
    }
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        _ if a.is_zero() => b,
        _ if b.is_zero() => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        _ if b.is_zero() => a,
        _ if a.is_zero() => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        _ if a.is_zero() || b.is_zero() => Expr::Const(0.0),
        _ if a.is_one() => b,
        _ if b.is_one() => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) if *y != 0.0 => Expr::Const(x / y),
        _ if a.is_zero() => Expr::Const(0.0),
        _ if b.is_one() => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Expr, k: f64) -> Expr {
    if k == 0.0 {
        return Expr::Const(1.0);
    }
    if k == 1.0 {
        return a;
    }
    match a {
        Expr::Const(c) => Expr::Const(powf(c, k)),
        other => Expr::Pow(Box::new(other), k),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, k) => write!(f, "({a}^{k})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
        }
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    vars: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn new(src: &str, vars: &'a [&'a str]) -> Self {
        Parser { chars: src.chars().collect(), pos: 0, vars }
    }

    fn error(&self, message: String) -> ParseError {
        let (mut line, mut column) = (1, 1);
        for &c in &self.chars[..self.pos.min(self.chars.len())] {
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
        }
        ParseError { line, column, message }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    lhs = add(lhs, self.term()?);
                }
                Some('-') => {
                    self.pos += 1;
                    lhs = sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    lhs = mul(lhs, self.unary()?);
                }
                Some('/') => {
                    self.pos += 1;
                    lhs = div(lhs, self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some('-') {
            self.pos += 1;
            return Ok(neg(self.unary()?));
        }
        if self.peek() == Some('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            let at = self.pos;
            let exponent = self.unary()?;
            if exponent.max_var().is_some() {
                self.pos = at;
                return Err(self.error("exponent must be constant".into()));
            }
            return Ok(pow(base, exponent.eval(&[])));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input".into())),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => {
                let start = self.pos;
                while self.pos < self.chars.len()
                    && (self.chars[self.pos].is_alphanumeric() || self.chars[self.pos] == '_')
                {
                    self.pos += 1;
                }
                let name: String = self.chars[start..self.pos].iter().collect();
                match name.as_str() {
                    "sin" | "cos" | "sqrt" => {
                        self.expect('(')?;
                        let arg = self.expr()?;
                        self.expect(')')?;
                        Ok(match name.as_str() {
                            "sin" => match arg {
                                Expr::Const(c) => Expr::Const(c.sin()),
                                a => Expr::Sin(Box::new(a)),
                            },
                            "cos" => match arg {
                                Expr::Const(c) => Expr::Const(c.cos()),
                                a => Expr::Cos(Box::new(a)),
                            },
                            _ => match arg {
                                Expr::Const(c) => Expr::Const(c.sqrt()),
                                a => Expr::Sqrt(Box::new(a)),
                            },
                        })
                    }
                    "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                    _ => match self.vars.iter().position(|v| *v == name) {
                        Some(i) => Ok(Expr::Var(i)),
                        None => {
                            self.pos = start;
                            Err(self.error(format!("unknown identifier '{name}'")))
                        }
                    },
                }
            }
            Some(c) => Err(self.error(format!("unexpected character '{c}'"))),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let n = self.chars.len();
        while self.pos < n && (self.chars[self.pos].is_ascii_digit() || self.chars[self.pos] == '.') {
            self.pos += 1;
        }
        if self.pos < n && (self.chars[self.pos] == 'e' || self.chars[self.pos] == 'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < n && (self.chars[self.pos] == '+' || self.chars[self.pos] == '-') {
                self.pos += 1;
            }
            if self.pos < n && self.chars[self.pos].is_ascii_digit() {
                while self.pos < n && self.chars[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>().map(Expr::Const).map_err(|_| {
            let mut e = self.error(format!("malformed number '{text}'"));
            e.column -= text.chars().count();
            e
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        Expr::parse_indexed(s, "x", 3).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(p("1 + 2 * 3").eval(&[]), 7.0);
        assert_eq!(p("2 ^ 3 ^ 2").eval(&[]), 512.0);
        assert_eq!(p("-2 ^ 2").eval(&[]), -4.0);
        assert_eq!(p("8 / 4 / 2").eval(&[]), 1.0);
        assert_eq!(p("1e-3 * 2E2").eval(&[]), 0.2);
        assert!((p("sin(pi/2) + cos(0) + sqrt(4)").eval(&[]) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn variables_and_derivatives() {
        let e = p("x1^2 * x2 - x3/2 + sin(x1*x3)");
        let x = [0.3, -1.2, 0.7];
        let d0 = e.diff(0).eval(&x);
        let expect = 2.0 * 0.3 * -1.2 + 0.7 * (0.3f64 * 0.7).cos();
        assert!((d0 - expect).abs() < 1e-14);
        let d2 = e.diff(2).eval(&x);
        assert!((d2 - (-0.5 + 0.3 * (0.3f64 * 0.7).cos())).abs() < 1e-14);
        let s = p("sqrt(x1*x1 + x2*x2)");
        assert!((s.diff(1).eval(&x) - (-1.2 / (0.09f64 + 1.44).sqrt())).abs() < 1e-14);
    }

    #[test]
    fn errors_carry_position() {
        let err = Expr::parse_indexed("x1 +\n  foo", "x", 2).unwrap_err();
        assert_eq!((err.line, err.column), (2, 3));
        let err = Expr::parse_indexed("x1 ^ x2", "x", 2).unwrap_err();
        assert!(err.message.contains("constant"));
        assert!(Expr::parse_indexed("(x1", "x", 1).is_err());
        assert!(Expr::parse_indexed("x1 x2", "x", 2).is_err());
    }
}
