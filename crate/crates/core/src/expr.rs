//! Expression trees for ODE right-hand sides: parsing, printing, point and
//! interval evaluation, symbolic differentiation.
//!
//! The grammar covers variables `x1..xn`, decimal constants, `+ - * /`,
//! unary minus, integer powers with `^`, `sqrt(...)` and parentheses.
//! Precedence is `^` above unary minus above `* /` above `+ -`; binary
//! operators associate left, `^` binds to the primary on its left.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::zonotope::IntervalBox;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based variable index (`x1` is `Var(0)`).
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i32),
    Sqrt(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let d = b.eval(x)?;
                if d == 0.0 {
                    return Err(Error::Domain("division by zero".into()));
                }
                a.eval(x)? / d
            }
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Pow(a, k) => a.eval(x)?.powi(*k),
            Expr::Sqrt(a) => {
                let v = a.eval(x)?;
                if v < 0.0 {
                    return Err(Error::Domain(format!("sqrt of negative value {v}")));
                }
                v.sqrt()
            }
        })
    }

    /// Natural interval extension over a box.
    pub fn interval_eval(&self, b: &IntervalBox) -> Result<Interval> {
        Ok(match self {
            Expr::Const(c) => Interval::point(*c),
            Expr::Var(i) => Interval::new(b.lower[*i], b.upper[*i]),
            Expr::Add(u, v) => u.interval_eval(b)?.add(v.interval_eval(b)?),
            Expr::Sub(u, v) => u.interval_eval(b)?.sub(v.interval_eval(b)?),
            Expr::Mul(u, v) => u.interval_eval(b)?.mul(v.interval_eval(b)?),
            Expr::Div(u, v) => u.interval_eval(b)?.div(v.interval_eval(b)?)?,
            Expr::Neg(u) => u.interval_eval(b)?.neg(),
            Expr::Pow(u, k) => u.interval_eval(b)?.powi(*k)?,
            Expr::Sqrt(u) => u.interval_eval(b)?.sqrt()?,
        })
    }

    /// Symbolic partial derivative with respect to variable `i`, with light
    /// constant folding to keep second derivatives small.
    pub fn differentiate(&self, i: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(j) => Expr::Const(if *j == i { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => add(a.differentiate(i), b.differentiate(i)),
            Expr::Sub(a, b) => sub(a.differentiate(i), b.differentiate(i)),
            Expr::Mul(a, b) => add(
                mul(a.differentiate(i), (**b).clone()),
                mul((**a).clone(), b.differentiate(i)),
            ),
            Expr::Div(a, b) => {
                // (a' b - a b') / b^2
                let num = sub(
                    mul(a.differentiate(i), (**b).clone()),
                    mul((**a).clone(), b.differentiate(i)),
                );
                div(num, pow((**b).clone(), 2))
            }
            Expr::Neg(a) => neg(a.differentiate(i)),
            Expr::Pow(a, k) => mul(
                Expr::Const(*k as f64),
                mul(pow((**a).clone(), k - 1), a.differentiate(i)),
            ),
            Expr::Sqrt(a) => div(
                a.differentiate(i),
                mul(Expr::Const(2.0), Expr::Sqrt(a.clone())),
            ),
        }
    }

    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
            Expr::Neg(a) | Expr::Sqrt(a) => a.max_var(),
            Expr::Pow(a, _) => a.max_var(),
        }
    }
}

// smart constructors with constant folding

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == 1.0)
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        _ if is_zero(&a) => b,
        _ if is_zero(&b) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        _ if is_zero(&b) => a,
        _ if is_zero(&a) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        _ if is_zero(&a) || is_zero(&b) => Expr::Const(0.0),
        _ if is_one(&a) => b,
        _ if is_one(&b) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        return Expr::Const(0.0);
    }
    if is_one(&b) {
        return a;
    }
    Expr::Div(Box::new(a), Box::new(b))
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        _ => Expr::Neg(Box::new(a)),
    }
}

fn pow(a: Expr, k: i32) -> Expr {
    match k {
        0 => Expr::Const(1.0),
        1 => a,
        _ => Expr::Pow(Box::new(a), k),
    }
}

/// Parse an expression over variables `x1..x<n>`.
pub fn parse_expr(text: &str, n: usize) -> Result<Expr> {
    let mut p = Parser { bytes: text.as_bytes(), pos: 0, nvars: n };
    p.skip_ws();
    let e = p.parse_sum()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    nvars: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_sum(&mut self) -> Result<Expr> {
        let mut e = self.parse_term()?;
        loop {
            self.skip_ws();
            if self.eat(b'+') {
                e = Expr::Add(Box::new(e), Box::new(self.parse_term()?));
            } else if self.eat(b'-') {
                e = Expr::Sub(Box::new(e), Box::new(self.parse_term()?));
            } else {
                return Ok(e);
            }
        }
    }

    fn parse_term(&mut self) -> Result<Expr> {
        let mut e = self.parse_unary()?;
        loop {
            self.skip_ws();
            if self.eat(b'*') {
                e = Expr::Mul(Box::new(e), Box::new(self.parse_unary()?));
            } else if self.eat(b'/') {
                e = Expr::Div(Box::new(e), Box::new(self.parse_unary()?));
            } else {
                return Ok(e);
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Expr> {
        self.skip_ws();
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.parse_unary()?)))
        } else {
            self.parse_power()
        }
    }

    fn parse_power(&mut self) -> Result<Expr> {
        let base = self.parse_primary()?;
        self.skip_ws();
        if self.eat(b'^') {
            self.skip_ws();
            let negative = self.eat(b'-');
            let start = self.pos;
            while self.peek().map_or(false, |c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == start {
                return Err(self.error("expected integer exponent after ^"));
            }
            let digits = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
            let mut k: i32 = digits
                .parse()
                .map_err(|_| self.error("exponent out of range"))?;
            if negative {
                k = -k;
            }
            Ok(Expr::Pow(Box::new(base), k))
        } else {
            Ok(base)
        }
    }

    fn parse_primary(&mut self) -> Result<Expr> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.parse_sum()?;
                self.skip_ws();
                if !self.eat(b')') {
                    return Err(self.error("expected closing parenthesis"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.parse_ident(),
            _ => Err(self.error("expected a number, variable or parenthesis")),
        }
    }

    fn parse_number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self
            .peek()
            .map_or(false, |c| c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E')
        {
            // allow an exponent sign directly after e/E
            if (self.bytes[self.pos] == b'e' || self.bytes[self.pos] == b'E')
                && matches!(self.bytes.get(self.pos + 1), Some(b'+') | Some(b'-'))
            {
                self.pos += 2;
            } else {
                self.pos += 1;
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        let v: f64 = text.parse().map_err(|_| Error::Parse {
            pos: start,
            msg: format!("malformed number `{text}`"),
        })?;
        Ok(Expr::Const(v))
    }

    fn parse_ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self
            .peek()
            .map_or(false, |c| c.is_ascii_alphanumeric() || c == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        if name == "sqrt" {
            self.skip_ws();
            if !self.eat(b'(') {
                return Err(self.error("expected ( after sqrt"));
            }
            let e = self.parse_sum()?;
            self.skip_ws();
            if !self.eat(b')') {
                return Err(self.error("expected closing parenthesis after sqrt argument"));
            }
            return Ok(Expr::Sqrt(Box::new(e)));
        }
        if let Some(rest) = name.strip_prefix('x') {
            if let Ok(idx) = rest.parse::<usize>() {
                if idx >= 1 && idx <= self.nvars {
                    return Ok(Expr::Var(idx - 1));
                }
                return Err(Error::Parse {
                    pos: start,
                    msg: format!("variable {name} out of range (n = {})", self.nvars),
                });
            }
        }
        Err(Error::Parse { pos: start, msg: format!("unknown identifier `{name}`") })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, f, 0)
    }
}

/// Precedence levels: 0 sum, 1 product, 2 unary, 3 power/primary.
fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
    let prec = match e {
        Expr::Add(..) | Expr::Sub(..) => 0,
        Expr::Mul(..) | Expr::Div(..) => 1,
        Expr::Neg(..) => 2,
        _ => 3,
    };
    let need_parens = prec < parent;
    if need_parens {
        write!(f, "(")?;
    }
    match e {
        Expr::Const(c) => {
            if *c == c.trunc() && c.abs() < 1e15 {
                write!(f, "{c:.1}")?;
            } else {
                write!(f, "{c}")?;
            }
        }
        Expr::Var(i) => write!(f, "x{}", i + 1)?,
        Expr::Add(a, b) => {
            write_expr(a, f, 0)?;
            write!(f, " + ")?;
            write_expr(b, f, 1)?;
        }
        Expr::Sub(a, b) => {
            write_expr(a, f, 0)?;
            write!(f, " - ")?;
            write_expr(b, f, 1)?;
        }
        Expr::Mul(a, b) => {
            write_expr(a, f, 1)?;
            write!(f, "*")?;
            write_expr(b, f, 2)?;
        }
        Expr::Div(a, b) => {
            write_expr(a, f, 1)?;
            write!(f, "/")?;
            write_expr(b, f, 2)?;
        }
        Expr::Neg(a) => {
            write!(f, "-")?;
            write_expr(a, f, 2)?;
        }
        Expr::Pow(a, k) => {
            write_expr(a, f, 3)?;
            if *k < 0 {
                write!(f, "^-{}", -k)?;
            } else {
                write!(f, "^{k}")?;
            }
        }
        Expr::Sqrt(a) => {
            write!(f, "sqrt(")?;
            write_expr(a, f, 0)?;
            write!(f, ")")?;
        }
    }
    if need_parens {
        write!(f, ")")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_basics() {
        let e = parse_expr("x2", 2).unwrap();
        assert_eq!(e, Expr::Var(1));
        let e = parse_expr("-x1 + x2^2", 2).unwrap();
        assert!((e.eval(&[1.0, 2.0]).unwrap() - 3.0).abs() < 1e-12);
        assert!(matches!(
            parse_expr("x3", 2),
            Err(Error::Parse { .. })
        ));
        assert!(parse_expr("x1 +", 1).is_err());
        assert!(parse_expr("y", 1).is_err());
    }

    #[test]
    fn precedence_and_unary() {
        let e = parse_expr("-x1^2", 1).unwrap();
        // unary minus binds below the power
        assert!((e.eval(&[3.0]).unwrap() + 9.0).abs() < 1e-12);
        let e = parse_expr("2*x1 + 3*x1^2 - 1/2", 1).unwrap();
        assert!((e.eval(&[2.0]).unwrap() - (4.0 + 12.0 - 0.5)).abs() < 1e-12);
        let e = parse_expr("(1 - x1^2)*x1", 1).unwrap();
        assert!((e.eval(&[2.0]).unwrap() + 6.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_and_division() {
        let e = parse_expr("sqrt(2.0*9.81*x1)", 1).unwrap();
        assert!((e.eval(&[2.0]).unwrap() - (2.0 * 9.81 * 2.0f64).sqrt()).abs() < 1e-12);
        assert!(e.eval(&[-1.0]).is_err());
        let e = parse_expr("1/x1", 1).unwrap();
        assert!(e.eval(&[0.0]).is_err());
    }

    #[test]
    fn derivative_finite_difference() {
        let e = parse_expr("x1^2", 1).unwrap();
        let d = e.differentiate(0);
        assert!((d.eval(&[3.0]).unwrap() - 6.0).abs() < 1e-9);
        // central difference oracle on a richer expression
        let e = parse_expr("x1*x2 + sqrt(x1) - x2/x1 + x1^3", 2).unwrap();
        let dx = e.differentiate(0);
        let h = 1e-5;
        let x = [1.7, -0.8];
        let fd = (e.eval(&[x[0] + h, x[1]]).unwrap() - e.eval(&[x[0] - h, x[1]]).unwrap())
            / (2.0 * h);
        assert!((dx.eval(&x).unwrap() - fd).abs() < 1e-6 * (1.0 + fd.abs()));
    }

    #[test]
    fn interval_extension_is_sound() {
        let e = parse_expr("x1^2", 1).unwrap();
        let b = IntervalBox::new(vec![-1.0], vec![2.0]).unwrap();
        let iv = e.interval_eval(&b).unwrap();
        // natural extension must contain [0, 4]; wider results are fine
        assert!(iv.lo <= 0.0 && iv.hi >= 4.0);
        for i in 0..=20 {
            let x = -1.0 + 3.0 * i as f64 / 20.0;
            assert!(iv.contains(e.eval(&[x]).unwrap()));
        }
    }

    #[test]
    fn print_parse_fixpoint() {
        for src in [
            "x2",
            "(1.0 - x1^2)*x2 - x1",
            "-x2 - x3",
            "0.2 + x3*(x1 - 5.7)",
            "x1*(1.0 - x1 - 0.85*x2 - 0.5*x4)",
            "0.01*(4.0 - x6) - 0.015*sqrt(19.62*x1)",
            "3.0*x3 - x1*x6",
            "1/x1 - x1^-2",
        ] {
            let t = parse_expr(src, 6).unwrap();
            let printed = t.to_string();
            let back = parse_expr(&printed, 6).unwrap();
            assert_eq!(back, t, "print/parse fixpoint broken for `{src}` -> `{printed}`");
        }
    }
}
