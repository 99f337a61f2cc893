//! Expression trees for scalar fields and their parser.
//!
//! The grammar is deliberately small and closed: infix `+ - * / ^`,
//! functions `sin cos exp sqrt`, variables `x1..xN`, decimal literals.
//! Evaluation is deterministic (a fixed tree walk over IEEE doubles), so
//! identical inputs give bit-identical outputs.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::jet::JetArith;
use super::{GeometryError, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Expr {
    Const(f64),
    /// Zero-based variable index (`x1` is index 0).
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Sqrt(Box<Expr>),
}

impl Expr {
    /// Constant-folds a subtree that contains no variables.
    fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            Expr::Var(_) => None,
            Expr::Neg(a) => a.as_const().map(|v| -v),
            Expr::Add(a, b) => Some(a.as_const()? + b.as_const()?),
            Expr::Sub(a, b) => Some(a.as_const()? - b.as_const()?),
            Expr::Mul(a, b) => Some(a.as_const()? * b.as_const()?),
            Expr::Div(a, b) => Some(a.as_const()? / b.as_const()?),
            Expr::Pow(a, b) => Some(a.as_const()?.powf(b.as_const()?)),
            Expr::Sin(a) => a.as_const().map(f64::sin),
            Expr::Cos(a) => a.as_const().map(f64::cos),
            Expr::Exp(a) => a.as_const().map(f64::exp),
            Expr::Sqrt(a) => a.as_const().map(f64::sqrt),
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) | Expr::Sqrt(a) => {
                a.max_var()
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b)
            | Expr::Pow(a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }
}

/// A named scalar field given by a closed-form expression over `x1..xN`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldRepr", into = "FieldRepr")]
pub struct ScalarField {
    pub name: String,
    source: String,
    #[serde(skip)]
    expr: Expr,
}

#[derive(Serialize, Deserialize)]
struct FieldRepr {
    name: String,
    source: String,
}

impl TryFrom<FieldRepr> for ScalarField {
    type Error = ParseError;
    fn try_from(r: FieldRepr) -> std::result::Result<Self, ParseError> {
        ScalarField::parse(&r.name, &r.source)
    }
}

impl From<ScalarField> for FieldRepr {
    fn from(f: ScalarField) -> Self {
        FieldRepr {
            name: f.name,
            source: f.source,
        }
    }
}

impl ScalarField {
    /// Parses `source` into a field named `name`.
    pub fn parse(name: &str, source: &str) -> std::result::Result<Self, ParseError> {
        let expr = Parser::new(source).parse()?;
        Ok(ScalarField {
            name: name.to_string(),
            source: source.to_string(),
            expr,
        })
    }

    /// The original expression text.
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Smallest ambient dimension this field is defined over.
    pub fn min_ambient_dim(&self) -> usize {
        self.expr.max_var().map_or(0, |i| i + 1)
    }

    /// Evaluates the field over any jet arithmetic (plain `f64`, first- or
    /// second-order jets). `vars[i]` seeds variable `x{i+1}`.
    pub fn eval_jet_arith<T: JetArith>(&self, vars: &[T]) -> Result<T> {
        eval(&self.expr, vars, self)
    }

    /// Plain value at ambient coordinates.
    pub fn value(&self, coords: &[f64]) -> Result<f64> {
        self.eval_jet_arith(coords)
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.name, self.source)
    }
}

fn undef<T>(field: &ScalarField, reason: &str) -> Result<T> {
    Err(GeometryError::UndefinedAtPoint {
        field: field.name.clone(),
        location: String::new(),
        reason: reason.to_string(),
    })
}

fn eval<T: JetArith>(e: &Expr, vars: &[T], field: &ScalarField) -> Result<T> {
    Ok(match e {
        Expr::Const(c) => T::constant(*c, vars),
        Expr::Var(i) => {
            if *i >= vars.len() {
                return Err(GeometryError::DimensionMismatch {
                    expected: i + 1,
                    got: vars.len(),
                });
            }
            vars[*i].clone()
        }
        Expr::Neg(a) => eval(a, vars, field)?.neg(),
        Expr::Add(a, b) => eval(a, vars, field)?.add(&eval(b, vars, field)?),
        Expr::Sub(a, b) => eval(a, vars, field)?.sub(&eval(b, vars, field)?),
        Expr::Mul(a, b) => eval(a, vars, field)?.mul(&eval(b, vars, field)?),
        Expr::Div(a, b) => {
            let den = eval(b, vars, field)?;
            if den.value() == 0.0 {
                return undef(field, "division by zero");
            }
            eval(a, vars, field)?.div(&den)
        }
        Expr::Pow(a, b) => {
            let base = eval(a, vars, field)?;
            match b.as_const() {
                Some(c) => {
                    // Constant exponent: direct power rule. Negative or
                    // fractional powers of a non-positive base are rejected.
                    if base.value() == 0.0 && c < 2.0 && c != 1.0 && c != 0.0 {
                        return undef(field, "power not smooth at zero base");
                    }
                    if base.value() < 0.0 && c.fract() != 0.0 {
                        return undef(field, "fractional power of negative base");
                    }
                    base.powc(c)
                }
                None => {
                    // Variable exponent: a^b = exp(b ln a), needs a > 0.
                    if base.value() <= 0.0 {
                        return undef(field, "variable exponent requires positive base");
                    }
                    eval(b, vars, field)?.mul(&base.ln()).exp()
                }
            }
        }
        Expr::Sin(a) => eval(a, vars, field)?.sin(),
        Expr::Cos(a) => eval(a, vars, field)?.cos(),
        Expr::Exp(a) => eval(a, vars, field)?.exp(),
        Expr::Sqrt(a) => {
            let arg = eval(a, vars, field)?;
            if arg.value() < 0.0 {
                return undef(field, "sqrt of negative argument");
            }
            if arg.value() == 0.0 && T::ORDER > 0 {
                return undef(field, "sqrt not smooth at zero");
            }
            arg.sqrt()
        }
    })
}

/// Parse failure with a byte/column position into the source text.
#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("parse error at column {col}: {msg}")]
pub struct ParseError {
    pub col: usize,
    pub msg: String,
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        }
    }

    fn parse(mut self) -> std::result::Result<Expr, ParseError> {
        let e = self.expr_bp(0)?;
        self.skip_ws();
        if self.pos < self.bytes.len() {
            return Err(self.err("unexpected trailing input"));
        }
        Ok(e)
    }

    fn err(&self, msg: &str) -> ParseError {
        ParseError {
            col: self.pos + 1,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    /// Pratt parser; `^` binds tightest and is right-associative.
    fn expr_bp(&mut self, min_bp: u8) -> std::result::Result<Expr, ParseError> {
        let mut lhs = self.atom()?;
        loop {
            let op = match self.peek() {
                Some(c @ (b'+' | b'-' | b'*' | b'/' | b'^')) => c,
                _ => break,
            };
            let (lbp, rbp) = match op {
                b'+' | b'-' => (1, 2),
                b'*' | b'/' => (3, 4),
                b'^' => (6, 5),
                _ => unreachable!(),
            };
            if lbp < min_bp {
                break;
            }
            self.pos += 1;
            let rhs = self.expr_bp(rbp)?;
            lhs = match op {
                b'+' => Expr::Add(lhs.into(), rhs.into()),
                b'-' => Expr::Sub(lhs.into(), rhs.into()),
                b'*' => Expr::Mul(lhs.into(), rhs.into()),
                b'/' => Expr::Div(lhs.into(), rhs.into()),
                b'^' => Expr::Pow(lhs.into(), rhs.into()),
                _ => unreachable!(),
            };
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> std::result::Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.err("unexpected end of expression")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr_bp(0)?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(b'-') => {
                self.pos += 1;
                // Unary minus binds like `*` so that -x^2 = -(x^2).
                Ok(Expr::Neg(self.expr_bp(5)?.into()))
            }
            Some(b'+') => {
                self.pos += 1;
                self.expr_bp(5)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(self.err(&format!("unexpected character `{}`", c as char))),
        }
    }

    fn number(&mut self) -> std::result::Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // Scientific notation.
        if self.bytes.get(self.pos) == Some(&b'e') || self.bytes.get(self.pos) == Some(&b'E') {
            let mut p = self.pos + 1;
            if matches!(self.bytes.get(p), Some(b'+' | b'-')) {
                p += 1;
            }
            if self.bytes.get(p).is_some_and(u8::is_ascii_digit) {
                self.pos = p;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| ParseError {
                col: start + 1,
                msg: format!("invalid number `{text}`"),
            })
    }

    fn ident(&mut self) -> std::result::Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let word = &self.src[start..self.pos];
        if let Some(rest) = word.strip_prefix('x') {
            if let Ok(i) = rest.parse::<usize>() {
                if i == 0 {
                    return Err(ParseError {
                        col: start + 1,
                        msg: "variables are numbered from x1".into(),
                    });
                }
                return Ok(Expr::Var(i - 1));
            }
        }
        let func = match word {
            "sin" => Expr::Sin as fn(Box<Expr>) -> Expr,
            "cos" => Expr::Cos,
            "exp" => Expr::Exp,
            "sqrt" => Expr::Sqrt,
            _ => {
                return Err(ParseError {
                    col: start + 1,
                    msg: format!("unknown identifier `{word}`"),
                })
            }
        };
        if self.peek() != Some(b'(') {
            return Err(self.err(&format!("expected `(` after `{word}`")));
        }
        self.pos += 1;
        let arg = self.expr_bp(0)?;
        if self.peek() != Some(b')') {
            return Err(self.err("expected `)`"));
        }
        self.pos += 1;
        Ok(func(arg.into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn val(src: &str, vars: &[f64]) -> f64 {
        ScalarField::parse("t", src).unwrap().value(vars).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(val("1+2*3", &[]), 7.0);
        assert_eq!(val("2^3^2", &[]), 512.0); // right-assoc
        assert_eq!(val("-2^2", &[]), -4.0);
        assert_eq!(val("(1+2)*3", &[]), 9.0);
        assert_eq!(val("x1 - x2 - x3", &[10.0, 3.0, 2.0]), 5.0);
    }

    #[test]
    fn functions_and_variables() {
        assert!((val("sin(x1)^2 + cos(x1)^2", &[0.7]) - 1.0).abs() < 1e-15);
        assert_eq!(val("sqrt(x1*x1)", &[3.0]), 3.0);
        assert!((val("exp(1)", &[]) - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(val("1.5e2", &[]), 150.0);
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = ScalarField::parse("t", "x1 +").unwrap_err();
        assert_eq!(err.col, 5);
        let err = ScalarField::parse("t", "x1 + foo").unwrap_err();
        assert_eq!(err.col, 6);
        assert!(err.msg.contains("foo"));
        assert!(ScalarField::parse("t", "x0").is_err());
        assert!(ScalarField::parse("t", "(x1").is_err());
    }

    #[test]
    fn undefined_points_are_reported() {
        let f = ScalarField::parse("t", "sqrt(x1)").unwrap();
        assert!(f.value(&[-1.0]).is_err());
        let g = ScalarField::parse("t", "1/x1").unwrap();
        assert!(g.value(&[0.0]).is_err());
    }

    #[test]
    fn negative_base_integer_power_is_fine() {
        // (sqrt(x^2+y^2) - R)^2 must work where the inner term is negative.
        assert_eq!(val("(x1 - 3)^2", &[1.0]), 4.0);
    }

    #[test]
    fn deterministic_evaluation() {
        let f = ScalarField::parse("t", "sin(x1)*exp(x2) - x1/x2 + x2^3").unwrap();
        let a = f.value(&[0.3141, 2.718]).unwrap();
        let b = f.value(&[0.3141, 2.718]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
