//! Tiny parser for linear coefficient expressions of the form
//! `c0 + c1*x1 + c2*x2` (any subset of terms, signs allowed).

use crate::error::{Error, Result};

/// Linear form `c0 + cx * x1 + cy * x2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearForm {
    pub c0: f64,
    pub cx: f64,
    pub cy: f64,
}

impl LinearForm {
    pub fn constant(c: f64) -> Self {
        LinearForm { c0: c, cx: 0.0, cy: 0.0 }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.c0 + self.cx * x + self.cy * y
    }
}

/// Parse expressions like `"10"`, `"1 + 0.5*x1"`, `"x2 - 2*x1 + 3"`.
pub fn parse_linear_form(input: &str, field: &str) -> Result<LinearForm> {
    let compact: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(Error::Config {
            field: field.into(),
            message: "empty expression".into(),
        });
    }
    let mut form = LinearForm::constant(0.0);
    let mut term = String::new();
    let mut terms: Vec<String> = Vec::new();
    for (i, c) in compact.chars().enumerate() {
        if (c == '+' || c == '-') && i > 0 && !matches!(compact.as_bytes()[i - 1], b'e' | b'E') {
            terms.push(std::mem::take(&mut term));
            term.push(c);
        } else {
            term.push(c);
        }
    }
    terms.push(term);

    for t in terms.iter().filter(|t| !t.is_empty() && *t != "+") {
        let (sign, body) = match t.strip_prefix('-') {
            Some(rest) => (-1.0, rest),
            None => (1.0, t.strip_prefix('+').unwrap_or(t)),
        };
        let bad = |msg: &str| Error::Config {
            field: field.into(),
            message: format!("cannot parse term `{t}` in `{input}`: {msg}"),
        };
        let (coef_str, var) = if let Some(rest) = body.strip_suffix("*x1") {
            (rest, Some('x'))
        } else if let Some(rest) = body.strip_suffix("*x2") {
            (rest, Some('y'))
        } else if body == "x1" {
            ("1", Some('x'))
        } else if body == "x2" {
            ("1", Some('y'))
        } else {
            (body, None)
        };
        let coef: f64 = coef_str
            .parse()
            .map_err(|_| bad("expected a number, optionally times x1 or x2"))?;
        match var {
            Some('x') => form.cx += sign * coef,
            Some('y') => form.cy += sign * coef,
            _ => form.c0 += sign * coef,
        }
    }
    Ok(form)
}
