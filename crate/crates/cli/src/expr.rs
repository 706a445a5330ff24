//! Separable test fields `f(u, v)` for the convergence study.
//!
//! Grammar: a sum of products, each factor a number, `u`, `v`, `u^k`,
//! `v^k`, or `sin`, `cos`, `exp` of `u` or `v`. `□f = 4 ∂_u ∂_v f` is exact
//! because every product splits into a `u` part and a `v` part.

use anyhow::{bail, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
enum Var {
    U,
    V,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Fun {
    Pow(i32),
    Sin,
    Cos,
    Exp,
}

impl Fun {
    fn eval(self, x: f64) -> f64 {
        match self {
            Fun::Pow(k) => x.powi(k),
            Fun::Sin => x.sin(),
            Fun::Cos => x.cos(),
            Fun::Exp => x.exp(),
        }
    }

    fn deriv(self, x: f64) -> f64 {
        match self {
            Fun::Pow(0) => 0.0,
            Fun::Pow(k) => k as f64 * x.powi(k - 1),
            Fun::Sin => x.cos(),
            Fun::Cos => -x.sin(),
            Fun::Exp => x.exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Term {
    coeff: f64,
    u: Vec<Fun>,
    v: Vec<Fun>,
}

/// Product and its derivative for one variable's factors.
fn product(fs: &[Fun], x: f64) -> (f64, f64) {
    let mut val = 1.0;
    let mut der = 0.0;
    for f in fs {
        let (a, da) = (f.eval(x), f.deriv(x));
        der = der * a + val * da;
        val *= a;
    }
    (val, der)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    terms: Vec<Term>,
}

impl Field {
    pub fn value(&self, u: f64, v: f64) -> f64 {
        self.terms.iter().map(|t| t.coeff * product(&t.u, u).0 * product(&t.v, v).0).sum()
    }

    /// `□f = 4 ∂_u ∂_v f`.
    pub fn box_value(&self, u: f64, v: f64) -> f64 {
        4.0 * self.terms.iter().map(|t| t.coeff * product(&t.u, u).1 * product(&t.v, v).1).sum::<f64>()
    }
}

struct Lexer<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if !self.eat(c) {
            bail!("expected '{}' at position {}", c as char, self.pos);
        }
        Ok(())
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.s[start..self.pos]).into_owned()
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_digit() || matches!(self.s[self.pos], b'.' | b'e' | b'E')) {
            // Allow a sign right after an exponent marker.
            if matches!(self.s[self.pos], b'e' | b'E') && matches!(self.s.get(self.pos + 1), Some(b'-' | b'+')) {
                self.pos += 1;
            }
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.s[start..self.pos])?;
        text.parse().map_err(|_| anyhow::anyhow!("bad number '{text}'"))
    }

    fn var(&mut self) -> Result<Var> {
        match self.ident().as_str() {
            "u" => Ok(Var::U),
            "v" => Ok(Var::V),
            other => bail!("expected u or v, found '{other}'"),
        }
    }
}

pub fn parse(text: &str) -> Result<Field> {
    let mut lx = Lexer { s: text.as_bytes(), pos: 0 };
    let mut terms = Vec::new();
    let mut sign = if lx.eat(b'-') { -1.0 } else { 1.0 };
    loop {
        let mut term = Term { coeff: sign, u: Vec::new(), v: Vec::new() };
        loop {
            factor(&mut lx, &mut term)?;
            if !lx.eat(b'*') {
                break;
            }
        }
        terms.push(term);
        if lx.eat(b'+') {
            sign = 1.0;
        } else if lx.eat(b'-') {
            sign = -1.0;
        } else {
            break;
        }
    }
    if lx.peek().is_some() {
        bail!("unexpected input at position {} of '{text}'", lx.pos);
    }
    Ok(Field { terms })
}

fn factor(lx: &mut Lexer, term: &mut Term) -> Result<()> {
    match lx.peek() {
        Some(c) if c.is_ascii_digit() || c == b'.' => {
            term.coeff *= lx.number()?;
            return Ok(());
        }
        None => bail!("expression ends where a factor was expected"),
        _ => {}
    }
    let name = lx.ident();
    let (fun, var) = match name.as_str() {
        "u" | "v" => {
            let var = if name == "u" { Var::U } else { Var::V };
            let k = if lx.eat(b'^') { lx.number()? } else { 1.0 };
            if k.fract() != 0.0 || k < 0.0 {
                bail!("exponents must be non-negative integers");
            }
            (Fun::Pow(k as i32), var)
        }
        "sin" | "cos" | "exp" => {
            lx.expect(b'(')?;
            let var = lx.var()?;
            lx.expect(b')')?;
            let fun = match name.as_str() {
                "sin" => Fun::Sin,
                "cos" => Fun::Cos,
                _ => Fun::Exp,
            };
            (fun, var)
        }
        "" => bail!("expected a factor at position {}", lx.pos),
        other => bail!("unknown name '{other}'"),
    };
    match var {
        Var::U => term.u.push(fun),
        Var::V => term.v.push(fun),
    }
    Ok(())
}
