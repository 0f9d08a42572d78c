//! Small smooth-expression grammar over x1..xd: +, -, *, /, ^ with integer
//! powers, abs, max, sqrt, and rational literals. Evaluation comes in an
//! exact rational flavor (succeeds only when every intermediate stays in Q)
//! and a float flavor; gradients are computed by forward-mode dual numbers
//! with a central-difference fallback at kinks.

use crate::error::{NlqualError, Result};
use crate::rational::{parse_rat, rat_pow_int, rat_to_f64, Rat};
use num_traits::{Signed, Zero};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Rat),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Neg(Box<Expr>),
    Abs(Box<Expr>),
    Sqrt(Box<Expr>),
    Max(Vec<Expr>),
}

impl Expr {
    /// Parses an expression; `dim` bounds the variable indices x1..xd.
    pub fn parse(src: &str, dim: usize) -> Result<Expr> {
        let mut p = Parser {
            tokens: lex(src)?,
            pos: 0,
            dim,
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(NlqualError::Parse(format!(
                "trailing input in expression `{src}`"
            )));
        }
        Ok(e)
    }

    pub fn negated(self) -> Expr {
        Expr::Neg(Box::new(self))
    }

    pub fn eval_f64(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Const(c) => rat_to_f64(c),
            Expr::Var(i) => x[*i],
            Expr::Add(a, b) => a.eval_f64(x)? + b.eval_f64(x)?,
            Expr::Sub(a, b) => a.eval_f64(x)? - b.eval_f64(x)?,
            Expr::Mul(a, b) => a.eval_f64(x)? * b.eval_f64(x)?,
            Expr::Div(a, b) => {
                let d = b.eval_f64(x)?;
                if d == 0.0 {
                    return Err(NlqualError::Eval("division by zero".into()));
                }
                a.eval_f64(x)? / d
            }
            Expr::Pow(a, e) => a.eval_f64(x)?.powi(*e),
            Expr::Neg(a) => -a.eval_f64(x)?,
            Expr::Abs(a) => a.eval_f64(x)?.abs(),
            Expr::Sqrt(a) => {
                let v = a.eval_f64(x)?;
                if v < 0.0 {
                    return Err(NlqualError::Eval("sqrt of negative value".into()));
                }
                v.sqrt()
            }
            Expr::Max(es) => {
                let mut m = f64::NEG_INFINITY;
                for e in es {
                    m = m.max(e.eval_f64(x)?);
                }
                m
            }
        })
    }

    /// Exact evaluation; `None` when a value leaves the rationals
    /// (irrational sqrt) or divides by zero.
    pub fn eval_rat(&self, x: &[Rat]) -> Option<Rat> {
        match self {
            Expr::Const(c) => Some(c.clone()),
            Expr::Var(i) => Some(x[*i].clone()),
            Expr::Add(a, b) => Some(a.eval_rat(x)? + b.eval_rat(x)?),
            Expr::Sub(a, b) => Some(a.eval_rat(x)? - b.eval_rat(x)?),
            Expr::Mul(a, b) => Some(a.eval_rat(x)? * b.eval_rat(x)?),
            Expr::Div(a, b) => {
                let d = b.eval_rat(x)?;
                if d.is_zero() {
                    return None;
                }
                Some(a.eval_rat(x)? / d)
            }
            Expr::Pow(a, e) => {
                let v = a.eval_rat(x)?;
                if v.is_zero() && *e < 0 {
                    return None;
                }
                Some(rat_pow_int(&v, *e))
            }
            Expr::Neg(a) => Some(-a.eval_rat(x)?),
            Expr::Abs(a) => Some(a.eval_rat(x)?.abs()),
            Expr::Sqrt(a) => {
                let v = a.eval_rat(x)?;
                if v.is_negative() {
                    return None;
                }
                crate::rational::rat_nth_root_exact(&v, 2)
            }
            Expr::Max(es) => {
                let mut m: Option<Rat> = None;
                for e in es {
                    let v = e.eval_rat(x)?;
                    m = Some(match m {
                        None => v,
                        Some(cur) => {
                            if v > cur {
                                v
                            } else {
                                cur
                            }
                        }
                    });
                }
                m
            }
        }
    }

    /// Gradient at a float point: forward dual numbers, central differences
    /// (step 1e-6) for any coordinate whose dual pass hits a kink.
    pub fn grad_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        for (k, gk) in g.iter_mut().enumerate() {
            match self.dual_f64(x, k) {
                Ok((_, d)) => *gk = d,
                Err(_) => {
                    let h = 1e-6;
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[k] += h;
                    xm[k] -= h;
                    *gk = (self.eval_f64(&xp)? - self.eval_f64(&xm)?) / (2.0 * h);
                }
            }
        }
        Ok(g)
    }

    /// Exact gradient at a rational point; `None` if any value or derivative
    /// leaves the rationals or the expression is kinked there.
    pub fn grad_rat(&self, x: &[Rat]) -> Option<Vec<Rat>> {
        (0..x.len())
            .map(|k| self.dual_rat(x, k).map(|(_, d)| d))
            .collect()
    }

    fn dual_f64(&self, x: &[f64], k: usize) -> Result<(f64, f64)> {
        let kink = |what: &str| NlqualError::Eval(format!("nonsmooth point in {what}"));
        Ok(match self {
            Expr::Const(c) => (rat_to_f64(c), 0.0),
            Expr::Var(i) => (x[*i], if *i == k { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => {
                let (av, ad) = a.dual_f64(x, k)?;
                let (bv, bd) = b.dual_f64(x, k)?;
                (av + bv, ad + bd)
            }
            Expr::Sub(a, b) => {
                let (av, ad) = a.dual_f64(x, k)?;
                let (bv, bd) = b.dual_f64(x, k)?;
                (av - bv, ad - bd)
            }
            Expr::Mul(a, b) => {
                let (av, ad) = a.dual_f64(x, k)?;
                let (bv, bd) = b.dual_f64(x, k)?;
                (av * bv, ad * bv + av * bd)
            }
            Expr::Div(a, b) => {
                let (av, ad) = a.dual_f64(x, k)?;
                let (bv, bd) = b.dual_f64(x, k)?;
                if bv == 0.0 {
                    return Err(NlqualError::Eval("division by zero".into()));
                }
                (av / bv, (ad * bv - av * bd) / (bv * bv))
            }
            Expr::Pow(a, e) => {
                let (av, ad) = a.dual_f64(x, k)?;
                (av.powi(*e), (*e as f64) * av.powi(*e - 1) * ad)
            }
            Expr::Neg(a) => {
                let (av, ad) = a.dual_f64(x, k)?;
                (-av, -ad)
            }
            Expr::Abs(a) => {
                let (av, ad) = a.dual_f64(x, k)?;
                if av == 0.0 && ad != 0.0 {
                    return Err(kink("abs"));
                }
                (av.abs(), av.signum() * ad)
            }
            Expr::Sqrt(a) => {
                let (av, ad) = a.dual_f64(x, k)?;
                if av < 0.0 {
                    return Err(NlqualError::Eval("sqrt of negative value".into()));
                }
                if av == 0.0 && ad != 0.0 {
                    return Err(kink("sqrt"));
                }
                let s = av.sqrt();
                (s, if ad == 0.0 { 0.0 } else { ad / (2.0 * s) })
            }
            Expr::Max(es) => {
                let mut best: Option<(f64, f64)> = None;
                let mut tie = false;
                for e in es {
                    let (v, d) = e.dual_f64(x, k)?;
                    best = Some(match best {
                        None => (v, d),
                        Some((bv, bd)) => {
                            if v > bv {
                                tie = false;
                                (v, d)
                            } else {
                                if v == bv && d != bd {
                                    tie = true;
                                }
                                (bv, bd)
                            }
                        }
                    });
                }
                if tie {
                    return Err(kink("max"));
                }
                best.ok_or_else(|| NlqualError::Parse("empty max".into()))?
            }
        })
    }

    fn dual_rat(&self, x: &[Rat], k: usize) -> Option<(Rat, Rat)> {
        match self {
            Expr::Const(c) => Some((c.clone(), Rat::zero())),
            Expr::Var(i) => Some((
                x[*i].clone(),
                if *i == k {
                    crate::rational::rat_int(1)
                } else {
                    Rat::zero()
                },
            )),
            Expr::Add(a, b) => {
                let (av, ad) = a.dual_rat(x, k)?;
                let (bv, bd) = b.dual_rat(x, k)?;
                Some((av + bv, ad + bd))
            }
            Expr::Sub(a, b) => {
                let (av, ad) = a.dual_rat(x, k)?;
                let (bv, bd) = b.dual_rat(x, k)?;
                Some((av - bv, ad - bd))
            }
            Expr::Mul(a, b) => {
                let (av, ad) = a.dual_rat(x, k)?;
                let (bv, bd) = b.dual_rat(x, k)?;
                Some((av.clone() * bv.clone(), ad * bv + av * bd))
            }
            Expr::Div(a, b) => {
                let (av, ad) = a.dual_rat(x, k)?;
                let (bv, bd) = b.dual_rat(x, k)?;
                if bv.is_zero() {
                    return None;
                }
                let q = av.clone() / bv.clone();
                Some((q, (ad * bv.clone() - av * bd) / (bv.clone() * bv)))
            }
            Expr::Pow(a, e) => {
                let (av, ad) = a.dual_rat(x, k)?;
                if av.is_zero() && *e < 2 {
                    if *e < 0 {
                        return None;
                    }
                    // 0^0 = 1, 0^1 = 0 with derivative e*0^(e-1)*ad
                    return Some(if *e == 0 {
                        (crate::rational::rat_int(1), Rat::zero())
                    } else {
                        (Rat::zero(), ad)
                    });
                }
                let v = rat_pow_int(&av, *e);
                let d = crate::rational::rat_int(*e as i64) * rat_pow_int(&av, *e - 1) * ad;
                Some((v, d))
            }
            Expr::Neg(a) => {
                let (av, ad) = a.dual_rat(x, k)?;
                Some((-av, -ad))
            }
            Expr::Abs(a) => {
                let (av, ad) = a.dual_rat(x, k)?;
                if av.is_zero() {
                    if ad.is_zero() {
                        return Some((Rat::zero(), Rat::zero()));
                    }
                    return None;
                }
                let s = if av.is_negative() {
                    crate::rational::rat_int(-1)
                } else {
                    crate::rational::rat_int(1)
                };
                Some((av.abs(), s * ad))
            }
            Expr::Sqrt(a) => {
                let (av, ad) = a.dual_rat(x, k)?;
                if av.is_negative() {
                    return None;
                }
                let s = crate::rational::rat_nth_root_exact(&av, 2)?;
                if s.is_zero() {
                    if ad.is_zero() {
                        return Some((Rat::zero(), Rat::zero()));
                    }
                    return None;
                }
                Some((s.clone(), ad / (crate::rational::rat_int(2) * s)))
            }
            Expr::Max(es) => {
                let mut best: Option<(Rat, Rat)> = None;
                for e in es {
                    let (v, d) = e.dual_rat(x, k)?;
                    best = Some(match best {
                        None => (v, d),
                        Some((bv, bd)) => {
                            if v > bv {
                                (v, d)
                            } else if v == bv && d != bd {
                                return None;
                            } else {
                                (bv, bd)
                            }
                        }
                    });
                }
                best
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rat),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' | '\u{2212}' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().collect();
                out.push(Tok::Num(parse_rat(&digits)?));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            _ => {
                return Err(NlqualError::Parse(format!(
                    "unexpected character `{c}` in expression"
                )))
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.bump() {
            Some(got) if got == t => Ok(()),
            other => Err(NlqualError::Parse(format!(
                "expected {t:?}, found {other:?}"
            ))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let neg = if matches!(self.peek(), Some(Tok::Minus)) {
                self.bump();
                true
            } else {
                false
            };
            match self.bump() {
                Some(Tok::Num(n)) if n.denom() == &num_bigint::BigInt::from(1) => {
                    let e: i32 = n
                        .numer()
                        .to_string()
                        .parse()
                        .map_err(|_| NlqualError::Parse("exponent too large".into()))?;
                    return Ok(Expr::Pow(Box::new(base), if neg { -e } else { e }));
                }
                other => {
                    return Err(NlqualError::Parse(format!(
                        "expected integer exponent, found {other:?}"
                    )))
                }
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.bump() {
            Some(Tok::Num(n)) => Ok(Expr::Const(n)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if let Some(rest) = name.strip_prefix('x') {
                    if let Ok(idx) = rest.parse::<usize>() {
                        if idx == 0 || idx > self.dim {
                            return Err(NlqualError::DimMismatch(format!(
                                "variable x{idx} outside 1..{}",
                                self.dim
                            )));
                        }
                        return Ok(Expr::Var(idx - 1));
                    }
                }
                match name.as_str() {
                    "abs" => {
                        self.expect(Tok::LParen)?;
                        let e = self.expr()?;
                        self.expect(Tok::RParen)?;
                        Ok(Expr::Abs(Box::new(e)))
                    }
                    "sqrt" => {
                        self.expect(Tok::LParen)?;
                        let e = self.expr()?;
                        self.expect(Tok::RParen)?;
                        Ok(Expr::Sqrt(Box::new(e)))
                    }
                    "max" => {
                        self.expect(Tok::LParen)?;
                        let mut args = vec![self.expr()?];
                        while matches!(self.peek(), Some(Tok::Comma)) {
                            self.bump();
                            args.push(self.expr()?);
                        }
                        self.expect(Tok::RParen)?;
                        Ok(Expr::Max(args))
                    }
                    // `t` is accepted as an alias for x1 in 1-D outer-function expressions
                    "t" if self.dim == 1 => Ok(Expr::Var(0)),
                    _ => Err(NlqualError::Parse(format!("unknown identifier `{name}`"))),
                }
            }
            other => Err(NlqualError::Parse(format!(
                "unexpected token {other:?} in expression"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, rat_int};

    #[test]
    fn parse_eval_basic() {
        let e = Expr::parse("x1 + x2 - x3^2 - 1", 3).unwrap();
        assert_eq!(e.eval_f64(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        let exact = e
            .eval_rat(&[rat_int(1), rat_int(0), rat(1, 2)])
            .unwrap();
        assert_eq!(exact, rat(-1, 4));
    }

    #[test]
    fn gradient_matches_hand_computation() {
        let e = Expr::parse("x1 + x2 - x3^2 - 1", 3).unwrap();
        let g = e.grad_rat(&[rat_int(1), rat_int(0), rat(1, 3)]).unwrap();
        assert_eq!(g, vec![rat_int(1), rat_int(1), rat(-2, 3)]);
        let gf = e.grad_f64(&[1.0, 0.0, 0.5]).unwrap();
        assert!((gf[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn kinks_fall_back_to_central_differences() {
        let e = Expr::parse("abs(x1)", 1).unwrap();
        // abs has no exact rational gradient at 0, float path uses central
        // differences and returns 0 there
        assert!(e.grad_rat(&[rat_int(0)]).is_none());
        let g = e.grad_f64(&[0.0]).unwrap();
        assert!(g[0].abs() < 1e-9);
    }

    #[test]
    fn sqrt_and_max() {
        let e = Expr::parse("sqrt(x1) + max(x1, 2*x2, 1/2)", 2).unwrap();
        let v = e.eval_rat(&[rat(1, 4), rat_int(3)]).unwrap();
        assert_eq!(v, rat(13, 2));
        assert!(Expr::parse("x1 ^ x2", 2).is_err());
        assert!(Expr::parse("x5", 2).is_err());
    }
}
