//! Exact rational scalars and the few numeric helpers the certificate
//! paths need (parsing, exact roots, float bridging).

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rat = BigRational;

use crate::error::NlqualError;

/// Parses "p/q" or "p" (optionally signed) into an exact rational.
pub fn parse_rat(s: &str) -> Result<Rat, NlqualError> {
    let s = s.trim();
    let bad = || NlqualError::Parse(format!("invalid rational `{s}`"));
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| bad())?;
        let d: BigInt = den.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        Ok(Rat::new(n, d))
    } else {
        let n: BigInt = s.parse().map_err(|_| bad())?;
        Ok(Rat::from_integer(n))
    }
}

pub fn rat_to_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Falls back to a quotient of float conversions for out-of-range bigints.
        let n = r.numer().to_f64().unwrap_or(f64::MAX);
        let d = r.denom().to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

/// Exact rational from a finite float (dyadic expansion).
pub fn rat_from_f64(x: f64) -> Rat {
    Rat::from_float(x).expect("finite float")
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

fn bigint_nth_root_exact(x: &BigInt, n: u32) -> Option<BigInt> {
    if n == 0 {
        return None;
    }
    if x.is_zero() || x.is_one() {
        return Some(x.clone());
    }
    if x.sign() == Sign::Minus {
        if n % 2 == 0 {
            return None;
        }
        return bigint_nth_root_exact(&(-x), n).map(|r| -r);
    }
    let r = x.nth_root(n);
    if r.pow(n) == *x {
        Some(r)
    } else {
        None
    }
}

/// Exact n-th root of a rational, when one exists in the rationals.
pub fn rat_nth_root_exact(r: &Rat, n: u32) -> Option<Rat> {
    let num = bigint_nth_root_exact(r.numer(), n)?;
    let den = bigint_nth_root_exact(r.denom(), n)?;
    Some(Rat::new(num, den))
}

/// base^(p) for rational p = a/b, exact when representable in the rationals.
/// Negative bases are rejected unless the exponent is an integer.
pub fn rat_pow_exact(base: &Rat, exp: &Rat) -> Option<Rat> {
    if exp.denom().is_one() {
        let e = exp.numer().to_i32()?;
        if base.is_zero() && e <= 0 {
            return None;
        }
        return Some(rat_pow_int(base, e));
    }
    if base.is_negative() {
        return None;
    }
    let b = exp.denom().to_u32()?;
    let root = rat_nth_root_exact(base, b)?;
    let a = exp.numer().to_i32()?;
    if root.is_zero() && a <= 0 {
        return None;
    }
    Some(rat_pow_int(&root, a))
}

pub fn rat_pow_int(base: &Rat, e: i32) -> Rat {
    if e >= 0 {
        base.pow(e)
    } else {
        Rat::one() / base.pow(-e)
    }
}
