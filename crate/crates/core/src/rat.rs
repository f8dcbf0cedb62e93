//! Exact rational arithmetic helpers used throughout the crate.
//!
//! All probabilities are `num::BigRational` end to end; floating point only
//! appears where eigenvalues or square roots force it.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

pub type Rat = BigRational;

/// `a / b` as an exact rational. Panics if `b == 0`.
pub fn rat(a: i64, b: i64) -> Rat {
    Rat::new(BigInt::from(a), BigInt::from(b))
}

pub fn rat_int(a: i64) -> Rat {
    Rat::from_integer(BigInt::from(a))
}

pub fn rat_zero() -> Rat {
    Rat::zero()
}

pub fn rat_one() -> Rat {
    Rat::one()
}

/// Parses a canonical nonnegative rational string: either `"a"` or `"a/b"`.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = num
        .parse()
        .map_err(|_| format!("invalid rational numerator in {s:?}"))?;
    let d: BigInt = den
        .parse()
        .map_err(|_| format!("invalid rational denominator in {s:?}"))?;
    if d.is_zero() {
        return Err(format!("zero denominator in {s:?}"));
    }
    if n.is_negative() || d.is_negative() {
        return Err(format!("negative rational {s:?}"));
    }
    Ok(Rat::new(n, d))
}

/// Canonical `a/b` rendering (integers render without the denominator).
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Round-to-nearest conversion; the single sanctioned exit from exact land.
pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

/// `log2` of a positive rational, computed through f64.
pub fn log2_rat(r: &Rat) -> f64 {
    assert!(r.is_positive(), "log2 of a non-positive rational");
    // Split into numerator/denominator so huge exact values stay in range.
    let n = r.numer().to_f64().unwrap_or(f64::MAX);
    let d = r.denom().to_f64().unwrap_or(f64::MAX);
    n.log2() - d.log2()
}

/// If `r = 2^j` for an integer `j >= 0`, returns `j`.
pub fn exact_log2(r: &Rat) -> Option<u32> {
    if !r.denom().is_one() {
        return None;
    }
    let n = r.numer();
    if n.is_negative() || n.is_zero() {
        return None;
    }
    let bits = n.bits();
    let pow = BigInt::from(1) << (bits - 1);
    if *n == pow {
        Some((bits - 1) as u32)
    } else {
        None
    }
}
