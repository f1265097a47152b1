//! Decimal and log2 rendering for report cells.

use binorbit_core::dyadic::{Dyadic, DyadicInterval};
use binorbit_core::estimators::EstimatorValue;
use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Significant digits in a decimal cell.
pub const SIG_DIGITS: u32 = 18;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Down,
    Up,
    Nearest,
}

fn pow10(e: i64) -> BigRational {
    let p = BigInt::from(10u32).pow(e.unsigned_abs() as u32);
    if e >= 0 {
        BigRational::from_integer(p)
    } else {
        BigRational::new(BigInt::one(), p)
    }
}

/// `r` with at most [`SIG_DIGITS`] significant digits, rounded in `dir`.
/// `None` when `|r| >= 1e18` or `0 < |r| < 1e-18`.
pub fn decimal(r: &BigRational, dir: Direction) -> Option<String> {
    if r.is_zero() {
        return Some("0".to_string());
    }
    let a = r.abs();
    let limit = pow10(SIG_DIGITS as i64);
    if a >= limit || a < pow10(-(SIG_DIGITS as i64)) {
        return None;
    }
    // floor(log10 a), starting from a bit-length estimate.
    let bits = a.numer().bits() as i64 - a.denom().bits() as i64;
    let mut e = (bits as f64 * std::f64::consts::LOG10_2).floor() as i64;
    while pow10(e) > a {
        e -= 1;
    }
    while pow10(e + 1) <= a {
        e += 1;
    }
    let shift = SIG_DIGITS as i64 - 1 - e;
    let scaled = r * pow10(shift);
    let n = match dir {
        Direction::Down => scaled.floor(),
        Direction::Up => scaled.ceil(),
        Direction::Nearest => scaled.round(),
    }
    .to_integer();
    Some(place_point(&n, shift))
}

/// `n * 10^-shift` as plain decimal text without trailing zeros.
fn place_point(n: &BigInt, shift: i64) -> String {
    let sign = if n.sign() == Sign::Minus { "-" } else { "" };
    let mut digits = n.abs().to_string();
    if shift <= 0 {
        digits.extend(std::iter::repeat_n('0', (-shift) as usize));
        return format!("{sign}{digits}");
    }
    let shift = shift as usize;
    if digits.len() <= shift {
        digits = "0".repeat(shift - digits.len() + 1) + &digits;
    }
    let (int, frac) = digits.split_at(digits.len() - shift);
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

pub fn dyadic_decimal(d: &Dyadic, dir: Direction) -> Option<String> {
    decimal(&d.to_rational(), dir)
}

/// `log2 |d|` as shortest round-trip `f64` text; empty for zero.
pub fn log2_text(d: &Dyadic) -> String {
    match d.split_log2() {
        Some((e, frac)) => format!("{}", e as f64 + frac.log2()),
        None => String::new(),
    }
}

/// Lower and upper cells of an enclosure, rounded outward.
pub fn interval_cells(iv: &DyadicInterval) -> (String, String) {
    (
        dyadic_decimal(iv.lo(), Direction::Down).unwrap_or_default(),
        dyadic_decimal(iv.hi(), Direction::Up).unwrap_or_default(),
    )
}

/// Exact values round to nearest; enclosures report their upper end rounded up.
pub fn estimator_cell(v: &EstimatorValue) -> String {
    match v {
        EstimatorValue::Exact(r) => decimal(r, Direction::Nearest),
        EstimatorValue::Enclosure(iv) => dyadic_decimal(iv.hi(), Direction::Up),
    }
    .unwrap_or_default()
}

/// Ratio text `a/b`, or `a` for integers.
pub fn ratio_text<T: Clone + Integer + std::fmt::Display>(r: &num_rational::Ratio<T>) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}
