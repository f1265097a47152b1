//! Enclosures of orbit terms `1/f^{k-1}(x)^p` and their prefix sums.
//!
//! `f^{k-1}(x)` has digits `d_k d_{k+1} ...`. If the tail starts with `z`
//! zeros and the next `w` digits read as the integer `M` (leading digit 1),
//! then `f^{k-1}(x)` lies in `[M, M+1] * 2^-(z+w)`. Powers with a rational
//! exponent `a/b` are taken through integer `b`-th roots, so every endpoint is
//! rounded in the safe direction.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::blocks::BlockDecomposition;
use crate::digits::{DigitError, DigitStream};
use crate::dyadic::{pow2_rational, root_enclosure, Dyadic, DyadicInterval, Rounding};

/// Positive rational exponent `num/den` in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Exponent {
    num: u32,
    den: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExponentError {
    Malformed,
    NotPositive,
}

impl fmt::Display for ExponentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExponentError::Malformed => f.write_str("exponent must look like `2` or `3/2`"),
            ExponentError::NotPositive => f.write_str("exponent must be positive"),
        }
    }
}

impl core::error::Error for ExponentError {}

impl Exponent {
    pub fn new(num: u32, den: u32) -> Result<Self, ExponentError> {
        if num == 0 || den == 0 {
            return Err(ExponentError::NotPositive);
        }
        let g = num.gcd(&den);
        Ok(Exponent { num: num / g, den: den / g })
    }

    pub fn integer(p: u32) -> Self {
        Exponent::new(p, 1).expect("positive integer exponent")
    }

    pub fn num(&self) -> u32 {
        self.num
    }

    pub fn den(&self) -> u32 {
        self.den
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    pub fn as_integer(&self) -> Option<u32> {
        self.is_integer().then_some(self.num)
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(BigInt::from(self.num), BigInt::from(self.den))
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Enclosure of `2^(p*e)`.
    pub fn pow2(&self, e: i64, prec: u32) -> DyadicInterval {
        pow2_rational(e * self.num as i64, self.den, prec)
    }

    /// `C* = 2^(2p) / (2^p - 1)`, the block-sum constant.
    pub fn block_constant(&self, prec: u32) -> DyadicInterval {
        let two_p = self.pow2(1, prec + 8);
        let four_p = self.pow2(2, prec + 8);
        let den = DyadicInterval::new(&two_p.lo().clone() - &Dyadic::one(), &two_p.hi().clone() - &Dyadic::one());
        four_p.div_pos(&den, prec)
    }
}

impl FromStr for Exponent {
    type Err = ExponentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let num: u32 = n.parse().map_err(|_| ExponentError::Malformed)?;
        let den: u32 = d.parse().map_err(|_| ExponentError::Malformed)?;
        Exponent::new(num, den)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

pub const DEFAULT_EPS_BITS: u32 = 40;
pub const DEFAULT_BIT_BUDGET: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrbitConfig {
    pub p: Exponent,
    /// Target relative width `2^-eps_bits` for every sum.
    pub eps_bits: u32,
    /// Largest `log2` magnitude allowed for a single term.
    pub bit_budget: u64,
    /// Follow the exact rational orbit when the stream's value is known
    /// (rationals and short block cycles) instead of reading digit windows.
    pub exact_periodic: bool,
}

impl OrbitConfig {
    pub fn new(p: Exponent) -> Self {
        OrbitConfig { p, eps_bits: DEFAULT_EPS_BITS, bit_budget: DEFAULT_BIT_BUDGET, exact_periodic: true }
    }

    pub fn with_eps_bits(mut self, bits: u32) -> Self {
        self.eps_bits = bits;
        self
    }

    /// Always read digit windows, even for streams with a known value.
    pub fn digits_only(mut self) -> Self {
        self.exact_periodic = false;
        self
    }

    /// Working precision for single terms.
    pub fn term_precision(&self) -> u32 {
        (self.eps_bits + 16).max(64)
    }

    /// Working precision for sums of up to `n_max` terms.
    pub fn sum_precision(&self, n_max: u64) -> u32 {
        self.eps_bits + 32 + (64 - n_max.leading_zeros())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OrbitError {
    Digit(DigitError),
    /// The term at index `k` has magnitude about `2^bits`, past the budget.
    OverflowBudget {
        k: u64,
        bits: u64,
        budget: u64,
    },
}

impl From<DigitError> for OrbitError {
    fn from(e: DigitError) -> Self {
        OrbitError::Digit(e)
    }
}

impl fmt::Display for OrbitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrbitError::Digit(e) => e.fmt(f),
            OrbitError::OverflowBudget { k, bits, budget } => {
                write!(f, "term {k} has magnitude 2^{bits}, over the budget of {budget} bits")
            }
        }
    }
}

impl core::error::Error for OrbitError {}

/// `[a, a + 2^-m]` with `a = sum_{i=1}^m d_{k+i-1} 2^-i`, enclosing `f^{k-1}(x)`.
pub fn tail_interval(stream: &mut DigitStream, k: u64, m: u32) -> Result<DyadicInterval, DigitError> {
    assert!(k >= 1);
    let k = k as usize;
    stream.ensure(k + m as usize - 1)?;
    let a = stream.prefix().extract(k, m as usize);
    let lo = Dyadic::new(BigInt::from(a.clone()), -(m as i64));
    let hi = Dyadic::new(BigInt::from(a + 1u32), -(m as i64));
    Ok(DyadicInterval::new(lo, hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TermKind {
    /// `1 / y^p`
    Reciprocal,
    /// `y^p`
    Direct,
}

/// Walks `k = 1, 2, ...` producing term enclosures, reusing the position of
/// the next 1-digit across a zero-run.
pub struct TermWalker<'a> {
    stream: &'a mut DigitStream,
    cfg: OrbitConfig,
    kind: TermKind,
    k: u64,
    next_one: usize,
    bounds: BTreeMap<i64, DyadicInterval>,
    /// Numerator and denominator of `f^k(x)` on the exact path.
    exact: Option<(BigUint, BigUint)>,
}

impl<'a> TermWalker<'a> {
    /// Terms `1 / f^{k-1}(x)^p`.
    pub fn reciprocal(stream: &'a mut DigitStream, cfg: OrbitConfig) -> Self {
        Self::with_kind(stream, cfg, TermKind::Reciprocal)
    }

    /// Terms `f^{k-1}(x)^p`.
    pub fn direct(stream: &'a mut DigitStream, cfg: OrbitConfig) -> Self {
        Self::with_kind(stream, cfg, TermKind::Direct)
    }

    fn with_kind(stream: &'a mut DigitStream, cfg: OrbitConfig, kind: TermKind) -> Self {
        let exact = if cfg.exact_periodic { stream.exact_value() } else { None };
        TermWalker { stream, cfg, kind, k: 0, next_one: 0, bounds: BTreeMap::new(), exact }
    }

    /// True when terms come from the exact rational orbit.
    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Index of the last term produced.
    pub fn index(&self) -> u64 {
        self.k
    }

    pub fn next_term(&mut self) -> Result<DyadicInterval, OrbitError> {
        self.k += 1;
        if let Some((num, den)) = &mut self.exact {
            let term = exact_term(num, den, self.kind, self.cfg.p, self.cfg.term_precision());
            *num <<= 1usize;
            if *num >= *den {
                *num -= &*den;
            }
            return Ok(term);
        }
        let k = self.k as usize;
        if self.next_one < k {
            self.next_one = self.stream.find_one(k)?;
        }
        self.enclose(k, self.next_one)
    }

    fn bound(&mut self, e: i64) -> DyadicInterval {
        let p = self.cfg.p;
        if let Some(a) = p.as_integer() {
            return DyadicInterval::point(Dyadic::pow2(e * a as i64));
        }
        let prec = self.cfg.term_precision();
        if self.bounds.len() > 4096 {
            self.bounds.clear();
        }
        self.bounds.entry(e).or_insert_with(|| p.pow2(e, prec)).clone()
    }

    fn enclose(&mut self, k: usize, one: usize) -> Result<DyadicInterval, OrbitError> {
        let z = (one - k) as u64;
        let p = self.cfg.p;
        let magnitude = (p.num() as u128 * (z as u128 + 1)).div_ceil(p.den() as u128);
        if magnitude > self.cfg.bit_budget as u128 {
            return Err(OrbitError::OverflowBudget {
                k: k as u64,
                bits: magnitude.min(u64::MAX as u128) as u64,
                budget: self.cfg.bit_budget,
            });
        }
        let (lower, upper) = match self.kind {
            TermKind::Reciprocal => (self.bound(z as i64), self.bound(z as i64 + 1)),
            TermKind::Direct => (self.bound(-(z as i64) - 1), self.bound(-(z as i64))),
        };
        let prec = self.cfg.term_precision();
        let mut w = self.cfg.eps_bits as usize + 4 + (32 - p.num().leading_zeros()) as usize;
        loop {
            let (width, truncated) = match self.stream.ensure(one + w - 1) {
                Ok(()) => (w, false),
                Err(DigitError::Exhausted { available, .. }) if available >= one => (available + 1 - one, true),
                Err(e) => return Err(e.into()),
            };
            let mant = self.stream.prefix().extract(one, width);
            let e = z + width as u64;
            let raw = match self.kind {
                TermKind::Reciprocal => reciprocal_power(&mant, e, p, prec),
                TermKind::Direct => direct_power(&mant, e, p, prec),
            };
            let mut lo = raw.lo().clone().max(lower.lo().clone());
            let mut hi = raw.hi().clone().min(upper.hi().clone());
            if self.kind == TermKind::Direct && hi > Dyadic::one() {
                hi = Dyadic::one();
            }
            if self.kind == TermKind::Reciprocal && lo < Dyadic::one() {
                lo = Dyadic::one();
            }
            let iv = DyadicInterval::new(lo, hi);
            if truncated || iv.rel_width_within(self.cfg.eps_bits + 1) {
                return Ok(iv);
            }
            w += 32;
        }
    }
}

/// `(den/num)^p` or `(num/den)^p` for an exactly known orbit point.
fn exact_term(num: &BigUint, den: &BigUint, kind: TermKind, p: Exponent, prec: u32) -> DyadicInterval {
    let a = p.num() as usize;
    let n = num_traits::pow(num.clone(), a);
    let d = num_traits::pow(den.clone(), a);
    match kind {
        TermKind::Reciprocal => root_enclosure(&d, &n, p.den(), prec),
        TermKind::Direct => root_enclosure(&n, &d, p.den(), prec),
    }
}

/// `(2^e / X)^p` for `X` in `[mant, mant + 1]`.
fn reciprocal_power(mant: &BigUint, e: u64, p: Exponent, prec: u32) -> DyadicInterval {
    let a = p.num() as usize;
    let b = p.den();
    let x_lo = num_traits::pow(mant.clone(), a);
    let x_hi = num_traits::pow(mant + 1u32, a);
    let ea = e as i64 * a as i64;
    if b == 1 {
        let num = Dyadic::pow2(ea);
        let lo = Dyadic::div_round(&num, &Dyadic::from_int(BigInt::from(x_hi)), prec, Rounding::Down);
        let hi = Dyadic::div_round(&num, &Dyadic::from_int(BigInt::from(x_lo)), prec, Rounding::Up);
        return DyadicInterval::new(lo, hi);
    }
    let q = ea.div_euclid(b as i64);
    let r = ea.rem_euclid(b as i64) as usize;
    let two_r = BigUint::one() << r;
    let lo = root_enclosure(&two_r, &x_hi, b, prec);
    let hi = root_enclosure(&two_r, &x_lo, b, prec);
    let scale = Dyadic::pow2(q);
    DyadicInterval::new(lo.lo() * &scale, hi.hi() * &scale)
}

/// `(X / 2^e)^p` for `X` in `[mant, mant + 1]`.
fn direct_power(mant: &BigUint, e: u64, p: Exponent, prec: u32) -> DyadicInterval {
    let a = p.num() as usize;
    let b = p.den();
    let x_lo = num_traits::pow(mant.clone(), a);
    let x_hi = num_traits::pow(mant + 1u32, a);
    let ea = e as i64 * a as i64;
    if b == 1 {
        let lo = Dyadic::new(BigInt::from(x_lo), -ea).round(prec, Rounding::Down);
        let hi = Dyadic::new(BigInt::from(x_hi), -ea).round(prec, Rounding::Up);
        return DyadicInterval::new(lo, hi);
    }
    // X^a / 2^(ea) = X^a * 2^r / 2^(q b) with q = ceil(ea / b).
    let q = -(-ea).div_euclid(b as i64);
    let r = (q * b as i64 - ea) as usize;
    let one = BigUint::one();
    let lo = root_enclosure(&(x_lo << r), &one, b, prec);
    let hi = root_enclosure(&(x_hi << r), &one, b, prec);
    let scale = Dyadic::pow2(-q);
    DyadicInterval::new(lo.lo() * &scale, hi.hi() * &scale)
}

/// Enclosure of `1 / f^{k-1}(x)^p` with relative width at most `2^-eps_bits`.
pub fn term_interval(stream: &mut DigitStream, k: u64, cfg: &OrbitConfig) -> Result<DyadicInterval, OrbitError> {
    assert!(k >= 1);
    if let Some(iv) = exact_term_at(stream, k, cfg, TermKind::Reciprocal) {
        return Ok(iv);
    }
    let one = stream.find_one(k as usize)?;
    let mut walker = TermWalker::reciprocal(stream, *cfg);
    walker.enclose(k as usize, one)
}

/// Enclosure of `f^{k-1}(x)^p`.
pub fn dual_term_interval(stream: &mut DigitStream, k: u64, cfg: &OrbitConfig) -> Result<DyadicInterval, OrbitError> {
    assert!(k >= 1);
    if let Some(iv) = exact_term_at(stream, k, cfg, TermKind::Direct) {
        return Ok(iv);
    }
    let one = stream.find_one(k as usize)?;
    let mut walker = TermWalker::direct(stream, *cfg);
    walker.enclose(k as usize, one)
}

fn exact_term_at(stream: &DigitStream, k: u64, cfg: &OrbitConfig, kind: TermKind) -> Option<DyadicInterval> {
    if !cfg.exact_periodic {
        return None;
    }
    let (num, den) = stream.exact_value()?;
    let num = (num * BigUint::from(2u32).modpow(&BigUint::from(k - 1), &den)) % &den;
    Some(exact_term(&num, &den, kind, cfg.p, cfg.term_precision()))
}

/// Which indices `n` a series records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Schedule {
    /// `1..10, 20..100 step 10, 200..1000 step 100, ...` and `n_max`.
    Log,
    /// The log grid plus `s_j, s_j + 1, t_j, t_j + 1` for every block.
    Blocks,
    All,
}

impl Schedule {
    pub fn as_str(self) -> &'static str {
        match self {
            Schedule::Log => "log",
            Schedule::Blocks => "blocks",
            Schedule::All => "all",
        }
    }
}

impl FromStr for Schedule {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "log" => Ok(Schedule::Log),
            "blocks" => Ok(Schedule::Blocks),
            "all" => Ok(Schedule::All),
            _ => Err(()),
        }
    }
}

/// `1, 2, ..., 9, 10, 20, ..., 90, 100, 200, ...` up to `n_max`, then `n_max`.
pub fn log_grid(n_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut step = 1u64;
    let mut n = 1u64;
    while n <= n_max {
        out.push(n);
        if n == 10 * step {
            step *= 10;
        }
        n = match n.checked_add(step) {
            Some(v) => v,
            None => break,
        };
    }
    if out.last() != Some(&n_max) {
        out.push(n_max);
    }
    out
}

/// Sorted, deduplicated checkpoint indices in `1..=n_max`. `decomp` is needed
/// for [`Schedule::Blocks`] and ignored otherwise.
pub fn schedule_points(schedule: Schedule, n_max: u64, decomp: Option<&BlockDecomposition>) -> Vec<u64> {
    match schedule {
        Schedule::All => (1..=n_max).collect(),
        Schedule::Log => log_grid(n_max),
        Schedule::Blocks => {
            let mut pts = log_grid(n_max);
            if let Some(d) = decomp {
                for j in 0..=d.block_count() {
                    for v in [d.s(j), d.s(j) + 1, d.t(j), d.t(j) + 1] {
                        if v >= 1 && v <= n_max {
                            pts.push(v);
                        }
                    }
                }
            }
            pts.sort_unstable();
            pts.dedup();
            pts
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeriesPoint {
    pub n: u64,
    /// Enclosure of the prefix sum through `n`.
    pub sum: DyadicInterval,
    /// Enclosure of `sum / n`.
    pub avg: DyadicInterval,
}

/// Checkpointed enclosures of `S_p(n)` and `A_p(n) = S_p(n)/n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrbitSumSeries {
    pub p: Exponent,
    pub eps_bits: u32,
    pub points: Vec<SeriesPoint>,
}

impl OrbitSumSeries {
    pub fn at(&self, n: u64) -> Option<&SeriesPoint> {
        self.points.binary_search_by_key(&n, |pt| pt.n).ok().map(|i| &self.points[i])
    }

    pub fn n_max(&self) -> u64 {
        self.points.last().map_or(0, |pt| pt.n)
    }
}

/// Running sums of `1 / f^{k-1}(x)^p`, recorded at `points` (sorted ascending).
pub fn prefix_sums_at(
    stream: &mut DigitStream,
    cfg: &OrbitConfig,
    points: &[u64],
) -> Result<OrbitSumSeries, OrbitError> {
    let mut walker = TermWalker::reciprocal(stream, *cfg);
    accumulate(&mut walker, cfg, points)
}

/// Running sums of `f^{k-1}(x)^p`, recorded at `points` (sorted ascending).
pub fn dual_prefix_sums_at(
    stream: &mut DigitStream,
    cfg: &OrbitConfig,
    points: &[u64],
) -> Result<OrbitSumSeries, OrbitError> {
    let mut walker = TermWalker::direct(stream, *cfg);
    accumulate(&mut walker, cfg, points)
}

fn accumulate(walker: &mut TermWalker<'_>, cfg: &OrbitConfig, points: &[u64]) -> Result<OrbitSumSeries, OrbitError> {
    debug_assert!(points.windows(2).all(|w| w[0] < w[1]));
    let n_max = points.last().copied().unwrap_or(0);
    let prec = cfg.sum_precision(n_max);
    let mut sum = DyadicInterval::zero();
    let mut out = Vec::with_capacity(points.len());
    let mut next = points.iter().peekable();
    for n in 1..=n_max {
        let term = walker.next_term()?;
        sum = sum.add_round(&term, prec);
        if next.peek() == Some(&&n) {
            next.next();
            out.push(SeriesPoint { n, sum: sum.clone(), avg: sum.div_int(n, prec) });
        }
    }
    Ok(OrbitSumSeries { p: cfg.p, eps_bits: cfg.eps_bits, points: out })
}

/// Prefix sums through `n_max` on the given schedule.
pub fn prefix_sums(
    stream: &mut DigitStream,
    cfg: &OrbitConfig,
    n_max: u64,
    schedule: Schedule,
) -> Result<OrbitSumSeries, OrbitError> {
    let points = points_for(stream, n_max, schedule)?;
    prefix_sums_at(stream, cfg, &points)
}

/// Dual sums `sum f^{k-1}(x)^p` through `n_max` on the given schedule.
pub fn dual_prefix_sums(
    stream: &mut DigitStream,
    cfg: &OrbitConfig,
    n_max: u64,
    schedule: Schedule,
) -> Result<OrbitSumSeries, OrbitError> {
    let points = points_for(stream, n_max, schedule)?;
    dual_prefix_sums_at(stream, cfg, &points)
}

fn points_for(stream: &mut DigitStream, n_max: u64, schedule: Schedule) -> Result<Vec<u64>, DigitError> {
    let decomp = match schedule {
        Schedule::Blocks => Some(crate::blocks::decompose_stream(stream, n_max as usize)?),
        _ => None,
    };
    Ok(schedule_points(schedule, n_max, decomp.as_ref()))
}

/// Exact orbit `x, f(x), f^2(x), ...` of a rational.
#[derive(Clone, Debug)]
pub struct RationalOrbit {
    num: BigUint,
    den: BigUint,
}

impl RationalOrbit {
    pub fn new(num: BigUint, den: BigUint) -> Self {
        assert!(!den.is_zero() && num < den);
        RationalOrbit { num, den }
    }
}

impl Iterator for RationalOrbit {
    /// `(numerator, denominator)` of the current point.
    type Item = (BigUint, BigUint);

    fn next(&mut self) -> Option<Self::Item> {
        let current = (self.num.clone(), self.den.clone());
        self.num <<= 1usize;
        if self.num >= self.den {
            self.num -= &self.den;
        }
        Some(current)
    }
}

/// Exact `S_p(n)` for rational `x = num/den` and integer `p`.
pub fn exact_oracle(num: &BigUint, den: &BigUint, p: u32, n: u64) -> BigRational {
    RationalOrbit::new(num.clone(), den.clone())
        .take(n as usize)
        .map(|(a, b)| BigRational::new(BigInt::from(b).pow(p), BigInt::from(a).pow(p)))
        .fold(BigRational::zero(), |acc, t| acc + t)
}

/// Exact `sum_{k=1}^n f^{k-1}(x)^p` for rational `x` and integer `p`.
pub fn exact_dual_oracle(num: &BigUint, den: &BigUint, p: u32, n: u64) -> BigRational {
    RationalOrbit::new(num.clone(), den.clone())
        .take(n as usize)
        .map(|(a, b)| BigRational::new(BigInt::from(a).pow(p), BigInt::from(b).pow(p)))
        .fold(BigRational::zero(), |acc, t| acc + t)
}
