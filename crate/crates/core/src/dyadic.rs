//! Arbitrary-precision dyadic rationals and outward-rounded intervals.
//!
//! A [`Dyadic`] is `mantissa * 2^exponent` with a big-integer mantissa and a
//! machine-word exponent, so magnitudes like `2^(2 * 14!)` stay cheap to
//! represent. Rounding is always explicit: every inexact operation takes a
//! precision in bits and a [`Rounding`] direction.

use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Direction for an inexact result.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rounding {
    /// Toward negative infinity.
    Down,
    /// Toward positive infinity.
    Up,
}

impl Rounding {
    fn away_from_zero(self, negative: bool) -> bool {
        matches!((self, negative), (Rounding::Up, false) | (Rounding::Down, true))
    }
}

/// Exact value `mantissa * 2^exponent`, kept normalized (odd mantissa, or zero
/// with exponent zero).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mant: BigInt,
    exp: i64,
}

impl Dyadic {
    pub fn new(mant: BigInt, exp: i64) -> Self {
        let mut d = Dyadic { mant, exp };
        d.normalize();
        d
    }

    pub fn zero() -> Self {
        Dyadic { mant: BigInt::zero(), exp: 0 }
    }

    pub fn one() -> Self {
        Dyadic { mant: BigInt::one(), exp: 0 }
    }

    pub fn from_int<T: Into<BigInt>>(value: T) -> Self {
        Self::new(value.into(), 0)
    }

    /// Exactly `2^e`.
    pub fn pow2(e: i64) -> Self {
        Dyadic { mant: BigInt::one(), exp: e }
    }

    fn normalize(&mut self) {
        if self.mant.is_zero() {
            self.exp = 0;
            return;
        }
        let tz = self.mant.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.mant >>= tz;
            self.exp += tz as i64;
        }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mant
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.mant.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }

    /// `floor(log2 |x|) + 1` for nonzero `x`.
    pub fn magnitude_bits(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.exp + self.mant.bits() as i64)
        }
    }

    /// Splits `|x|` into `f * 2^e` with `f` in `[1, 2)` approximated by an `f64`.
    /// Useful for log-domain display; not a rigorous operation.
    pub fn split_log2(&self) -> Option<(i64, f64)> {
        let bits = self.mant.bits();
        if bits == 0 {
            return None;
        }
        let mag = self.mant.magnitude();
        let top = if bits > 64 { mag >> (bits - 64) } else { mag.clone() };
        let top_bits = top.bits();
        let top = top.iter_u64_digits().next().unwrap_or(0);
        // top has `top_bits` significant bits; scale into [1, 2).
        let frac = top as f64 / pow2_f64(top_bits as i64 - 1);
        Some((self.exp + bits as i64 - 1, frac))
    }

    /// Nearest-ish `f64`; saturates to infinity and flushes to zero.
    pub fn to_f64(&self) -> f64 {
        match self.split_log2() {
            None => 0.0,
            Some((e, f)) => {
                let v = f * pow2_f64(e);
                if self.is_negative() {
                    -v
                } else {
                    v
                }
            }
        }
    }

    /// Exact conversion. The denominator is `2^-exponent`, so keep this to
    /// moderate exponents.
    pub fn to_rational(&self) -> BigRational {
        if self.exp >= 0 {
            BigRational::from_integer(&self.mant << self.exp as usize)
        } else {
            BigRational::new(self.mant.clone(), BigInt::one() << (-self.exp) as usize)
        }
    }

    pub fn cmp_rational(&self, r: &BigRational) -> Ordering {
        // r.denom() > 0 by construction of Ratio.
        let lhs = &self.mant * r.denom();
        if self.exp >= 0 {
            (lhs << self.exp as usize).cmp(r.numer())
        } else {
            lhs.cmp(&(r.numer() << (-self.exp) as usize))
        }
    }

    /// Rounds to at most `prec` significant bits.
    pub fn round(&self, prec: u32, dir: Rounding) -> Dyadic {
        let bits = self.mant.bits();
        if bits <= prec as u64 {
            return self.clone();
        }
        let shift = bits - prec as u64;
        self.round_to_exp(self.exp + shift as i64, dir)
    }

    /// Rounds onto the grid `2^grid * Z`.
    pub fn round_to_exp(&self, grid: i64, dir: Rounding) -> Dyadic {
        if self.exp >= grid || self.is_zero() {
            return self.clone();
        }
        let shift = (grid - self.exp) as u64;
        let negative = self.is_negative();
        let mag = self.mant.magnitude();
        let mut q = if shift >= mag.bits() { BigUint::zero() } else { mag >> shift };
        let exact = shift < mag.bits() && mag.trailing_zeros().unwrap_or(0) >= shift;
        if !exact && dir.away_from_zero(negative) {
            q += 1u32;
        }
        let sign = if negative { Sign::Minus } else { Sign::Plus };
        Dyadic::new(BigInt::from_biguint(sign, q), grid)
    }

    /// `self + other`, rounded to `prec` bits without materializing huge
    /// aligned mantissas when the exponents are far apart.
    pub fn add_round(&self, other: &Dyadic, prec: u32, dir: Rounding) -> Dyadic {
        let top = match (self.magnitude_bits(), other.magnitude_bits()) {
            (None, None) => return Dyadic::zero(),
            (Some(_), None) => return self.round(prec, dir),
            (None, Some(_)) => return other.round(prec, dir),
            (Some(a), Some(b)) => a.max(b),
        };
        let grid = top - prec as i64 - 4;
        let a = self.round_to_exp(grid, dir);
        let b = other.round_to_exp(grid, dir);
        (&a + &b).round(prec, dir)
    }

    /// `num / den` with directed rounding to `prec` bits.
    ///
    /// Panics if `den` is zero.
    pub fn div_round(num: &Dyadic, den: &Dyadic, prec: u32, dir: Rounding) -> Dyadic {
        assert!(!den.is_zero(), "division by zero dyadic");
        if num.is_zero() {
            return Dyadic::zero();
        }
        let nb = num.mant.bits() as i64;
        let db = den.mant.bits() as i64;
        let shift = (prec as i64 + db - nb + 2).max(0) as usize;
        let n = num.mant.magnitude() << shift;
        let d = den.mant.magnitude();
        let (mut q, r) = n.div_rem(d);
        let negative = num.is_negative() != den.is_negative();
        if !r.is_zero() && dir.away_from_zero(negative) {
            q += 1u32;
        }
        let sign = if negative { Sign::Minus } else { Sign::Plus };
        Dyadic::new(BigInt::from_biguint(sign, q), num.exp - den.exp - shift as i64).round(prec, dir)
    }

    /// Directed rounding of an exact rational.
    pub fn from_rational(r: &BigRational, prec: u32, dir: Rounding) -> Dyadic {
        Dyadic::div_round(&Dyadic::from_int(r.numer().clone()), &Dyadic::from_int(r.denom().clone()), prec, dir)
    }

    pub fn mul_int(&self, k: u64) -> Dyadic {
        Dyadic::new(&self.mant * BigInt::from(k), self.exp)
    }

    pub fn abs(&self) -> Dyadic {
        Dyadic { mant: self.mant.abs(), exp: self.exp }
    }

    pub fn min(self, other: Dyadic) -> Dyadic {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Dyadic) -> Dyadic {
        if other > self {
            other
        } else {
            self
        }
    }
}

/// `2^e` as an `f64`, saturating.
pub(crate) fn pow2_f64(e: i64) -> f64 {
    if e > 1023 {
        f64::INFINITY
    } else if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else if e >= -1074 {
        f64::from_bits(1u64 << (e + 1074))
    } else {
        0.0
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let sa = self.mant.sign();
        let sb = other.mant.sign();
        let rank = |s: Sign| match s {
            Sign::Minus => 0,
            Sign::NoSign => 1,
            Sign::Plus => 2,
        };
        if sa != sb {
            return rank(sa).cmp(&rank(sb));
        }
        if sa == Sign::NoSign {
            return Ordering::Equal;
        }
        let ma = self.magnitude_bits().unwrap_or(0);
        let mb = other.magnitude_bits().unwrap_or(0);
        let by_magnitude = if ma != mb {
            ma.cmp(&mb)
        } else {
            let e = self.exp.min(other.exp);
            let a = self.mant.magnitude() << (self.exp - e) as usize;
            let b = other.mant.magnitude() << (other.exp - e) as usize;
            a.cmp(&b)
        };
        if sa == Sign::Minus {
            by_magnitude.reverse()
        } else {
            by_magnitude
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> Add<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;

    fn add(self, rhs: &'a Dyadic) -> Dyadic {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let e = self.exp.min(rhs.exp);
        let a = &self.mant << (self.exp - e) as usize;
        let b = &rhs.mant << (rhs.exp - e) as usize;
        Dyadic::new(a + b, e)
    }
}

impl<'a> Sub<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;

    fn sub(self, rhs: &'a Dyadic) -> Dyadic {
        self + &(-rhs)
    }
}

impl<'a> Mul<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;

    fn mul(self, rhs: &'a Dyadic) -> Dyadic {
        Dyadic::new(&self.mant * &rhs.mant, self.exp + rhs.exp)
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;

    fn neg(self) -> Dyadic {
        Dyadic { mant: -&self.mant, exp: self.exp }
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*2^{}", self.mant, self.exp)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Enclosure `[lo, hi]` of a real number.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DyadicInterval {
    lo: Dyadic,
    hi: Dyadic,
}

impl DyadicInterval {
    /// Panics if `lo > hi`.
    pub fn new(lo: Dyadic, hi: Dyadic) -> Self {
        assert!(lo <= hi, "inverted interval [{lo:?}, {hi:?}]");
        DyadicInterval { lo, hi }
    }

    pub fn try_new(lo: Dyadic, hi: Dyadic) -> Option<Self> {
        (lo <= hi).then_some(DyadicInterval { lo, hi })
    }

    pub fn point(x: Dyadic) -> Self {
        DyadicInterval { lo: x.clone(), hi: x }
    }

    pub fn zero() -> Self {
        Self::point(Dyadic::zero())
    }

    /// Outward rounding of an exact rational.
    pub fn from_rational(r: &BigRational, prec: u32) -> Self {
        DyadicInterval {
            lo: Dyadic::from_rational(r, prec, Rounding::Down),
            hi: Dyadic::from_rational(r, prec, Rounding::Up),
        }
    }

    pub fn lo(&self) -> &Dyadic {
        &self.lo
    }

    pub fn hi(&self) -> &Dyadic {
        &self.hi
    }

    pub fn into_bounds(self) -> (Dyadic, Dyadic) {
        (self.lo, self.hi)
    }

    pub fn width(&self) -> Dyadic {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Dyadic) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_rational(&self, r: &BigRational) -> bool {
        self.lo.cmp_rational(r) != Ordering::Greater && self.hi.cmp_rational(r) != Ordering::Less
    }

    pub fn is_subset_of(&self, other: &DyadicInterval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn intersect(&self, other: &DyadicInterval) -> Option<DyadicInterval> {
        let lo = self.lo.clone().max(other.lo.clone());
        let hi = self.hi.clone().min(other.hi.clone());
        DyadicInterval::try_new(lo, hi)
    }

    /// True when `(hi - lo) <= 2^-bits * lo`, for positive intervals.
    pub fn rel_width_within(&self, bits: u32) -> bool {
        if !self.lo.is_positive() {
            return self.lo == self.hi;
        }
        let scaled = &self.width() * &Dyadic::pow2(bits as i64);
        scaled <= self.lo
    }

    /// Upper bound on `(hi - lo) / lo`, for positive intervals.
    pub fn rel_width(&self, prec: u32) -> Dyadic {
        Dyadic::div_round(&self.width(), &self.lo, prec, Rounding::Up)
    }

    pub fn round_outward(&self, prec: u32) -> DyadicInterval {
        DyadicInterval { lo: self.lo.round(prec, Rounding::Down), hi: self.hi.round(prec, Rounding::Up) }
    }

    pub fn add_round(&self, other: &DyadicInterval, prec: u32) -> DyadicInterval {
        DyadicInterval {
            lo: self.lo.add_round(&other.lo, prec, Rounding::Down),
            hi: self.hi.add_round(&other.hi, prec, Rounding::Up),
        }
    }

    pub fn add_exact(&self, other: &DyadicInterval) -> DyadicInterval {
        DyadicInterval { lo: &self.lo + &other.lo, hi: &self.hi + &other.hi }
    }

    pub fn add_int(&self, k: u64) -> DyadicInterval {
        let k = Dyadic::from_int(k);
        DyadicInterval { lo: &self.lo + &k, hi: &self.hi + &k }
    }

    pub fn scale_int(&self, k: u64) -> DyadicInterval {
        DyadicInterval { lo: self.lo.mul_int(k), hi: self.hi.mul_int(k) }
    }

    /// Product of two nonnegative intervals.
    pub fn mul_nonneg(&self, other: &DyadicInterval, prec: u32) -> DyadicInterval {
        debug_assert!(!self.lo.is_negative() && !other.lo.is_negative());
        DyadicInterval {
            lo: (&self.lo * &other.lo).round(prec, Rounding::Down),
            hi: (&self.hi * &other.hi).round(prec, Rounding::Up),
        }
    }

    /// Quotient of a nonnegative interval by a positive one.
    pub fn div_pos(&self, other: &DyadicInterval, prec: u32) -> DyadicInterval {
        debug_assert!(!self.lo.is_negative() && other.lo.is_positive());
        DyadicInterval {
            lo: Dyadic::div_round(&self.lo, &other.hi, prec, Rounding::Down),
            hi: Dyadic::div_round(&self.hi, &other.lo, prec, Rounding::Up),
        }
    }

    pub fn div_int(&self, k: u64, prec: u32) -> DyadicInterval {
        let k = Dyadic::from_int(k);
        DyadicInterval {
            lo: Dyadic::div_round(&self.lo, &k, prec, Rounding::Down),
            hi: Dyadic::div_round(&self.hi, &k, prec, Rounding::Up),
        }
    }
}

/// Enclosure of `(num / den)^(1/root)` with `prec` significant bits, computed
/// with integer `root`-th roots only.
pub fn root_enclosure(num: &BigUint, den: &BigUint, root: u32, prec: u32) -> DyadicInterval {
    assert!(!num.is_zero() && !den.is_zero() && root >= 1);
    if root == 1 {
        let n = Dyadic::from_int(BigInt::from(num.clone()));
        let d = Dyadic::from_int(BigInt::from(den.clone()));
        return DyadicInterval::new(
            Dyadic::div_round(&n, &d, prec, Rounding::Down),
            Dyadic::div_round(&n, &d, prec, Rounding::Up),
        );
    }
    // Choose the scale s so that (num/den) * 2^(root*s) has about root*(prec+2) bits.
    let log_ratio = num.bits() as i64 - den.bits() as i64;
    let s = prec as i64 + 2 - log_ratio.div_euclid(root as i64);
    let (n, d) = if s >= 0 {
        (num << (root as u64 * s as u64) as usize, den.clone())
    } else {
        (num.clone(), den << (root as u64 * (-s) as u64) as usize)
    };
    let (q_floor, r) = n.div_rem(&d);
    let q_ceil = if r.is_zero() { q_floor.clone() } else { &q_floor + 1u32 };
    let lo_root = q_floor.nth_root(root);
    let mut hi_root = q_ceil.nth_root(root);
    if num_traits::pow(hi_root.clone(), root as usize) < q_ceil {
        hi_root += 1u32;
    }
    let lo = Dyadic::new(BigInt::from(lo_root), -s).round(prec, Rounding::Down);
    let hi = Dyadic::new(BigInt::from(hi_root), -s).round(prec, Rounding::Up);
    DyadicInterval::new(lo, hi)
}

/// Enclosure of `2^(num/den)` for a rational exponent.
pub fn pow2_rational(num: i64, den: u32, prec: u32) -> DyadicInterval {
    let q = num.div_euclid(den as i64);
    let r = num.rem_euclid(den as i64) as u64;
    if r == 0 {
        return DyadicInterval::point(Dyadic::pow2(q));
    }
    let frac = root_enclosure(&(BigUint::one() << r as usize), &BigUint::one(), den, prec);
    let scale = Dyadic::pow2(q);
    DyadicInterval::new(&frac.lo * &scale, &frac.hi * &scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(m: i64, e: i64) -> Dyadic {
        Dyadic::new(BigInt::from(m), e)
    }

    fn rat(n: i64, m: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(m))
    }

    #[test]
    fn normalizes_trailing_zeros() {
        assert_eq!(d(12, 0), d(3, 2));
        assert_eq!(d(0, 17), Dyadic::zero());
    }

    #[test]
    fn ordering_across_exponents() {
        assert!(d(1, 100) > d(3, 0));
        assert!(d(-1, 100) < d(-3, 0));
        assert!(d(3, -2) < d(1, 0));
        assert!(d(5, -2) > d(1, 0));
        assert_eq!(d(1, -1).cmp(&d(2, -2)), Ordering::Equal);
    }

    #[test]
    fn directed_division_brackets_one_third() {
        let one = Dyadic::one();
        let three = Dyadic::from_int(3);
        let lo = Dyadic::div_round(&one, &three, 40, Rounding::Down);
        let hi = Dyadic::div_round(&one, &three, 40, Rounding::Up);
        let third = rat(1, 3);
        assert_eq!(lo.cmp_rational(&third), Ordering::Less);
        assert_eq!(hi.cmp_rational(&third), Ordering::Greater);
        assert!(lo.mantissa().bits() <= 40);
        let w = &hi - &lo;
        assert!(w <= Dyadic::pow2(-40));
    }

    #[test]
    fn negative_rounding_directions() {
        let x = d(-7, -2); // -1.75
        assert_eq!(x.round_to_exp(0, Rounding::Down), d(-2, 0));
        assert_eq!(x.round_to_exp(0, Rounding::Up), d(-1, 0));
    }

    #[test]
    fn add_round_far_apart() {
        let big = Dyadic::pow2(100_000);
        let one = Dyadic::one();
        let down = big.add_round(&one, 64, Rounding::Down);
        let up = big.add_round(&one, 64, Rounding::Up);
        assert_eq!(down, big);
        assert!(up > big);
        assert!(up.mantissa().bits() <= 64);
        let exact = &big + &one;
        assert!(down <= exact && exact <= up);
    }

    #[test]
    fn sqrt_two_enclosure() {
        let two = BigUint::from(2u32);
        let iv = root_enclosure(&two, &BigUint::one(), 2, 60);
        let lo2 = &iv.lo * &iv.lo;
        let hi2 = &iv.hi * &iv.hi;
        assert!(lo2 < Dyadic::from_int(2));
        assert!(hi2 > Dyadic::from_int(2));
        assert!(iv.rel_width_within(55));
    }

    #[test]
    fn exact_roots_are_points() {
        let iv = root_enclosure(&BigUint::from(27u32), &BigUint::from(8u32), 3, 50);
        assert_eq!(iv.lo, d(3, -1));
        assert_eq!(iv.hi, d(3, -1));
    }

    #[test]
    fn pow2_rational_integer_and_fraction() {
        assert_eq!(pow2_rational(6, 2, 40), DyadicInterval::point(Dyadic::pow2(3)));
        let iv = pow2_rational(3, 2, 40); // 2^1.5
        let lo2 = &iv.lo * &iv.lo;
        let hi2 = &iv.hi * &iv.hi;
        assert!(lo2 < Dyadic::from_int(8) && hi2 > Dyadic::from_int(8));
    }

    #[test]
    fn interval_contains_rational() {
        let iv = DyadicInterval::from_rational(&rat(45, 4), 30);
        assert!(iv.contains_rational(&rat(45, 4)));
        assert_eq!(iv.lo, iv.hi);
        let third = DyadicInterval::from_rational(&rat(1, 3), 30);
        assert!(third.contains_rational(&rat(1, 3)));
        assert!(!third.contains_rational(&rat(1, 2)));
    }

    #[test]
    fn split_log2_matches_value() {
        let (e, f) = d(3, 10).split_log2().unwrap();
        assert_eq!(e, 11);
        assert!((f - 1.5).abs() < 1e-15);
        assert_eq!(d(5, -3).to_f64(), 0.625);
    }
}
