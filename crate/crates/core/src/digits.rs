//! Binary digit sources.
//!
//! Digits are 1-indexed to match `x = sum d_k / 2^k`. Every downstream
//! computation reads digits through a [`DigitStream`]; nothing is ever derived
//! from a floating-point seed.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::streamspec::{validate_spec, Expr, IssueCode, StreamSpec};

/// Default maximal run of equal digits tolerated from sources that do not
/// declare their own run lengths.
pub const DEFAULT_GUARD: u64 = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DigitError {
    /// A run of equal digits longer than the guard, ending at `position`.
    GuardExceeded {
        position: usize,
        run: u64,
        guard: u64,
    },
    /// A finite source has only `available` digits.
    Exhausted {
        requested: usize,
        available: usize,
    },
    /// A block-family length overflowed `u64` at index `j`.
    BlockLengthOverflow {
        j: u64,
    },
    /// The spec failed validation.
    InvalidSpec(IssueCode),
    /// Raw digit files must be loaded by the host and passed to [`DigitStream::from_raw`].
    RequiresIo,
    InvalidCharacter {
        offset: usize,
        found: char,
    },
}

impl fmt::Display for DigitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DigitError::GuardExceeded { position, run, guard } => {
                write!(f, "run of {run} equal digits ending at position {position} exceeds guard {guard}")
            }
            DigitError::Exhausted { requested, available } => {
                write!(f, "requested digit {requested} but source has only {available}")
            }
            DigitError::BlockLengthOverflow { j } => write!(f, "block length overflows at j={j}"),
            DigitError::InvalidSpec(code) => write!(f, "invalid stream spec: {}", code.as_str()),
            DigitError::RequiresIo => f.write_str("raw digit files must be loaded by the caller"),
            DigitError::InvalidCharacter { offset, found } => {
                write!(f, "invalid digit character {found:?} at offset {offset}")
            }
        }
    }
}

impl core::error::Error for DigitError {}

/// Packed, MSB-first bit sequence `d_1 d_2 ... d_len`.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct DigitPrefix {
    words: Vec<u64>,
    len: usize,
}

impl DigitPrefix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut p = Self::new();
        for &b in bits {
            p.push(b);
        }
        p
    }

    /// ASCII `'0'`/`'1'`, whitespace ignored.
    pub fn from_ascii(text: &str) -> Result<Self, DigitError> {
        let mut p = Self::new();
        for (offset, ch) in text.char_indices() {
            match ch {
                '0' => p.push(0),
                '1' => p.push(1),
                c if c.is_whitespace() => {}
                found => return Err(DigitError::InvalidCharacter { offset, found }),
            }
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, bit: u8) {
        let idx = self.len;
        if idx.is_multiple_of(64) {
            self.words.push(0);
        }
        if bit != 0 {
            self.words[idx / 64] |= 1u64 << (63 - idx % 64);
        }
        self.len += 1;
    }

    /// `d_i`, 1-based. Panics when out of range.
    pub fn get(&self, i: usize) -> u8 {
        assert!(i >= 1 && i <= self.len, "digit index {i} outside 1..={}", self.len);
        let idx = i - 1;
        ((self.words[idx / 64] >> (63 - idx % 64)) & 1) as u8
    }

    pub fn try_get(&self, i: usize) -> Option<u8> {
        (i >= 1 && i <= self.len).then(|| self.get(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (1..=self.len).map(move |i| self.get(i))
    }

    pub fn to_vec(&self) -> Vec<u8> {
        self.iter().collect()
    }

    /// First `n` digits.
    pub fn truncated(&self, n: usize) -> DigitPrefix {
        let n = n.min(self.len);
        let mut words: Vec<u64> = self.words[..n.div_ceil(64)].to_vec();
        if !n.is_multiple_of(64) {
            if let Some(last) = words.last_mut() {
                *last &= !0u64 << (64 - n % 64);
            }
        }
        DigitPrefix { words, len: n }
    }

    /// Digits of `f^k(x)`: drops the first `k`.
    pub fn shifted(&self, k: usize) -> DigitPrefix {
        let mut out = DigitPrefix::new();
        for i in (k + 1)..=self.len {
            out.push(self.get(i));
        }
        out
    }

    /// Digits of `1 - x`.
    pub fn complemented(&self) -> DigitPrefix {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        if !self.len.is_multiple_of(64) {
            if let Some(last) = words.last_mut() {
                *last &= !0u64 << (64 - self.len % 64);
            }
        }
        DigitPrefix { words, len: self.len }
    }

    /// Up to 64 digits starting at 1-based `start`, as an integer whose most
    /// significant bit is `d_start`.
    pub fn extract_u64(&self, start: usize, count: u32) -> u64 {
        assert!(count <= 64 && start >= 1 && start - 1 + count as usize <= self.len);
        if count == 0 {
            return 0;
        }
        let idx = start - 1;
        let w = idx / 64;
        let off = (idx % 64) as u32;
        let hi = self.words[w] << off;
        let joined = if off == 0 || w + 1 >= self.words.len() { hi } else { hi | (self.words[w + 1] >> (64 - off)) };
        joined >> (64 - count)
    }

    /// `count` digits starting at `start` as a big integer.
    pub fn extract(&self, start: usize, count: usize) -> BigUint {
        let mut acc = BigUint::zero();
        let mut pos = start;
        let mut left = count;
        while left > 0 {
            let take = left.min(64) as u32;
            acc = (acc << take as usize) + BigUint::from(self.extract_u64(pos, take));
            pos += take as usize;
            left -= take as usize;
        }
        acc
    }

    /// Index of the first `1` at or after `i`, if materialized.
    pub fn next_one_from(&self, i: usize) -> Option<usize> {
        if i == 0 || i > self.len {
            return None;
        }
        let mut idx = i - 1;
        while idx < self.len {
            let w = idx / 64;
            let off = idx % 64;
            let masked = self.words[w] << off;
            if masked != 0 {
                let found = idx + masked.leading_zeros() as usize;
                return (found < self.len).then_some(found + 1);
            }
            idx = (w + 1) * 64;
        }
        None
    }

    /// Number of ones among `d_1..d_n`.
    pub fn count_ones(&self, n: usize) -> u64 {
        let n = n.min(self.len);
        let full = n / 64;
        let mut c: u64 = self.words[..full].iter().map(|w| w.count_ones() as u64).sum();
        if !n.is_multiple_of(64) {
            c += (self.words[full] >> (64 - n % 64)).count_ones() as u64;
        }
        c
    }
}

impl fmt::Debug for DigitPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DigitPrefix({self})")
    }
}

/// ASCII rendering, no separators.
impl fmt::Display for DigitPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Lengths `(l_j, m_j)` of a block-built spec, in order.
#[derive(Clone, Debug)]
pub struct BlockLengths {
    gen: PairGen,
    j: u64,
}

#[derive(Clone, Debug)]
enum PairGen {
    Cycle(Vec<(u64, u64)>),
    Family(Expr, Expr),
    Random { rng: Box<ChaCha8Rng>, lmax: u64 },
}

impl BlockLengths {
    /// Leading ones-run and the pair iterator, for block-built specs.
    pub fn for_spec(spec: &StreamSpec) -> Option<(u64, BlockLengths)> {
        let (m0, gen) = match spec {
            StreamSpec::BlockCycle { pairs, m0 } => (*m0, PairGen::Cycle(pairs.clone())),
            StreamSpec::BlockFamily { zeros, ones, m0 } => (*m0, PairGen::Family(zeros.clone(), ones.clone())),
            StreamSpec::RandomBlocks { seed, lmax } => {
                (0, PairGen::Random { rng: Box::new(ChaCha8Rng::seed_from_u64(*seed)), lmax: *lmax })
            }
            _ => return None,
        };
        Some((m0, BlockLengths { gen, j: 0 }))
    }
}

/// Geometric(1/2) on `{1, 2, ...}` conditioned on `<= lmax`: one plus the
/// trailing zeros of a uniform `u64`, rejecting draws above `lmax`.
fn random_length(rng: &mut ChaCha8Rng, lmax: u64) -> u64 {
    loop {
        let len = rng.next_u64().trailing_zeros() as u64 + 1;
        if len <= lmax {
            return len;
        }
    }
}

impl Iterator for BlockLengths {
    type Item = Result<(u64, u64), DigitError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.j += 1;
        let j = self.j;
        Some(match &mut self.gen {
            PairGen::Cycle(pairs) => {
                if pairs.is_empty() {
                    return None;
                }
                Ok(pairs[((j - 1) % pairs.len() as u64) as usize])
            }
            PairGen::Family(zeros, ones) => match (zeros.eval(j), ones.eval(j)) {
                (Some(l), Some(m)) => Ok((l, m)),
                _ => Err(DigitError::BlockLengthOverflow { j }),
            },
            PairGen::Random { rng, lmax } => {
                let l = random_length(rng, *lmax);
                let m = random_length(rng, *lmax);
                Ok((l, m))
            }
        })
    }
}

#[derive(Clone, Debug)]
enum Source {
    RationalSmall {
        rem: u64,
        den: u64,
    },
    RationalBig {
        rem: BigUint,
        den: BigUint,
    },
    Champernowne {
        numeral: u64,
        bits_left: u32,
    },
    /// Emitting `left` more copies of `bit`; `ones` is the one-run length of
    /// the current pair once its zeros are used up.
    Runs {
        lengths: BlockLengths,
        bit: u8,
        left: u64,
        ones: u64,
    },
    /// Preloaded, finite.
    Raw,
}

/// Lazily materialized digits of a point of `Sigma`.
///
/// Readers must call [`DigitStream::ensure`] (or `materialize`) before
/// borrowing [`DigitStream::prefix`] for an index range.
#[derive(Clone, Debug)]
pub struct DigitStream {
    spec: StreamSpec,
    source: Source,
    buffer: DigitPrefix,
    /// Raw sources: total digits available.
    available: Option<usize>,
    guard: Option<u64>,
    complemented: bool,
    checked: usize,
    run_bit: u8,
    run_len: u64,
}

impl DigitStream {
    /// Stream with the default guard.
    pub fn new(spec: StreamSpec) -> Result<Self, DigitError> {
        Self::with_guard(spec, DEFAULT_GUARD)
    }

    pub fn with_guard(spec: StreamSpec, guard: u64) -> Result<Self, DigitError> {
        let report = validate_spec(&spec);
        if let Some(issue) = report.issues.first() {
            return Err(DigitError::InvalidSpec(issue.code));
        }
        let source = match &spec {
            StreamSpec::Rational { num, den } => match (num.to_u64(), den.to_u64()) {
                (Some(n), Some(d)) if d < (1 << 62) => Source::RationalSmall { rem: n, den: d },
                _ => Source::RationalBig { rem: num.clone(), den: den.clone() },
            },
            StreamSpec::Champernowne => Source::Champernowne { numeral: 1, bits_left: 1 },
            StreamSpec::RawDigits { .. } => return Err(DigitError::RequiresIo),
            _ => {
                let (m0, lengths) = BlockLengths::for_spec(&spec).expect("block-built spec");
                Source::Runs { lengths, bit: 1, left: m0, ones: 0 }
            }
        };
        let guard = (!spec.declares_runs()).then_some(guard);
        Ok(DigitStream {
            spec,
            source,
            buffer: DigitPrefix::new(),
            available: None,
            guard,
            complemented: false,
            checked: 0,
            run_bit: 2,
            run_len: 0,
        })
    }

    /// Finite stream over digits loaded by the caller (e.g. from a `digits:file=` path).
    pub fn from_raw(spec: StreamSpec, digits: DigitPrefix, guard: u64) -> Self {
        let available = digits.len();
        DigitStream {
            spec,
            source: Source::Raw,
            buffer: digits,
            available: Some(available),
            guard: Some(guard),
            complemented: false,
            checked: 0,
            run_bit: 2,
            run_len: 0,
        }
    }

    pub fn spec(&self) -> &StreamSpec {
        &self.spec
    }

    pub fn is_complemented(&self) -> bool {
        self.complemented
    }

    /// Guard in force, `None` for sources that declare their runs.
    pub fn guard(&self) -> Option<u64> {
        self.guard
    }

    /// Digits available so far.
    pub fn prefix(&self) -> &DigitPrefix {
        &self.buffer
    }

    /// Materializes at least `d_1..d_n`.
    pub fn ensure(&mut self, n: usize) -> Result<(), DigitError> {
        if let Some(available) = self.available {
            if n > available {
                return Err(DigitError::Exhausted { requested: n, available });
            }
        }
        while self.buffer.len() < n {
            let bit = self.next_raw_bit()?;
            self.buffer.push(bit ^ self.complemented as u8);
        }
        self.check_guard(n)
    }

    fn check_guard(&mut self, n: usize) -> Result<(), DigitError> {
        let Some(guard) = self.guard else {
            return Ok(());
        };
        while self.checked < n {
            let bit = self.buffer.get(self.checked + 1);
            if bit == self.run_bit {
                self.run_len += 1;
            } else {
                self.run_bit = bit;
                self.run_len = 1;
            }
            if self.run_len > guard {
                return Err(DigitError::GuardExceeded { position: self.checked + 1, run: self.run_len, guard });
            }
            self.checked += 1;
        }
        Ok(())
    }

    fn next_raw_bit(&mut self) -> Result<u8, DigitError> {
        Ok(match &mut self.source {
            Source::RationalSmall { rem, den } => {
                *rem *= 2;
                if *rem >= *den {
                    *rem -= *den;
                    1
                } else {
                    0
                }
            }
            Source::RationalBig { rem, den } => {
                *rem <<= 1usize;
                if *rem >= *den {
                    *rem -= &*den;
                    1
                } else {
                    0
                }
            }
            Source::Champernowne { numeral, bits_left } => {
                let bit = ((*numeral >> (*bits_left - 1)) & 1) as u8;
                *bits_left -= 1;
                if *bits_left == 0 {
                    *numeral += 1;
                    *bits_left = 64 - numeral.leading_zeros();
                }
                bit
            }
            Source::Runs { lengths, bit, left, ones } => {
                while *left == 0 {
                    if *bit == 1 {
                        let (l, m) = lengths.next().expect("block lengths are infinite")?;
                        *bit = 0;
                        *left = l;
                        *ones = m;
                    } else {
                        *bit = 1;
                        *left = *ones;
                    }
                }
                *left -= 1;
                *bit
            }
            Source::Raw => unreachable!("raw sources are preloaded"),
        })
    }

    /// `d_i`.
    pub fn digit_at(&mut self, i: usize) -> Result<u8, DigitError> {
        assert!(i >= 1, "digits are 1-indexed");
        self.ensure(i)?;
        Ok(self.buffer.get(i))
    }

    /// `d_1..d_n` as a packed copy.
    pub fn materialize(&mut self, n: usize) -> Result<DigitPrefix, DigitError> {
        self.ensure(n)?;
        Ok(self.buffer.truncated(n))
    }

    /// `x` (or `1 - x` when complemented) as a reduced fraction, when the
    /// spec pins it down; see [`StreamSpec::exact_value`].
    pub fn exact_value(&self) -> Option<(BigUint, BigUint)> {
        let (num, den) = self.spec.exact_value()?;
        if self.complemented {
            Some((&den - num, den))
        } else {
            Some((num, den))
        }
    }

    /// Index of the first `1` at or after `from`, materializing as needed.
    pub fn find_one(&mut self, from: usize) -> Result<usize, DigitError> {
        let from = from.max(1);
        self.ensure(from)?;
        let mut scan = from;
        loop {
            if let Some(i) = self.buffer.next_one_from(scan) {
                return Ok(i);
            }
            let len = self.buffer.len();
            scan = len + 1;
            let mut target = len + len.max(256);
            if let Some(available) = self.available {
                if len >= available {
                    return Err(DigitError::Exhausted { requested: len + 1, available });
                }
                target = target.min(available);
            }
            self.ensure(target)?;
        }
    }

    /// Stream of `1 - x`.
    pub fn complement(&self) -> DigitStream {
        let mut out = self.clone();
        out.complemented = !self.complemented;
        out.buffer = self.buffer.complemented();
        out.run_bit = match self.run_bit {
            2 => 2,
            b => 1 - b,
        };
        out
    }
}

/// `d_i` of `num/den` by modular exponentiation: `d_i = floor(2 * (num * 2^(i-1) mod den) / den)`.
pub fn rational_digit(num: &BigUint, den: &BigUint, i: u64) -> u8 {
    assert!(i >= 1);
    let r = (num * BigUint::from(2u32).modpow(&BigUint::from(i - 1), den)) % den;
    ((r << 1usize) >= *den) as u8
}

/// `(pre-period, period)` of the binary expansion of `num/den` in lowest terms:
/// the pre-period is the 2-adic valuation of `den`, the period the
/// multiplicative order of 2 modulo the odd part.
pub fn rational_period(den: u64) -> Option<(u64, u64)> {
    if den == 0 {
        return None;
    }
    let pre = den.trailing_zeros() as u64;
    let odd = den >> pre;
    if odd == 1 {
        return None;
    }
    let mut k = 1u64;
    let mut acc = 2 % odd;
    while acc != 1 {
        acc = (acc as u128 * 2 % odd as u128) as u64;
        k += 1;
    }
    Some((pre, k))
}
