//! Finite-prefix digit statistics.
//!
//! Nothing here decides normality; the functions report counts, exact
//! frequencies and block-length ratios for a prefix, and callers look at how
//! they move as the prefix grows.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_rational::Ratio;

use crate::blocks::{BlockDecomposition, BlocksError};
use crate::digits::DigitPrefix;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NormalityError {
    /// Counting needs digits through `needed`.
    InsufficientDigits {
        needed: usize,
        available: usize,
    },
    EmptyPattern,
    PatternTooLong {
        len: usize,
        max: usize,
    },
}

impl fmt::Display for NormalityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalityError::InsufficientDigits { needed, available } => {
                write!(f, "need digits through {needed}, have {available}")
            }
            NormalityError::EmptyPattern => f.write_str("pattern is empty"),
            NormalityError::PatternTooLong { len, max } => write!(f, "pattern length {len} exceeds {max}"),
        }
    }
}

impl core::error::Error for NormalityError {}

/// Longest pattern handled by [`pattern_counts`].
pub const MAX_PATTERN_LEN: usize = 20;

fn require(prefix: &DigitPrefix, needed: usize) -> Result<(), NormalityError> {
    if prefix.len() < needed {
        Err(NormalityError::InsufficientDigits { needed, available: prefix.len() })
    } else {
        Ok(())
    }
}

/// Number of `k` in `1..=n` with `d_k .. d_{k+r-1}` equal to `pattern`.
/// Occurrences may overlap.
pub fn pattern_count(prefix: &DigitPrefix, pattern: &[u8], n: usize) -> Result<u64, NormalityError> {
    if pattern.is_empty() {
        return Err(NormalityError::EmptyPattern);
    }
    if pattern.len() > 64 {
        return Err(NormalityError::PatternTooLong { len: pattern.len(), max: 64 });
    }
    let r = pattern.len();
    require(prefix, n + r - 1)?;
    let target = pattern.iter().fold(0u64, |acc, &b| (acc << 1) | (b & 1) as u64);
    Ok((1..=n).filter(|&k| prefix.extract_u64(k, r as u32) == target).count() as u64)
}

/// Counts of every length-`r` pattern, indexed by the pattern read as a
/// binary integer.
pub fn pattern_counts(prefix: &DigitPrefix, r: usize, n: usize) -> Result<Vec<u64>, NormalityError> {
    if r == 0 {
        return Err(NormalityError::EmptyPattern);
    }
    if r > MAX_PATTERN_LEN {
        return Err(NormalityError::PatternTooLong { len: r, max: MAX_PATTERN_LEN });
    }
    require(prefix, n + r - 1)?;
    let mut counts = vec![0u64; 1 << r];
    for k in 1..=n {
        counts[prefix.extract_u64(k, r as u32) as usize] += 1;
    }
    Ok(counts)
}

/// Digit counts over `d_1..d_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencyReport {
    pub n: u64,
    pub zeros: u64,
    pub ones: u64,
}

impl FrequencyReport {
    pub fn freq_zero(&self) -> Ratio<u64> {
        Ratio::new(self.zeros, self.n)
    }

    pub fn freq_one(&self) -> Ratio<u64> {
        Ratio::new(self.ones, self.n)
    }

    /// `|freq(0) - 1/2| = |zeros - ones| / (2n)`.
    pub fn deviation(&self) -> Ratio<u64> {
        Ratio::new(self.zeros.abs_diff(self.ones), 2 * self.n)
    }
}

pub fn digit_frequencies(prefix: &DigitPrefix, n: usize) -> Result<FrequencyReport, NormalityError> {
    assert!(n >= 1, "frequencies need n >= 1");
    require(prefix, n)?;
    let ones = prefix.count_ones(n);
    Ok(FrequencyReport { n: n as u64, zeros: n as u64 - ones, ones })
}

/// `(n, |freq(0, n) - 1/2|)` at each checkpoint.
pub fn frequency_trend(prefix: &DigitPrefix, checkpoints: &[usize]) -> Result<Vec<(u64, Ratio<u64>)>, NormalityError> {
    checkpoints.iter().map(|&n| digit_frequencies(prefix, n).map(|r| (r.n, r.deviation()))).collect()
}

/// True when each deviation is strictly below the one before it.
pub fn strictly_decreasing(trend: &[(u64, Ratio<u64>)]) -> bool {
    trend.windows(2).all(|w| w[1].1 < w[0].1)
}

/// Block-length ratios at block `j`:
/// `ratio_lm = L_j / M_j`, `ratio_l = l_j / L_{j-1}`, `ratio_m = m_j / M_{j-1}`,
/// with `M` summing `m_1, m_2, ...` (not `m_0`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Theorem4Diagnostics {
    pub j: u64,
    pub ratio_lm: Ratio<u64>,
    pub ratio_l: Ratio<u64>,
    pub ratio_m: Ratio<u64>,
}

pub fn theorem4_diagnostics(decomp: &BlockDecomposition, j: u64) -> Result<Theorem4Diagnostics, BlocksError> {
    assert!(j >= 2, "diagnostics need j >= 2");
    decomp.require_blocks(j)?;
    Ok(Theorem4Diagnostics {
        j,
        ratio_lm: Ratio::new(decomp.zeros_sum(j), decomp.ones_sum(j)),
        ratio_l: Ratio::new(decomp.zeros(j), decomp.zeros_sum(j - 1)),
        ratio_m: Ratio::new(decomp.ones(j), decomp.ones_sum(j - 1)),
    })
}
