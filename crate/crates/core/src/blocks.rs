//! Block decomposition `C_0 B_1 C_1 B_2 C_2 ...` of a digit sequence.
//!
//! `B_j` is the j-th run of zeros (length `l_j`), `C_j` the run of ones that
//! follows it (length `m_j`), and `C_0` the possibly empty leading run of
//! ones (length `m_0 = t_0`). Positions follow
//!
//! ```text
//! B_j = d_{t_{j-1}+1} .. d_{s_j},    C_j = d_{s_j+1} .. d_{t_j}
//! J_j = {t_{j-1}+1, .., s_j},        K_j = {s_j+1, .., t_j}
//! ```

use alloc::vec::Vec;
use core::fmt;

use crate::digits::{DigitError, DigitPrefix, DigitStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RegionTag {
    K0,
    J,
    K,
}

impl RegionTag {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionTag::K0 => "K0",
            RegionTag::J => "J",
            RegionTag::K => "K",
        }
    }
}

/// Index set containing a position, with the 1-based offset `q` inside it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Region {
    pub tag: RegionTag,
    /// Block index; 0 for `K0`.
    pub j: u64,
    pub q: u64,
}

impl Region {
    /// `K_0`, `J_1` or `K_1`, where the estimators take their fixed initial value.
    pub fn is_initial(&self) -> bool {
        self.j <= 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BlocksError {
    /// `n` lies past the last complete block (which ends at `covered`).
    OutOfRange { n: u64, covered: u64 },
    /// Fewer than `needed` complete blocks.
    TooFewBlocks { needed: u64, available: u64 },
}

impl fmt::Display for BlocksError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlocksError::OutOfRange { n, covered } => {
                write!(f, "index {n} is beyond the decomposed range 1..={covered}")
            }
            BlocksError::TooFewBlocks { needed, available } => {
                write!(f, "need {needed} complete blocks, have {available}")
            }
        }
    }
}

impl core::error::Error for BlocksError {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockDecomposition {
    m0: u64,
    runs: Vec<(u64, u64)>,
    /// `zeros_cum[j] = l_1 + .. + l_j`, with `zeros_cum[0] = 0`.
    zeros_cum: Vec<u64>,
    /// `ones_cum[j] = m_1 + .. + m_j` (excludes `m_0`).
    ones_cum: Vec<u64>,
    complete: bool,
    trailing_zeros: u64,
}

impl BlockDecomposition {
    /// Builds the decomposition with leading ones-run `m0` and `(l_j, m_j)` pairs.
    ///
    /// Panics if a pair has a zero entry.
    pub fn from_lengths(m0: u64, pairs: &[(u64, u64)]) -> Self {
        let mut d = BlockDecomposition {
            m0,
            runs: Vec::with_capacity(pairs.len()),
            zeros_cum: Vec::with_capacity(pairs.len() + 1),
            ones_cum: Vec::with_capacity(pairs.len() + 1),
            complete: true,
            trailing_zeros: 0,
        };
        d.zeros_cum.push(0);
        d.ones_cum.push(0);
        for &(l, m) in pairs {
            d.push(l, m);
        }
        d
    }

    fn push(&mut self, l: u64, m: u64) {
        assert!(l >= 1 && m >= 1, "block lengths must be positive, got ({l},{m})");
        self.runs.push((l, m));
        self.zeros_cum.push(self.zeros_cum.last().copied().unwrap_or(0) + l);
        self.ones_cum.push(self.ones_cum.last().copied().unwrap_or(0) + m);
    }

    pub fn m0(&self) -> u64 {
        self.m0
    }

    pub fn runs(&self) -> &[(u64, u64)] {
        &self.runs
    }

    /// Number of complete `(B_j, C_j)` pairs.
    pub fn block_count(&self) -> u64 {
        self.runs.len() as u64
    }

    /// False when the prefix ended inside a zero-run (reported by
    /// [`trailing_zeros`](Self::trailing_zeros) and excluded from `runs`).
    pub fn complete(&self) -> bool {
        self.complete
    }

    pub fn trailing_zeros(&self) -> u64 {
        self.trailing_zeros
    }

    /// `l_j`, for `1 <= j <= block_count`.
    pub fn zeros(&self, j: u64) -> u64 {
        self.runs[(j - 1) as usize].0
    }

    /// `m_j`; `m_0` for `j = 0`.
    pub fn ones(&self, j: u64) -> u64 {
        if j == 0 {
            self.m0
        } else {
            self.runs[(j - 1) as usize].1
        }
    }

    /// `l_1 + .. + l_j`.
    pub fn zeros_sum(&self, j: u64) -> u64 {
        self.zeros_cum[j as usize]
    }

    /// `m_1 + .. + m_j`, without `m_0`.
    pub fn ones_sum(&self, j: u64) -> u64 {
        self.ones_cum[j as usize]
    }

    /// `t_j`; `t_0 = m_0`.
    pub fn t(&self, j: u64) -> u64 {
        self.m0 + self.zeros_cum[j as usize] + self.ones_cum[j as usize]
    }

    /// `s_j` for `j >= 1`; `s_0 = 0`.
    pub fn s(&self, j: u64) -> u64 {
        if j == 0 {
            0
        } else {
            self.m0 + self.zeros_cum[j as usize] + self.ones_cum[j as usize - 1]
        }
    }

    /// Last position covered by complete blocks.
    pub fn covered(&self) -> u64 {
        self.t(self.block_count())
    }

    /// The region containing position `n`.
    pub fn locate(&self, n: u64) -> Result<Region, BlocksError> {
        assert!(n >= 1, "positions are 1-based");
        if n <= self.m0 {
            return Ok(Region { tag: RegionTag::K0, j: 0, q: n });
        }
        let covered = self.covered();
        if n > covered {
            return Err(BlocksError::OutOfRange { n, covered });
        }
        // Smallest j >= 1 with t_j >= n.
        let count = self.block_count() as usize;
        let idx = partition_point(count, |i| self.t(i as u64 + 1) < n);
        let j = idx as u64 + 1;
        if n <= self.s(j) {
            Ok(Region { tag: RegionTag::J, j, q: n - self.t(j - 1) })
        } else {
            Ok(Region { tag: RegionTag::K, j, q: n - self.s(j) })
        }
    }

    /// Digits reproducing this decomposition.
    pub fn render_digits(&self) -> DigitPrefix {
        let mut p = DigitPrefix::new();
        for _ in 0..self.m0 {
            p.push(1);
        }
        for &(l, m) in &self.runs {
            for _ in 0..l {
                p.push(0);
            }
            for _ in 0..m {
                p.push(1);
            }
        }
        for _ in 0..self.trailing_zeros {
            p.push(0);
        }
        p
    }

    /// Keeps the first `j` pairs.
    pub fn truncated(&self, j: u64) -> BlockDecomposition {
        let j = j.min(self.block_count()) as usize;
        BlockDecomposition::from_lengths(self.m0, &self.runs[..j])
    }

    pub fn require_blocks(&self, needed: u64) -> Result<(), BlocksError> {
        if self.block_count() < needed {
            Err(BlocksError::TooFewBlocks { needed, available: self.block_count() })
        } else {
            Ok(())
        }
    }
}

fn partition_point(len: usize, mut pred: impl FnMut(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0usize, len);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Decomposes a finite prefix. A zero-run still open at the end is left out
/// of `runs`; a final ones-run is taken at its observed length.
pub fn decompose(prefix: &DigitPrefix) -> BlockDecomposition {
    let len = prefix.len();
    let mut i = 1;
    let mut m0 = 0;
    while i <= len && prefix.get(i) == 1 {
        m0 += 1;
        i += 1;
    }
    let mut d = BlockDecomposition::from_lengths(m0, &[]);
    while i <= len {
        let start = i;
        i = prefix.next_one_from(i).unwrap_or(len + 1);
        let l = (i - start) as u64;
        if i > len {
            d.complete = false;
            d.trailing_zeros = l;
            break;
        }
        let start = i;
        while i <= len && prefix.get(i) == 1 {
            i += 1;
        }
        d.push(l, (i - start) as u64);
    }
    d
}

/// Decomposition of the stream covering at least positions `1..=n`, with every
/// ones-run, including the last, closed by a zero that follows it.
pub fn decompose_stream(stream: &mut DigitStream, n: usize) -> Result<BlockDecomposition, DigitError> {
    let mut end = n.max(1);
    loop {
        stream.ensure(end + 1)?;
        let p = stream.prefix();
        match (p.get(end), p.get(end + 1)) {
            (1, 0) => break,
            (1, 1) => end += 1,
            _ => end = stream.find_one(end + 1)?,
        }
    }
    Ok(decompose(&stream.prefix().truncated(end)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streamspec::parse_spec;
    use alloc::vec;

    fn from_str(bits: &str) -> BlockDecomposition {
        decompose(&DigitPrefix::from_ascii(bits).unwrap())
    }

    #[test]
    fn decompose_examples() {
        let d = from_str("1001110");
        assert_eq!(d.m0(), 1);
        assert_eq!(d.runs(), &[(2, 3)]);
        assert!(!d.complete());
        assert_eq!(d.trailing_zeros(), 1);

        let d = from_str("01");
        assert_eq!(d.m0(), 0);
        assert_eq!(d.runs(), &[(1, 1)]);
        assert!(d.complete());
    }

    #[test]
    fn champernowne_prefix() {
        let mut s = DigitStream::new(parse_spec("champernowne").unwrap()).unwrap();
        let d = decompose(&s.materialize(21).unwrap());
        assert_eq!(d.m0(), 2);
        assert_eq!(d.runs(), &[(1, 3), (2, 1), (1, 3), (1, 4)]);
        assert_eq!(d.trailing_zeros(), 3);
        assert_eq!(d.t(0), 2);
        assert_eq!(d.t(1), 6);
        assert_eq!(d.s(2), 8);
        let r = d.locate(7).unwrap();
        assert_eq!(r, Region { tag: RegionTag::J, j: 2, q: 1 });
    }

    #[test]
    fn locate_examples() {
        let d = BlockDecomposition::from_lengths(0, &[(1, 1), (1, 1), (1, 1)]);
        assert_eq!(d.locate(4).unwrap(), Region { tag: RegionTag::K, j: 2, q: 1 });
        let d = BlockDecomposition::from_lengths(2, &[(1, 3)]);
        assert_eq!(d.locate(1).unwrap(), Region { tag: RegionTag::K0, j: 0, q: 1 });
        assert_eq!(d.locate(3).unwrap(), Region { tag: RegionTag::J, j: 1, q: 1 });
        assert_eq!(d.locate(6).unwrap(), Region { tag: RegionTag::K, j: 1, q: 3 });
        assert_eq!(d.locate(7), Err(BlocksError::OutOfRange { n: 7, covered: 6 }));
    }

    #[test]
    fn from_lengths_renders() {
        assert_eq!(BlockDecomposition::from_lengths(0, &[(1, 1)]).render_digits().to_vec(), vec![0, 1]);
        assert_eq!(BlockDecomposition::from_lengths(2, &[(1, 3)]).render_digits().to_vec(), vec![1, 1, 0, 1, 1, 1]);
        let d = BlockDecomposition::from_lengths(0, &[(3, 2), (1, 1)]);
        assert_eq!(decompose(&d.render_digits()), d);
    }

    #[test]
    fn stream_decomposition_closes_last_block() {
        // 0 1 00 11 000 111 ...: position 4 is inside B_2; the ones-run C_2 ends at 6.
        let mut s = DigitStream::new(parse_spec("blocks:l=j;m=j").unwrap()).unwrap();
        let d = decompose_stream(&mut s, 4).unwrap();
        assert_eq!(d.runs(), &[(1, 1), (2, 2)]);
        assert_eq!(d.covered(), 6);
        // A ones-run ending exactly at n must still be confirmed closed.
        let d = decompose_stream(&mut s, 6).unwrap();
        assert_eq!(d.runs(), &[(1, 1), (2, 2)]);
        let d = decompose_stream(&mut s, 7).unwrap();
        assert_eq!(d.runs(), &[(1, 1), (2, 2), (3, 3)]);
    }

    #[test]
    fn empty_and_all_ones() {
        let d = from_str("111");
        assert_eq!(d.m0(), 3);
        assert_eq!(d.block_count(), 0);
        assert_eq!(d.covered(), 3);
        assert_eq!(d.locate(2).unwrap().tag, RegionTag::K0);
    }
}
