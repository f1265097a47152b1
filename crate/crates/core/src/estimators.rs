//! Block-length estimators for the orbit averages.
//!
//! With `P_j = sum_{u<=j} 2^(p l_u)`, `L_j = sum_{u<=j} l_u` and
//! `M_j = sum_{1<=u<=j} m_u`:
//!
//! ```text
//!            Phi                      Psi                      Upsilon
//! J_j   (P_j+M_{j-1})/(L_j+M_{j-1})   (P_j+M_{j-1})/(L_{j-1}+M_{j-1})   1 + l_j/(L_{j-1}+M_{j-1})
//! K_j   (P_j+M_{j-1})/(L_j+M_j)       (P_j+M_j)/(L_j+M_{j-1})   (1 + m_j/(P_j+M_{j-1}))(1 + m_j/(L_j+M_{j-1}))
//! ```
//!
//! for `j >= 2`, and all three equal 1 on `K_0`, `J_1`, `K_1`. `Lambda` is 1 on
//! `K_0` and `P_j/L_j` on `J_j` and `K_j`.

use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::blocks::{BlockDecomposition, BlocksError, Region, RegionTag};
use crate::dyadic::{Dyadic, DyadicInterval, Rounding};
use crate::orbit::{Exponent, OrbitSumSeries};

/// Largest `p * l_j` (in bits) evaluated with exact rationals.
pub const EXACT_BIT_LIMIT: u64 = 1 << 17;

/// Precision of enclosure-mode estimator values.
pub const ENCLOSURE_PRECISION: u32 = 128;

/// Either an exact rational or a rigorous enclosure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EstimatorValue {
    Exact(BigRational),
    Enclosure(DyadicInterval),
}

impl EstimatorValue {
    fn one() -> Self {
        EstimatorValue::Exact(BigRational::one())
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            EstimatorValue::Exact(r) => Some(r),
            EstimatorValue::Enclosure(_) => None,
        }
    }

    /// Outward-rounded enclosure.
    pub fn enclosure(&self, prec: u32) -> DyadicInterval {
        match self {
            EstimatorValue::Exact(r) => DyadicInterval::from_rational(r, prec),
            EstimatorValue::Enclosure(iv) => iv.clone(),
        }
    }

    /// Upper endpoint of [`enclosure`](Self::enclosure).
    pub fn upper(&self, prec: u32) -> Dyadic {
        match self {
            EstimatorValue::Exact(r) => Dyadic::from_rational(r, prec, Rounding::Up),
            EstimatorValue::Enclosure(iv) => iv.hi().clone(),
        }
    }

    pub fn lower(&self, prec: u32) -> Dyadic {
        match self {
            EstimatorValue::Exact(r) => Dyadic::from_rational(r, prec, Rounding::Down),
            EstimatorValue::Enclosure(iv) => iv.lo().clone(),
        }
    }

    /// Midpoint as `f * 2^e` with `f` in `[1, 2)`, for display.
    pub fn split_log2(&self) -> Option<(i64, f64)> {
        match self {
            EstimatorValue::Exact(r) => Dyadic::from_rational(r, 64, Rounding::Down).split_log2(),
            EstimatorValue::Enclosure(iv) => {
                let mid = &(iv.lo() + iv.hi()) * &Dyadic::pow2(-1);
                mid.split_log2()
            }
        }
    }
}

impl fmt::Display for EstimatorValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorValue::Exact(r) => write!(f, "{r}"),
            EstimatorValue::Enclosure(iv) => write!(f, "[{}, {}]", iv.lo(), iv.hi()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EstimatorError {
    OutOfRange(BlocksError),
    MismatchedCheckpoints,
}

impl From<BlocksError> for EstimatorError {
    fn from(e: BlocksError) -> Self {
        EstimatorError::OutOfRange(e)
    }
}

impl fmt::Display for EstimatorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorError::OutOfRange(e) => e.fmt(f),
            EstimatorError::MismatchedCheckpoints => f.write_str("series and trace checkpoints differ"),
        }
    }
}

impl core::error::Error for EstimatorError {}

#[derive(Clone, Debug)]
enum Powers {
    /// `P_j` as integers.
    Exact(Vec<BigInt>),
    Enclosure(Vec<DyadicInterval>, u32),
}

/// Evaluates the estimators over one decomposition.
#[derive(Clone, Debug)]
pub struct Estimators<'a> {
    decomp: &'a BlockDecomposition,
    p: Exponent,
    powers: Powers,
}

fn rat(n: u64, d: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl<'a> Estimators<'a> {
    /// Exact arithmetic for integer `p` when every `2^(p l_j)` has at most
    /// [`EXACT_BIT_LIMIT`] bits, enclosures otherwise.
    pub fn new(decomp: &'a BlockDecomposition, p: Exponent) -> Self {
        let max_l = decomp.runs().iter().map(|r| r.0).max().unwrap_or(0);
        match p.as_integer() {
            Some(a) if (a as u64).saturating_mul(max_l) <= EXACT_BIT_LIMIT => Self::exact(decomp, p),
            _ => Self::with_precision(decomp, p, ENCLOSURE_PRECISION),
        }
    }

    fn exact(decomp: &'a BlockDecomposition, p: Exponent) -> Self {
        let a = p.as_integer().expect("integer exponent") as usize;
        let mut acc = BigInt::zero();
        let mut powers = Vec::with_capacity(decomp.runs().len() + 1);
        powers.push(acc.clone());
        for &(l, _) in decomp.runs() {
            acc += BigInt::one() << (a * l as usize);
            powers.push(acc.clone());
        }
        Estimators { decomp, p, powers: Powers::Exact(powers) }
    }

    /// Enclosure arithmetic at `prec` bits, for any `p`.
    pub fn with_precision(decomp: &'a BlockDecomposition, p: Exponent, prec: u32) -> Self {
        let mut acc = DyadicInterval::zero();
        let mut powers = Vec::with_capacity(decomp.runs().len() + 1);
        powers.push(acc.clone());
        for &(l, _) in decomp.runs() {
            acc = acc.add_round(&p.pow2(l as i64, prec + 8), prec);
            powers.push(acc.clone());
        }
        Estimators { decomp, p, powers: Powers::Enclosure(powers, prec) }
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn decomposition(&self) -> &BlockDecomposition {
        self.decomp
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.powers, Powers::Exact(_))
    }

    /// `(P_j + a) / b`.
    fn power_ratio(&self, j: u64, a: u64, b: u64) -> EstimatorValue {
        match &self.powers {
            Powers::Exact(pw) => {
                EstimatorValue::Exact(BigRational::new(&pw[j as usize] + BigInt::from(a), BigInt::from(b)))
            }
            Powers::Enclosure(pw, prec) => EstimatorValue::Enclosure(pw[j as usize].add_int(a).div_int(b, *prec)),
        }
    }

    /// `(P_j + a) / (P_j + b)`.
    fn power_quotient(&self, j: u64, a: u64, b: u64) -> EstimatorValue {
        match &self.powers {
            Powers::Exact(pw) => {
                let pj = &pw[j as usize];
                EstimatorValue::Exact(BigRational::new(pj + BigInt::from(a), pj + BigInt::from(b)))
            }
            Powers::Enclosure(pw, prec) => {
                // Decreasing in P_j when a > b.
                let pj = &pw[j as usize];
                let lo_p = DyadicInterval::point(pj.hi().clone());
                let hi_p = DyadicInterval::point(pj.lo().clone());
                let lo = lo_p.add_int(a).div_pos(&lo_p.add_int(b), *prec);
                let hi = hi_p.add_int(a).div_pos(&hi_p.add_int(b), *prec);
                EstimatorValue::Enclosure(DyadicInterval::new(lo.lo().clone(), hi.hi().clone()))
            }
        }
    }

    fn scaled(&self, v: EstimatorValue, r: BigRational) -> EstimatorValue {
        match (v, &self.powers) {
            (EstimatorValue::Exact(x), _) => EstimatorValue::Exact(x * r),
            (EstimatorValue::Enclosure(iv), Powers::Enclosure(_, prec)) => {
                EstimatorValue::Enclosure(iv.mul_nonneg(&DyadicInterval::from_rational(&r, *prec), *prec))
            }
            (EstimatorValue::Enclosure(iv), Powers::Exact(_)) => EstimatorValue::Enclosure(iv),
        }
    }

    fn ratio(&self, a: u64, b: u64) -> EstimatorValue {
        match &self.powers {
            Powers::Exact(_) => EstimatorValue::Exact(rat(a, b)),
            Powers::Enclosure(_, prec) => EstimatorValue::Enclosure(DyadicInterval::from_rational(&rat(a, b), *prec)),
        }
    }

    fn sums(&self, j: u64) -> (u64, u64, u64, u64) {
        let d = self.decomp;
        (d.zeros_sum(j - 1), d.zeros_sum(j), d.ones_sum(j - 1), d.ones_sum(j))
    }

    pub fn locate(&self, n: u64) -> Result<Region, EstimatorError> {
        Ok(self.decomp.locate(n)?)
    }

    pub fn phi_at(&self, r: Region) -> EstimatorValue {
        if r.is_initial() {
            return EstimatorValue::one();
        }
        let (_, lj, mprev, mj) = self.sums(r.j);
        match r.tag {
            RegionTag::J => self.power_ratio(r.j, mprev, lj + mprev),
            _ => self.power_ratio(r.j, mprev, lj + mj),
        }
    }

    pub fn psi_at(&self, r: Region) -> EstimatorValue {
        if r.is_initial() {
            return EstimatorValue::one();
        }
        let (lprev, lj, mprev, mj) = self.sums(r.j);
        match r.tag {
            RegionTag::J => self.power_ratio(r.j, mprev, lprev + mprev),
            _ => self.power_ratio(r.j, mj, lj + mprev),
        }
    }

    pub fn upsilon_at(&self, r: Region) -> EstimatorValue {
        if r.is_initial() {
            return EstimatorValue::one();
        }
        let (lprev, lj, mprev, mj) = self.sums(r.j);
        match r.tag {
            RegionTag::J => self.ratio(lprev + mprev + self.decomp.zeros(r.j), lprev + mprev),
            _ => {
                let first = self.power_quotient(r.j, mj, mprev);
                self.scaled(first, rat(lj + mj, lj + mprev))
            }
        }
    }

    pub fn lambda_at(&self, r: Region) -> EstimatorValue {
        if r.tag == RegionTag::K0 {
            return EstimatorValue::one();
        }
        self.power_ratio(r.j, 0, self.decomp.zeros_sum(r.j))
    }

    pub fn phi(&self, n: u64) -> Result<EstimatorValue, EstimatorError> {
        Ok(self.phi_at(self.locate(n)?))
    }

    pub fn psi(&self, n: u64) -> Result<EstimatorValue, EstimatorError> {
        Ok(self.psi_at(self.locate(n)?))
    }

    pub fn upsilon(&self, n: u64) -> Result<EstimatorValue, EstimatorError> {
        Ok(self.upsilon_at(self.locate(n)?))
    }

    pub fn lambda(&self, n: u64) -> Result<EstimatorValue, EstimatorError> {
        Ok(self.lambda_at(self.locate(n)?))
    }

    /// Estimator values at each of `points`, evaluated once per region.
    pub fn trace(&self, points: &[u64]) -> Result<EstimatorTrace, EstimatorError> {
        let mut entries: Vec<TraceEntry> = Vec::with_capacity(points.len());
        for &n in points {
            let region = self.locate(n)?;
            let entry = match entries.last() {
                Some(prev) if prev.region.tag == region.tag && prev.region.j == region.j => {
                    TraceEntry { n, region, ..prev.clone() }
                }
                _ => TraceEntry {
                    n,
                    region,
                    phi: self.phi_at(region),
                    psi: self.psi_at(region),
                    upsilon: self.upsilon_at(region),
                    lambda: self.lambda_at(region),
                },
            };
            entries.push(entry);
        }
        Ok(EstimatorTrace { p: self.p, entries })
    }
}

pub fn phi(decomp: &BlockDecomposition, p: Exponent, n: u64) -> Result<EstimatorValue, EstimatorError> {
    Estimators::new(decomp, p).phi(n)
}

pub fn psi(decomp: &BlockDecomposition, p: Exponent, n: u64) -> Result<EstimatorValue, EstimatorError> {
    Estimators::new(decomp, p).psi(n)
}

pub fn upsilon(decomp: &BlockDecomposition, p: Exponent, n: u64) -> Result<EstimatorValue, EstimatorError> {
    Estimators::new(decomp, p).upsilon(n)
}

pub fn lambda_fn(decomp: &BlockDecomposition, p: Exponent, n: u64) -> Result<EstimatorValue, EstimatorError> {
    Estimators::new(decomp, p).lambda(n)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub n: u64,
    pub region: Region,
    pub phi: EstimatorValue,
    pub psi: EstimatorValue,
    pub upsilon: EstimatorValue,
    pub lambda: EstimatorValue,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EstimatorTrace {
    pub p: Exponent,
    pub entries: Vec<TraceEntry>,
}

impl EstimatorTrace {
    /// Upper bound on `Upsilon` over the trace.
    pub fn max_upsilon(&self, prec: u32) -> Option<Dyadic> {
        self.entries.iter().map(|e| e.upsilon.upper(prec)).max()
    }
}

/// Value and attaining index of the block-growth supremum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssumptionSup {
    pub value: BigRational,
    pub argmax: u64,
}

/// `max_{2<=j<=j_max} max(l_j/(L_{j-1}+M_{j-1}), m_j/(L_j+M_{j-1}))`; ties keep the
/// smallest `j`.
pub fn assumption_sup(decomp: &BlockDecomposition, j_max: u64) -> Result<AssumptionSup, EstimatorError> {
    assert!(j_max >= 2, "assumption_sup needs j_max >= 2");
    decomp.require_blocks(j_max)?;
    let mut best: Option<AssumptionSup> = None;
    for j in 2..=j_max {
        let (lprev, lj, mprev) = (decomp.zeros_sum(j - 1), decomp.zeros_sum(j), decomp.ones_sum(j - 1));
        let a = rat(decomp.zeros(j), lprev + mprev);
        let b = rat(decomp.ones(j), lj + mprev);
        let v = if b > a { b } else { a };
        if best.as_ref().is_none_or(|cur| v > cur.value) {
            best = Some(AssumptionSup { value: v, argmax: j });
        }
    }
    Ok(best.expect("j_max >= 2"))
}

/// Bound on `Upsilon` past `K_1` implied by the block-growth constant `c`:
/// `(1 + max(1, 1/p) c) (1 + c)`, using `2^(p l) >= p l`.
pub fn upsilon_bound(c: &BigRational, p: Exponent) -> BigRational {
    let inv_p = BigRational::new(BigInt::from(p.den()), BigInt::from(p.num()));
    let factor = if inv_p > BigRational::one() { inv_p } else { BigRational::one() };
    (BigRational::one() + factor * c) * (BigRational::one() + c)
}

/// Extremal ratios of the averages to the estimators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SandwichRatios {
    /// Lower bound on `inf A/Phi`.
    pub inf_a_over_phi: Dyadic,
    /// Upper bound on `sup A/Psi`.
    pub sup_a_over_psi: Dyadic,
    /// Upper bound on `sup A/Phi`.
    pub sup_a_over_phi: Dyadic,
    /// Checkpoints that entered the extrema.
    pub count: usize,
}

pub const RATIO_PRECISION: u32 = 64;

fn paired<'s>(
    series: &'s OrbitSumSeries,
    trace: &'s EstimatorTrace,
    include_initial: bool,
) -> Result<impl Iterator<Item = (&'s DyadicInterval, &'s TraceEntry)>, EstimatorError> {
    if series.points.len() != trace.entries.len() || series.points.iter().zip(&trace.entries).any(|(a, b)| a.n != b.n) {
        return Err(EstimatorError::MismatchedCheckpoints);
    }
    Ok(series
        .points
        .iter()
        .zip(&trace.entries)
        .filter(move |(_, e)| include_initial || !e.region.is_initial())
        .map(|(pt, e)| (&pt.avg, e)))
}

/// Outward-rounded `inf A/Phi`, `sup A/Psi`, `sup A/Phi` over shared checkpoints.
/// Checkpoints in `K_0`, `J_1`, `K_1` are skipped unless `include_initial`.
/// `None` when no checkpoint qualifies.
pub fn sandwich_ratios(
    series: &OrbitSumSeries,
    trace: &EstimatorTrace,
    include_initial: bool,
) -> Result<Option<SandwichRatios>, EstimatorError> {
    let prec = RATIO_PRECISION;
    let mut out: Option<SandwichRatios> = None;
    for (avg, e) in paired(series, trace, include_initial)? {
        let phi_lo = e.phi.lower(prec);
        let phi_hi = e.phi.upper(prec);
        let psi_lo = e.psi.lower(prec);
        let inf_phi = Dyadic::div_round(avg.lo(), &phi_hi, prec, Rounding::Down);
        let sup_psi = Dyadic::div_round(avg.hi(), &psi_lo, prec, Rounding::Up);
        let sup_phi = Dyadic::div_round(avg.hi(), &phi_lo, prec, Rounding::Up);
        out = Some(match out {
            None => {
                SandwichRatios { inf_a_over_phi: inf_phi, sup_a_over_psi: sup_psi, sup_a_over_phi: sup_phi, count: 1 }
            }
            Some(acc) => SandwichRatios {
                inf_a_over_phi: acc.inf_a_over_phi.min(inf_phi),
                sup_a_over_psi: acc.sup_a_over_psi.max(sup_psi),
                sup_a_over_phi: acc.sup_a_over_phi.max(sup_phi),
                count: acc.count + 1,
            },
        });
    }
    Ok(out)
}

/// `[min A/Lambda, max A/Lambda]`, outward rounded, with the same checkpoint
/// filtering as [`sandwich_ratios`].
pub fn lambda_ratio_window(
    series: &OrbitSumSeries,
    trace: &EstimatorTrace,
    include_initial: bool,
) -> Result<Option<DyadicInterval>, EstimatorError> {
    let prec = RATIO_PRECISION;
    let mut window: Option<(Dyadic, Dyadic)> = None;
    for (avg, e) in paired(series, trace, include_initial)? {
        let lo = Dyadic::div_round(avg.lo(), &e.lambda.upper(prec), prec, Rounding::Down);
        let hi = Dyadic::div_round(avg.hi(), &e.lambda.lower(prec), prec, Rounding::Up);
        window = Some(match window {
            None => (lo, hi),
            Some((a, b)) => (a.min(lo), b.max(hi)),
        });
    }
    Ok(window.map(|(lo, hi)| DyadicInterval::new(lo, hi)))
}
