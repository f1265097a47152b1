//! Machine checks of the block-sum inequalities on a single stream.
//!
//! Each check walks the orbit of one stream up to `n_max`, compares the
//! enclosures against the bounds and returns a [`CheckReport`]. Margins are
//! relative: `(bound - value) / bound` for upper bounds, `(value - bound) / bound`
//! for lower bounds, so a negative margin marks a violation.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::blocks::{decompose_stream, BlockDecomposition, Region, RegionTag};
use crate::digits::{DigitError, DigitStream};
use crate::dyadic::{Dyadic, DyadicInterval, Rounding};
use crate::estimators::{
    assumption_sup, lambda_ratio_window, sandwich_ratios, upsilon_bound, EstimatorError, EstimatorTrace, Estimators,
    SandwichRatios,
};
use crate::orbit::{prefix_sums_at, schedule_points, OrbitConfig, OrbitError, OrbitSumSeries, Schedule, TermWalker};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckError {
    Orbit(OrbitError),
    Estimator(EstimatorError),
}

impl From<OrbitError> for CheckError {
    fn from(e: OrbitError) -> Self {
        CheckError::Orbit(e)
    }
}

impl From<DigitError> for CheckError {
    fn from(e: DigitError) -> Self {
        CheckError::Orbit(OrbitError::Digit(e))
    }
}

impl From<EstimatorError> for CheckError {
    fn from(e: EstimatorError) -> Self {
        CheckError::Estimator(e)
    }
}

impl fmt::Display for CheckError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckError::Orbit(e) => e.fmt(f),
            CheckError::Estimator(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for CheckError {}

/// A named number reported alongside a check.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub n_min: u64,
    pub n_max: u64,
    /// Individual inequalities evaluated.
    pub checked: u64,
    pub violations: u64,
    /// Smallest relative margin seen; `None` when nothing was checked.
    pub worst_margin: Option<f64>,
    pub first_violation: Option<u64>,
    pub pass: bool,
    pub metrics: Vec<Metric>,
}

impl CheckReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.value)
    }
}

#[derive(Default)]
struct Tally {
    checked: u64,
    violations: u64,
    worst: Option<f64>,
    first: Option<u64>,
}

impl Tally {
    fn record(&mut self, n: u64, margin: f64, violated: bool) {
        self.checked += 1;
        if violated {
            self.violations += 1;
            self.first.get_or_insert(n);
        }
        self.worst = Some(self.worst.map_or(margin, |w| w.min(margin)));
    }

    /// `value <= bound`.
    fn upper(&mut self, n: u64, value: &Dyadic, bound: &Dyadic) {
        self.record(n, relative(&(bound - value), bound), value > bound);
    }

    /// `value >= bound`.
    fn lower(&mut self, n: u64, value: &Dyadic, bound: &Dyadic) {
        self.record(n, relative(&(value - bound), bound), value < bound);
    }

    /// `value > bound`.
    fn strictly_above(&mut self, n: u64, value: &Dyadic, bound: &Dyadic) {
        self.record(n, relative(&(value - bound), bound), value <= bound);
    }

    fn finish(self, name: &str, n_min: u64, n_max: u64, metrics: Vec<Metric>) -> CheckReport {
        CheckReport {
            name: name.to_string(),
            n_min,
            n_max,
            checked: self.checked,
            violations: self.violations,
            worst_margin: self.worst,
            first_violation: self.first,
            pass: self.violations == 0,
            metrics,
        }
    }
}

fn relative(diff: &Dyadic, bound: &Dyadic) -> f64 {
    if bound.is_zero() {
        return if diff.is_negative() { -1.0 } else { 0.0 };
    }
    let r = Dyadic::div_round(diff, &bound.abs(), 53, Rounding::Down).to_f64();
    r.clamp(-1e308, 1e308)
}

fn metric(name: &'static str, value: f64) -> Metric {
    Metric { name, value }
}

/// Decomposition covering `1..=n_max`, with the last block confirmed closed.
pub fn covering_decomposition(stream: &mut DigitStream, n_max: u64) -> Result<BlockDecomposition, CheckError> {
    Ok(decompose_stream(stream, n_max as usize)?)
}

/// Partial sums over each closed block within `1..=n_max`:
/// zero-blocks of length `l` sum into `[2^(pl), C* 2^(pl)]`, and the first `r`
/// terms of a ones-block of length `m` sum into `[r, 2^p m]`.
pub fn verify_lemma_bounds(stream: &mut DigitStream, cfg: &OrbitConfig, n_max: u64) -> Result<CheckReport, CheckError> {
    let decomp = covering_decomposition(stream, n_max)?;
    let p = cfg.p;
    let prec = cfg.sum_precision(n_max);
    let tprec = cfg.term_precision();
    let c_star = p.block_constant(tprec);
    let two_p = p.pow2(1, tprec);
    let mut walker = TermWalker::reciprocal(stream, *cfg);
    let mut tally = Tally::default();
    let (mut zero_blocks, mut one_blocks) = (0u64, 0u64);
    'blocks: for j in 0..=decomp.block_count() {
        if j >= 1 {
            let (start, end) = (decomp.t(j - 1) + 1, decomp.s(j));
            let mut sum = DyadicInterval::zero();
            for _ in start..=end.min(n_max) {
                sum = sum.add_round(&walker.next_term()?, prec);
            }
            if end > n_max {
                break 'blocks;
            }
            let pow = p.pow2(decomp.zeros(j) as i64, tprec);
            tally.lower(end, sum.lo(), pow.lo());
            tally.upper(end, sum.hi(), &(c_star.hi() * pow.hi()));
            zero_blocks += 1;
        }
        let (start, end) = (decomp.s(j) + 1, decomp.t(j));
        let m = decomp.ones(j);
        let cap = two_p.hi().mul_int(m);
        let mut sum = DyadicInterval::zero();
        for k in start..=end.min(n_max) {
            sum = sum.add_round(&walker.next_term()?, prec);
            tally.lower(k, sum.lo(), &Dyadic::from_int(k - start + 1));
            tally.upper(k, sum.hi(), &cap);
        }
        if m > 0 {
            one_blocks += 1;
        }
        if end >= n_max {
            break;
        }
    }
    let metrics = alloc::vec![metric("zero_blocks", zero_blocks as f64), metric("one_blocks", one_blocks as f64)];
    Ok(tally.finish("lemma_bounds", 1, n_max, metrics))
}

/// Everything the checkpoint-based checks share: the covering decomposition,
/// the prefix sums on a schedule and the estimator trace at the same points.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub cfg: OrbitConfig,
    pub n_max: u64,
    pub decomp: BlockDecomposition,
    pub series: OrbitSumSeries,
    pub trace: EstimatorTrace,
}

impl Analysis {
    pub fn run(
        stream: &mut DigitStream,
        cfg: &OrbitConfig,
        n_max: u64,
        schedule: Schedule,
    ) -> Result<Self, CheckError> {
        assert!(n_max >= 1, "n_max must be positive");
        let decomp = covering_decomposition(stream, n_max)?;
        let points = schedule_points(schedule, n_max, Some(&decomp));
        let series = prefix_sums_at(stream, cfg, &points)?;
        let trace = Estimators::new(&decomp, cfg.p).trace(&points)?;
        Ok(Analysis { cfg: *cfg, n_max, decomp, series, trace })
    }

    /// `P_j = sum_{u<=j} 2^(p l_u)` for `j = 0..=J`, at `prec` bits.
    fn power_sums(&self, prec: u32) -> Vec<DyadicInterval> {
        let mut acc = DyadicInterval::zero();
        let mut out = Vec::with_capacity(self.decomp.runs().len() + 1);
        out.push(acc.clone());
        for &(l, _) in self.decomp.runs() {
            acc = acc.add_round(&self.cfg.p.pow2(l as i64, prec + 8), prec);
            out.push(acc.clone());
        }
        out
    }

    fn regions(&self) -> impl Iterator<Item = (&crate::orbit::SeriesPoint, Region)> + '_ {
        self.series.points.iter().zip(&self.trace.entries).map(|(pt, e)| (pt, e.region))
    }
}

/// At each checkpoint `n` in `J_j` or `K_j` (`j >= 1`), with
/// `B = sum_{u<=j} 2^(p l_u) + sum_{u=0}^{j-1} m_u`:
/// `B <= S(n)` and `S(n) <= C* (B + [n in K_j] m_j)`. A checkpoint violates
/// only when the enclosure lies entirely on the wrong side.
pub fn verify_prefix_inequalities(analysis: &Analysis) -> CheckReport {
    let d = &analysis.decomp;
    let prec = analysis.cfg.sum_precision(analysis.n_max);
    let powers = analysis.power_sums(prec);
    let c_star = analysis.cfg.p.block_constant(prec);
    let mut tally = Tally::default();
    for (pt, region) in analysis.regions() {
        if region.tag == RegionTag::K0 {
            continue;
        }
        let j = region.j;
        let base = powers[j as usize].add_int(d.m0() + d.ones_sum(j - 1));
        let top = if region.tag == RegionTag::K { base.add_int(d.ones(j)) } else { base.clone() };
        let upper = c_star.hi() * top.hi();
        tally.lower(pt.n, pt.sum.hi(), base.lo());
        tally.upper(pt.n, pt.sum.lo(), &upper);
    }
    let metrics = alloc::vec![metric("checkpoints", analysis.series.points.len() as f64)];
    tally.finish("prefix_inequalities", 1, analysis.n_max, metrics)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichOptions {
    /// Also use checkpoints in `K_0`, `J_1`, `K_1`.
    pub include_initial: bool,
    /// Allowed relative excess of `sup A/Psi` over `C*`, in percent.
    pub slack_percent: u32,
}

impl Default for SandwichOptions {
    fn default() -> Self {
        SandwichOptions { include_initial: false, slack_percent: 1 }
    }
}

/// `A/Phi > 0` and `A/Psi <= C* (1 + slack)` at every qualifying checkpoint.
pub fn verify_sandwich(
    analysis: &Analysis,
    opts: SandwichOptions,
) -> Result<(CheckReport, Option<SandwichRatios>), CheckError> {
    let prec = crate::estimators::RATIO_PRECISION;
    let c_star = analysis.cfg.p.block_constant(prec);
    let bound = Dyadic::div_round(
        &c_star.hi().mul_int(100 + opts.slack_percent as u64),
        &Dyadic::from_int(100),
        prec,
        Rounding::Up,
    );
    let ratios = sandwich_ratios(&analysis.series, &analysis.trace, opts.include_initial)?;
    let mut tally = Tally::default();
    for (pt, e) in analysis.series.points.iter().zip(&analysis.trace.entries) {
        if !opts.include_initial && e.region.is_initial() {
            continue;
        }
        let low = Dyadic::div_round(pt.avg.lo(), &e.phi.upper(prec), prec, Rounding::Down);
        let high = Dyadic::div_round(pt.avg.hi(), &e.psi.lower(prec), prec, Rounding::Up);
        tally.upper(pt.n, &high, &bound);
        if !low.is_positive() {
            tally.record(pt.n, -1.0, true);
        }
    }
    let mut metrics = alloc::vec![metric("c_star", c_star.hi().to_f64()), metric("bound", bound.to_f64())];
    if let Some(r) = &ratios {
        metrics.push(metric("inf_a_over_phi", r.inf_a_over_phi.to_f64()));
        metrics.push(metric("sup_a_over_psi", r.sup_a_over_psi.to_f64()));
        metrics.push(metric("sup_a_over_phi", r.sup_a_over_phi.to_f64()));
    }
    Ok((tally.finish("sandwich", 1, analysis.n_max, metrics), ratios))
}

/// `A/Lambda` stays in a window with a positive lower end.
pub fn verify_lambda_equivalence(
    analysis: &Analysis,
    include_initial: bool,
) -> Result<(CheckReport, Option<DyadicInterval>), CheckError> {
    let window = lambda_ratio_window(&analysis.series, &analysis.trace, include_initial)?;
    let mut tally = Tally::default();
    let mut metrics = Vec::new();
    if let Some(w) = &window {
        tally.record(analysis.n_max, w.lo().to_f64(), !w.lo().is_positive());
        metrics.push(metric("r_min", w.lo().to_f64()));
        metrics.push(metric("r_max", w.hi().to_f64()));
    }
    Ok((tally.finish("lambda_equivalence", 1, analysis.n_max, metrics), window))
}

/// Largest `Upsilon` past `K_1` against `(1 + max(1, 1/p) C)(1 + C)`, where `C` is
/// the block-growth supremum over the blocks that reach into `1..=n_max`.
pub fn verify_upsilon_bound(analysis: &Analysis) -> Result<CheckReport, CheckError> {
    let d = &analysis.decomp;
    let j_max = d.locate(analysis.n_max).map_err(EstimatorError::from)?.j;
    let mut tally = Tally::default();
    let mut metrics = Vec::new();
    if j_max >= 2 {
        let sup = assumption_sup(d, j_max)?;
        let bound = upsilon_bound(&sup.value, analysis.cfg.p);
        let prec = crate::estimators::RATIO_PRECISION;
        let bound_hi = Dyadic::from_rational(&bound, prec, Rounding::Up);
        for e in &analysis.trace.entries {
            if !e.region.is_initial() {
                tally.upper(e.n, &e.upsilon.upper(prec), &bound_hi);
            }
        }
        metrics.push(metric("assumption_sup", ratio_f64(&sup.value)));
        metrics.push(metric("assumption_argmax", sup.argmax as f64));
        metrics.push(metric("upsilon_bound", ratio_f64(&bound)));
        if let Some(max) = analysis.trace.max_upsilon(prec) {
            metrics.push(metric("upsilon_max", max.to_f64()));
        }
    }
    Ok(tally.finish("upsilon_bound", 1, analysis.n_max, metrics))
}

fn ratio_f64(r: &BigRational) -> f64 {
    Dyadic::from_rational(r, 64, Rounding::Down).to_f64()
}

/// `sum_{k<=n} f^{k-1}(x)^p <= n` at each point of the schedule.
pub fn verify_dual_bound(
    stream: &mut DigitStream,
    cfg: &OrbitConfig,
    n_max: u64,
    schedule: Schedule,
) -> Result<CheckReport, CheckError> {
    let decomp = match schedule {
        Schedule::Blocks => Some(covering_decomposition(stream, n_max)?),
        _ => None,
    };
    let points = schedule_points(schedule, n_max, decomp.as_ref());
    let series = crate::orbit::dual_prefix_sums_at(stream, cfg, &points)?;
    let mut tally = Tally::default();
    for pt in &series.points {
        tally.upper(pt.n, pt.sum.hi(), &Dyadic::from_int(pt.n));
    }
    let metrics = alloc::vec![metric("checkpoints", series.points.len() as f64)];
    Ok(tally.finish("dual_bound", 1, n_max, metrics))
}

/// `A(n)` strictly increases across `decades`: the lower end at each point
/// exceeds the upper end at the one before.
pub fn verify_theorem3_divergence(
    stream: &mut DigitStream,
    cfg: &OrbitConfig,
    decades: &[u64],
) -> Result<CheckReport, CheckError> {
    let series = prefix_sums_at(stream, cfg, decades)?;
    let mut tally = Tally::default();
    for w in series.points.windows(2) {
        tally.strictly_above(w[1].n, w[1].avg.lo(), w[0].avg.hi());
    }
    let metrics = series
        .points
        .iter()
        .take(8)
        .zip(["a_1", "a_2", "a_3", "a_4", "a_5", "a_6", "a_7", "a_8"])
        .map(|(pt, name)| metric(name, pt.avg.hi().to_f64()))
        .collect();
    let n_min = decades.first().copied().unwrap_or(0);
    Ok(tally.finish("divergence", n_min, decades.last().copied().unwrap_or(0), metrics))
}

/// Result of the bounded-average check.
#[derive(Clone, Debug, PartialEq)]
pub struct Boundedness {
    pub report: CheckReport,
    /// Upper bound on `max_{n <= n_max} A(n)`.
    pub sup_avg: Dyadic,
    /// Largest block length in range.
    pub max_block: u64,
    /// Every block in range has `l_j = m_j`.
    pub equal_pairs: bool,
}

/// `A(n) <= c` for every `n <= n_max`, and `Lambda(n) <= 2^(pK)` with `K` the
/// largest block length in range. Without `c` the bound `C* (2^(pK) + 1)`
/// is used, which holds for streams with `l_j = m_j <= K`.
pub fn verify_theorem6_boundedness(
    stream: &mut DigitStream,
    cfg: &OrbitConfig,
    n_max: u64,
    c: Option<&BigRational>,
) -> Result<Boundedness, CheckError> {
    let decomp = covering_decomposition(stream, n_max)?;
    let p = cfg.p;
    let j_last = decomp.locate(n_max).map_err(EstimatorError::from)?.j;
    let in_range = &decomp.runs()[..j_last as usize];
    let max_block = in_range.iter().map(|&(l, m)| l.max(m)).max().unwrap_or(0).max(decomp.m0());
    let equal_pairs = in_range.iter().all(|&(l, m)| l == m);
    let prec = cfg.sum_precision(n_max);
    let lambda_cap = p.pow2(max_block as i64, prec);
    let c_hi = match c {
        Some(c) => Dyadic::from_rational(c, prec, Rounding::Up),
        None => p.block_constant(prec).hi() * lambda_cap.add_int(1).hi(),
    };

    let mut tally = Tally::default();
    let mut walker = TermWalker::reciprocal(stream, *cfg);
    let mut sum = DyadicInterval::zero();
    let mut sup_avg = Dyadic::zero();
    for n in 1..=n_max {
        sum = sum.add_round(&walker.next_term()?, prec);
        let avg_hi = Dyadic::div_round(sum.hi(), &Dyadic::from_int(n), prec, Rounding::Up);
        tally.upper(n, &avg_hi, &c_hi);
        sup_avg = sup_avg.max(avg_hi);
    }

    let est = Estimators::new(&decomp, p);
    let mut lambda_max = Dyadic::zero();
    for j in 1..=j_last {
        let lam = est.lambda_at(Region { tag: RegionTag::J, j, q: 1 }).upper(prec);
        tally.upper(decomp.t(j - 1) + 1, &lam, lambda_cap.hi());
        lambda_max = lambda_max.max(lam);
    }

    let metrics = alloc::vec![
        metric("sup_avg", sup_avg.to_f64()),
        metric("c", c_hi.to_f64()),
        metric("max_block", max_block as f64),
        metric("equal_pairs", equal_pairs as u8 as f64),
        metric("lambda_max", lambda_max.to_f64()),
        metric("lambda_cap", lambda_cap.hi().to_f64()),
    ];
    Ok(Boundedness { report: tally.finish("boundedness", 1, n_max, metrics), sup_avg, max_block, equal_pairs })
}

/// `c` as an exact rational.
pub fn bound_from_int(c: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::Exponent;
    use crate::streamspec::parse_spec;

    fn stream(text: &str) -> DigitStream {
        DigitStream::new(parse_spec(text).unwrap()).unwrap()
    }

    fn cfg(p: &str) -> OrbitConfig {
        OrbitConfig::new(p.parse::<Exponent>().unwrap())
    }

    #[test]
    fn lemma_bounds_small_corpus() {
        for (spec, p) in [
            ("blocks:cycle=[(3,2)]", "1"),
            ("blocks:cycle=[(1,1)]", "2"),
            ("rational:1/5", "2"),
            ("champernowne", "3/2"),
        ] {
            let r = verify_lemma_bounds(&mut stream(spec), &cfg(p), 1000).unwrap();
            assert!(r.pass, "{spec} p={p}: {r:?}");
            assert!(r.checked > 0);
            assert!(r.worst_margin.unwrap() >= 0.0);
        }
    }

    #[test]
    fn lemma_bounds_catch_a_wrong_constant() {
        // A block sum of exactly 2^(pl) would sit on the lower bound; check the
        // tally logic on synthetic values instead of a stream.
        let mut t = Tally::default();
        t.lower(5, &Dyadic::from_int(7), &Dyadic::from_int(8));
        t.upper(6, &Dyadic::from_int(3), &Dyadic::from_int(4));
        let r = t.finish("x", 1, 6, Vec::new());
        assert_eq!((r.violations, r.first_violation, r.pass), (1, Some(5), false));
        assert!(r.worst_margin.unwrap() < 0.0);
    }

    #[test]
    fn prefix_and_sandwich_on_cycle() {
        let mut s = stream("blocks:cycle=[(2,3)]");
        let a = Analysis::run(&mut s, &cfg("2"), 2000, Schedule::Blocks).unwrap();
        let r = verify_prefix_inequalities(&a);
        assert!(r.pass, "{r:?}");
        let (r, ratios) = verify_sandwich(&a, SandwichOptions::default()).unwrap();
        assert!(r.pass, "{r:?}");
        let ratios = ratios.unwrap();
        assert!(ratios.inf_a_over_phi.is_positive());
        assert!(ratios.sup_a_over_psi <= Dyadic::from_int(6));
    }

    #[test]
    fn prefix_lower_bound_at_third_block() {
        // cycle (1,1), p=1: at n in J_3 the lower bound is 3*2 + 2 = 8.
        let mut s = stream("blocks:cycle=[(1,1)]");
        let a = Analysis::run(&mut s, &cfg("1"), 6, Schedule::All).unwrap();
        let pt = a.series.at(5).unwrap();
        assert!(pt.sum.lo() >= &Dyadic::from_int(8));
        assert!(verify_prefix_inequalities(&a).pass);
    }

    #[test]
    fn dual_and_divergence() {
        let r = verify_dual_bound(&mut stream("champernowne"), &cfg("2"), 3000, Schedule::Blocks).unwrap();
        assert!(r.pass);
        let r = verify_theorem3_divergence(&mut stream("champernowne"), &cfg("2"), &[100, 1000, 10000]).unwrap();
        assert!(r.pass, "{r:?}");
        let r =
            verify_theorem3_divergence(&mut stream("blocks:cycle=[(1,1)]"), &cfg("2"), &[100, 1000, 10000]).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn boundedness_of_alternating_stream() {
        let b =
            verify_theorem6_boundedness(&mut stream("blocks:cycle=[(1,1)]"), &cfg("2"), 1000, Some(&bound_from_int(9)))
                .unwrap();
        assert!(b.report.pass, "{:?}", b.report);
        assert_eq!(b.sup_avg, Dyadic::from_int(9));
        assert!(b.equal_pairs);
        let b = verify_theorem6_boundedness(&mut stream("blocks:cycle=[(3,3)]"), &cfg("2"), 1000, None).unwrap();
        assert!(b.report.pass);
        assert_eq!(b.report.metric("lambda_max"), Some(64.0 / 3.0));
        assert_eq!(b.report.metric("lambda_cap"), Some(64.0));
    }

    #[test]
    fn upsilon_and_lambda_reports() {
        let mut s = stream("blocks:l=j;m=j");
        let a = Analysis::run(&mut s, &cfg("2"), 3000, Schedule::Blocks).unwrap();
        let r = verify_upsilon_bound(&a).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.metric("assumption_sup"), Some(1.0));
        let (r, w) = verify_lambda_equivalence(&a, false).unwrap();
        assert!(r.pass);
        assert!(w.unwrap().lo().is_positive());
    }
}
