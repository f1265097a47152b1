use binorbit_core::blocks::{decompose, decompose_stream, BlockDecomposition, RegionTag};
use binorbit_core::digits::{BlockLengths, DigitPrefix, DigitStream};
use binorbit_core::estimators::Estimators;
use binorbit_core::normality::{digit_frequencies, pattern_count, theorem4_diagnostics};
use binorbit_core::orbit::{dual_prefix_sums, prefix_sums, Exponent, OrbitConfig, Schedule};
use binorbit_core::streamspec::{parse_spec, validate_spec, StreamSpec};
use num_bigint::BigUint;
use proptest::prelude::*;

fn stream(spec: &StreamSpec) -> DigitStream {
    DigitStream::new(spec.clone()).unwrap()
}

fn arb_pairs() -> impl Strategy<Value = Vec<(u64, u64)>> {
    prop::collection::vec((1u64..8, 1u64..8), 1..6)
}

fn arb_spec() -> impl Strategy<Value = StreamSpec> {
    prop_oneof![
        (1u64..200, 2u64..200).prop_filter_map("proper fraction", |(a, b)| {
            let s = StreamSpec::rational(a, b);
            (a < b && validate_spec(&s).ok).then_some(s)
        }),
        Just(StreamSpec::Champernowne),
        (arb_pairs(), 0u64..4).prop_map(|(pairs, m0)| StreamSpec::BlockCycle { pairs, m0 }),
        (any::<u64>(), 1u64..12).prop_map(|(seed, lmax)| StreamSpec::RandomBlocks { seed, lmax }),
        (1u64..4, 1u64..4).prop_map(|(a, b)| parse_spec(&format!("blocks:l={a}*j;m=j+{b}")).unwrap()),
    ]
}

fn arb_p() -> impl Strategy<Value = Exponent> {
    prop_oneof![
        Just(Exponent::integer(1)),
        Just(Exponent::integer(2)),
        Just(Exponent::new(3, 2).unwrap()),
        Just(Exponent::new(1, 3).unwrap())
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parse_render_identity(spec in arb_spec()) {
        let text = spec.to_string();
        prop_assert_eq!(parse_spec(&text).unwrap(), spec);
    }

    #[test]
    fn valid_specs_have_bounded_runs(spec in arb_spec()) {
        prop_assume!(validate_spec(&spec).ok);
        let prefix = stream(&spec).materialize(400).unwrap();
        let d = decompose(&prefix);
        let max_run = d.runs().iter().map(|&(l, m)| l.max(m)).max().unwrap_or(0);
        prop_assert!(max_run < 400 / 2);
    }

    #[test]
    fn shift_identity(a in 1u64..500, b in 2u64..500, k in 0usize..100) {
        prop_assume!(a < b && validate_spec(&StreamSpec::rational(a, b)).ok);
        let prefix = stream(&StreamSpec::rational(a, b)).materialize(300).unwrap();
        let shifted_value = (BigUint::from(a) << k) % BigUint::from(b);
        let shifted_value: u64 = shifted_value.try_into().unwrap();
        prop_assume!(shifted_value > 0);
        let advanced = stream(&StreamSpec::rational(shifted_value, b)).materialize(200).unwrap();
        for i in 1..=200 {
            prop_assert_eq!(advanced.get(i), prefix.get(i + k));
        }
        prop_assert_eq!(prefix.shifted(k).truncated(200), advanced);
    }

    #[test]
    fn rationals_are_eventually_periodic(a in 1u64..300, b in 3u64..300) {
        prop_assume!(a < b);
        let StreamSpec::Rational { den, .. } = StreamSpec::rational(a, b) else { unreachable!() };
        let den: u64 = den.try_into().unwrap();
        prop_assume!(!den.is_power_of_two());
        // Independent period: the multiplicative order of 2 modulo the odd part.
        let pre = den.trailing_zeros() as usize;
        let odd = den >> pre;
        let period = if odd == 1 { 1 } else { (1..).find(|&r| mod_pow2(r, odd) == 1).unwrap() as usize };
        let n = pre + 4 * period;
        let prefix = stream(&StreamSpec::rational(a, b)).materialize(n + period).unwrap();
        for i in (pre + 1)..=n {
            prop_assert_eq!(prefix.get(i), prefix.get(i + period));
        }
    }

    #[test]
    fn block_specs_reproduce_their_runs(spec in arb_spec()) {
        prop_assume!(spec.declares_runs());
        let (m0, lengths) = BlockLengths::for_spec(&spec).unwrap();
        let declared: Vec<(u64, u64)> = lengths.take(8).map(Result::unwrap).collect();
        let total: u64 = m0 + declared.iter().map(|&(l, m)| l + m).sum::<u64>();
        let prefix = stream(&spec).materialize(total as usize + 1).unwrap();
        let d = decompose(&prefix);
        prop_assert_eq!(d.m0(), m0);
        prop_assert_eq!(&d.runs()[..8], &declared[..]);
        prop_assert_eq!(d.render_digits(), prefix);
    }

    #[test]
    fn run_length_round_trip(m0 in 0u64..5, pairs in arb_pairs()) {
        let d = BlockDecomposition::from_lengths(m0, &pairs);
        let mut digits = d.render_digits();
        digits.push(0);
        let back = decompose(&digits);
        prop_assert_eq!(back.m0(), m0);
        prop_assert_eq!(back.runs(), &pairs[..]);
    }

    #[test]
    fn locate_partitions_and_wedges(m0 in 0u64..5, pairs in arb_pairs()) {
        let d = BlockDecomposition::from_lengths(m0, &pairs);
        let mut sizes = std::collections::BTreeMap::new();
        for n in 1..=d.covered() {
            let r = d.locate(n).unwrap();
            *sizes.entry((r.tag.as_str(), r.j)).or_insert(0u64) += 1;
            match r.tag {
                RegionTag::K0 => prop_assert!(r.q >= 1 && r.q <= m0),
                RegionTag::J => {
                    prop_assert!(r.q >= 1 && r.q <= d.zeros(r.j));
                    if r.j >= 2 {
                        let before = d.zeros_sum(r.j - 1) + m0 + d.ones_sum(r.j - 1);
                        prop_assert!(before < n && n <= before + d.zeros(r.j));
                    }
                }
                RegionTag::K => prop_assert!(r.q >= 1 && r.q <= d.ones(r.j)),
            }
        }
        prop_assert_eq!(sizes.values().sum::<u64>(), d.covered());
        for ((tag, j), size) in sizes {
            let expected = match tag {
                "K0" => m0,
                "J" => d.zeros(j),
                _ => d.ones(j),
            };
            prop_assert_eq!(size, expected);
        }
        prop_assert!(d.locate(d.covered() + 1).is_err());
    }

    #[test]
    fn complement_swaps_runs(pairs in arb_pairs()) {
        // 0^l1 1^m1 ... 0^lJ 1^mJ 0 flips to 1^l1 0^m1 1^l2 ... 0^mJ 1.
        let mut digits = BlockDecomposition::from_lengths(0, &pairs).render_digits();
        digits.push(0);
        let mut flipped = digits.complemented();
        flipped.push(0);
        let d = decompose(&flipped);
        prop_assert_eq!(d.m0(), pairs[0].0);
        let expected: Vec<(u64, u64)> = pairs.windows(2).map(|w| (w[0].1, w[1].0)).collect();
        prop_assert_eq!(&d.runs()[..expected.len()], &expected[..]);
        prop_assert_eq!(d.runs()[expected.len()], (pairs[pairs.len() - 1].1, 1));
    }

    #[test]
    fn sums_dominate_n_and_dual_sums_do_not(spec in arb_spec(), p in arb_p()) {
        let cfg = OrbitConfig::new(p);
        let series = prefix_sums(&mut stream(&spec), &cfg, 300, Schedule::All).unwrap();
        let mut prev: Option<binorbit_core::dyadic::Dyadic> = None;
        for pt in &series.points {
            prop_assert!(pt.sum.lo() >= &binorbit_core::dyadic::Dyadic::from_int(pt.n));
            if let Some(prev) = prev {
                prop_assert!(pt.sum.hi() >= &prev);
            }
            prev = Some(pt.sum.hi().clone());
        }
        let dual = dual_prefix_sums(&mut stream(&spec), &cfg, 300, Schedule::All).unwrap();
        for pt in &dual.points {
            prop_assert!(pt.sum.hi() <= &binorbit_core::dyadic::Dyadic::from_int(pt.n));
        }
    }

    #[test]
    fn tighter_epsilon_nests(spec in arb_spec(), p in arb_p()) {
        let coarse = prefix_sums(&mut stream(&spec), &OrbitConfig::new(p).with_eps_bits(20), 200, Schedule::Log).unwrap();
        let fine = prefix_sums(&mut stream(&spec), &OrbitConfig::new(p).with_eps_bits(60), 200, Schedule::Log).unwrap();
        for (c, f) in coarse.points.iter().zip(&fine.points) {
            prop_assert!(f.sum.intersect(&c.sum).is_some());
            prop_assert!(f.sum.width() <= c.sum.width());
        }
    }

    #[test]
    fn factorization_identity(m0 in 0u64..4, pairs in arb_pairs(), p in 1u32..4) {
        let d = BlockDecomposition::from_lengths(m0, &pairs);
        let est = Estimators::new(&d, Exponent::integer(p));
        for n in 1..=d.covered() {
            let phi = est.phi(n).unwrap();
            let psi = est.psi(n).unwrap();
            let ups = est.upsilon(n).unwrap();
            let (phi, psi, ups) = (phi.as_exact().unwrap(), psi.as_exact().unwrap(), ups.as_exact().unwrap());
            prop_assert_eq!(psi, &(phi * ups));
            prop_assert!(phi <= psi);
            let r = d.locate(n).unwrap();
            if r.tag != RegionTag::K0 {
                let lambda = est.lambda(n).unwrap();
                prop_assert!(lambda.as_exact().unwrap() >= &num_rational::BigRational::from_integer(p.into()));
            }
        }
    }

    #[test]
    fn estimators_constant_on_regions(pairs in arb_pairs()) {
        let d = BlockDecomposition::from_lengths(1, &pairs);
        let est = Estimators::new(&d, Exponent::integer(2));
        for n in 2..=d.covered() {
            let (a, b) = (d.locate(n - 1).unwrap(), d.locate(n).unwrap());
            if (a.tag, a.j) == (b.tag, b.j) {
                prop_assert_eq!(est.phi(n - 1).unwrap(), est.phi(n).unwrap());
                prop_assert_eq!(est.psi(n - 1).unwrap(), est.psi(n).unwrap());
            }
        }
    }

    #[test]
    fn frequencies_and_pattern_counts(spec in arb_spec(), n in 1usize..500) {
        let prefix = stream(&spec).materialize(n + 2).unwrap();
        let f = digit_frequencies(&prefix, n).unwrap();
        prop_assert_eq!(f.freq_zero() + f.freq_one(), num_rational::Ratio::from_integer(1));
        let bits = prefix.to_vec();
        let brute = (0..n).filter(|&i| bits[i] == 0 && bits[i + 1] == 0).count() as u64;
        prop_assert_eq!(pattern_count(&prefix, &[0, 0], n).unwrap(), brute);
        let flipped = digit_frequencies(&prefix.complemented(), n).unwrap();
        prop_assert_eq!(flipped.zeros, f.ones);
    }

    #[test]
    fn complemented_diagnostics_swap(pairs in prop::collection::vec((1u64..8, 1u64..8), 4..8)) {
        let d = BlockDecomposition::from_lengths(0, &pairs);
        let swapped: Vec<(u64, u64)> = pairs.iter().map(|&(l, m)| (m, l)).collect();
        let e = BlockDecomposition::from_lengths(0, &swapped);
        let j = pairs.len() as u64;
        let a = theorem4_diagnostics(&d, j).unwrap();
        let b = theorem4_diagnostics(&e, j).unwrap();
        prop_assert_eq!(a.ratio_lm, b.ratio_lm.recip());
        prop_assert_eq!(a.ratio_l, b.ratio_m);
        prop_assert_eq!(a.ratio_m, b.ratio_l);
    }
}

fn mod_pow2(r: u64, m: u64) -> u64 {
    let mut x = 1u64;
    for _ in 0..r {
        x = x * 2 % m;
    }
    x
}

#[test]
fn stream_decomposition_matches_prefix_decomposition() {
    let spec = parse_spec("blocks:cycle=[(2,1),(1,3)];m0=2").unwrap();
    let mut s = stream(&spec);
    let d = decompose_stream(&mut s, 50).unwrap();
    assert!(d.covered() >= 50);
    let prefix: DigitPrefix = s.materialize(d.covered() as usize + 1).unwrap();
    let direct = decompose(&prefix);
    assert_eq!(direct.runs()[..d.runs().len()], d.runs()[..]);
}
