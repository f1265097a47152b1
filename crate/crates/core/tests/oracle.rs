use binorbit_core::digits::DigitStream;
use binorbit_core::dyadic::Dyadic;
use binorbit_core::orbit::{prefix_sums, term_interval, Exponent, OrbitConfig, Schedule};
use binorbit_core::streamspec::StreamSpec;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};

/// Points of the orbit of `a/b` as plain integer numerators over `b`.
fn orbit(a: u64, b: u64, n: usize) -> Vec<u64> {
    let mut x = a;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(x);
        x = (2 * x) % b;
    }
    out
}

/// Exact `sum_{k<=n} (b / x_k)^p` with cumulative values at each `n`.
fn running_sums(a: u64, b: u64, p: u32, n: usize) -> Vec<BigRational> {
    let mut acc = BigRational::zero();
    orbit(a, b, n)
        .into_iter()
        .map(|x| {
            acc += BigRational::new(BigInt::from(b), BigInt::from(x)).pow(p as i32);
            acc.clone()
        })
        .collect()
}

fn rel_width_ok(lo: &Dyadic, hi: &Dyadic, tol: &BigRational) -> bool {
    let (lo, hi) = (lo.to_rational(), hi.to_rational());
    (&hi - &lo) <= tol * lo
}

#[test]
fn enclosures_contain_exact_sums_on_both_paths() {
    let tol = BigRational::new(BigInt::one(), BigInt::from(1_000_000_000u64));
    for (a, b) in [(1, 3), (2, 3), (1, 5), (3, 5), (1, 7), (5, 11), (7, 13)] {
        for p in [1u32, 2, 3] {
            let exact = running_sums(a, b, p, 2000);
            for cfg in [OrbitConfig::new(Exponent::integer(p)), OrbitConfig::new(Exponent::integer(p)).digits_only()] {
                let mut s = DigitStream::new(StreamSpec::rational(a, b)).unwrap();
                let series = prefix_sums(&mut s, &cfg, 2000, Schedule::All).unwrap();
                for pt in &series.points {
                    let want = &exact[pt.n as usize - 1];
                    assert!(pt.sum.contains_rational(want), "{a}/{b} p={p} n={}", pt.n);
                    assert!(rel_width_ok(pt.sum.lo(), pt.sum.hi(), &tol), "{a}/{b} p={p} n={}", pt.n);
                }
            }
        }
    }
}

#[test]
fn hand_values() {
    let mut s = DigitStream::new(StreamSpec::rational(1, 3)).unwrap();
    let series = prefix_sums(&mut s, &OrbitConfig::new(Exponent::integer(2)), 2, Schedule::All).unwrap();
    let pt = series.at(2).unwrap();
    assert!(pt.sum.contains_rational(&BigRational::new(45.into(), 4.into())));
    assert!(pt.avg.contains_rational(&BigRational::new(45.into(), 8.into())));

    let mut s = DigitStream::new(StreamSpec::rational(1, 5)).unwrap();
    let series = prefix_sums(&mut s, &OrbitConfig::new(Exponent::integer(1)), 4, Schedule::All).unwrap();
    assert!(series.at(4).unwrap().sum.contains_rational(&BigRational::new(125.into(), 12.into())));
}

#[test]
fn fractional_exponent_terms_square_to_cubes() {
    // For p = 3/2 each term y^(-3/2) satisfies term^2 = (b/x)^3.
    let p = Exponent::new(3, 2).unwrap();
    for (a, b) in [(1u64, 3u64), (5, 11), (3, 7)] {
        for cfg in [OrbitConfig::new(p), OrbitConfig::new(p).digits_only()] {
            let mut s = DigitStream::new(StreamSpec::rational(a, b)).unwrap();
            for (k, x) in orbit(a, b, 60).into_iter().enumerate() {
                let t = term_interval(&mut s, k as u64 + 1, &cfg).unwrap();
                let cube = BigRational::new(BigInt::from(b), BigInt::from(x)).pow(3i32);
                let (lo, hi) = (t.lo().to_rational(), t.hi().to_rational());
                assert!(&lo * &lo <= cube && cube <= &hi * &hi, "{a}/{b} k={}", k + 1);
            }
        }
    }
}

#[test]
fn irrational_stream_is_bracketed_by_truncations() {
    // Champernowne digits from position k: x_k lies between the value of the
    // next 40 digits and that value plus 2^-40, so each term is bracketed too.
    let mut s = DigitStream::new(StreamSpec::Champernowne).unwrap();
    let prefix = s.materialize(400).unwrap();
    let cfg = OrbitConfig::new(Exponent::integer(2));
    for k in 1..=300usize {
        let t = term_interval(&mut s, k as u64, &cfg).unwrap();
        let m = BigInt::from(prefix.extract_u64(k, 40));
        let scale = BigInt::one() << 40usize;
        let lo_x = BigRational::new(m.clone(), scale.clone());
        let hi_x = BigRational::new(m + 1, scale);
        let term_max = lo_x.recip().pow(2i32);
        let term_min = hi_x.recip().pow(2i32);
        assert!(t.lo().to_rational() <= term_max && t.hi().to_rational() >= term_min, "k={k}");
    }
}
