use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::OnceLock;

use rmf_core::sieve::isqrt;
use rmf_core::sums;
use rmf_core::{Model, PrimeTables, SampledFunction};

fn tables() -> &'static PrimeTables {
    static T: OnceLock<PrimeTables> = OnceLock::new();
    T.get_or_init(|| PrimeTables::build(1_000_000).unwrap())
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `b` with every prime factor of `a` removed.
fn coprime_part(a: u64, mut b: u64) -> u64 {
    loop {
        let g = gcd(a, b);
        if g == 1 {
            return b;
        }
        b /= g;
    }
}

fn pair(max_product: u64) -> impl Strategy<Value = (u64, u64)> {
    (1u64..=10_000.min(max_product))
        .prop_flat_map(move |a| (Just(a), 1u64..=(max_product / a).min(10_000)))
        .prop_map(|(a, b)| (a, coprime_part(a, b)))
}

fn trial_division(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        let mut e = 0;
        while n % d == 0 {
            n /= d;
            e += 1;
        }
        if e > 0 {
            out.push((d, e));
        }
        d += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

#[test]
fn factorization_agrees_with_trial_division() {
    let t = tables();
    for n in 1..=100_000u64 {
        let f = t.factorize(n).unwrap();
        assert_eq!(f.product(), n);
        let want = trial_division(n);
        assert_eq!(f.factors, want, "n = {n}");
        if n >= 2 {
            assert_eq!(t.largest_prime_factor(n).unwrap(), want.last().unwrap().0);
        }
        let mu = if want.iter().any(|&(_, e)| e > 1) {
            0
        } else if want.len() % 2 == 0 {
            1
        } else {
            -1
        };
        assert_eq!(t.mobius(n).unwrap(), mu, "n = {n}");
    }
}

#[test]
fn d2_is_the_divisor_count() {
    let t = tables();
    for n in 1..=10_000u64 {
        let count = (1..=n).filter(|d| n % d == 0).count() as u128;
        assert_eq!(t.divisor_m(n, 2).unwrap(), count);
    }
}

#[test]
fn divisor_partial_sums_are_termwise_and_monotone() {
    let t = tables();
    for m in 1..=5u32 {
        let mut acc = 0u128;
        for x in 1..=2000u64 {
            acc += t.divisor_m(x, m).unwrap();
            assert_eq!(t.divisor_partial_sum(x, m).unwrap(), acc);
        }
        if m > 1 {
            assert!(t.divisor_partial_sum(2000, m).unwrap() > t.divisor_partial_sum(2000, m - 1).unwrap());
        }
    }
}

#[test]
fn mertens_ratio_envelope() {
    let t = tables();
    for x in [1e3f64, 1e4, 1e5, 1e6] {
        let s = t.mertens_reciprocal_sum(1, x as u64).unwrap();
        let ratio = s / x.ln().ln();
        assert!((0.9..=1.4).contains(&ratio), "x = {x}: {ratio}");
    }
    let s = t.mertens_reciprocal_sum(1, 1_000_000).unwrap();
    assert!((s - (1e6f64.ln().ln() + 0.2615)).abs() < 0.01);
}

#[test]
fn divisor_sum_shape_constant() {
    // sum_{n <= x} d_3(n) <= C x (log x)^2 with a small fitted constant.
    let t = tables();
    let x = 10_000u64;
    let s = t.divisor_partial_sum(x, 3).unwrap() as f64;
    let c = s / (x as f64 * (x as f64).ln().powi(2));
    assert!(c > 0.3 && c < 1.0, "{c}");
}

#[test]
fn decomposition_matches_enumeration() {
    let t = tables();
    for model in Model::ALL {
        for seed in 0..3 {
            let f = SampledFunction::new(model, seed, t);
            for x in (1..=3000u64).step_by(7) {
                let a = sums::large_prime_sum(&f, x).unwrap();
                let b = sums::large_prime_sum_bruteforce(&f, x).unwrap();
                assert!((a - b).norm() <= 1e-9, "{model} x = {x}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn divisor_function_is_multiplicative((a, b) in pair(1_000_000), m in 1u32..=5) {
        let t = tables();
        prop_assert_eq!(
            t.divisor_m(a * b, m).unwrap(),
            t.divisor_m(a, m).unwrap() * t.divisor_m(b, m).unwrap()
        );
    }

    #[test]
    fn values_are_multiplicative((a, b) in pair(10_000), seed in 0u64..20) {
        let t = tables();
        let r = SampledFunction::new(Model::Rademacher, seed, t);
        prop_assert_eq!(r.value_at(a * b).unwrap(), r.value_at(a).unwrap() * r.value_at(b).unwrap());
        let s = SampledFunction::new(Model::Steinhaus, seed, t);
        let d = s.value_at(a * b).unwrap() - s.value_at(a).unwrap() * s.value_at(b).unwrap();
        prop_assert!(d.norm() < 1e-12);
    }

    #[test]
    fn steinhaus_is_completely_multiplicative(i in 0usize..25, k in 1u32..6, seed in any::<u64>()) {
        let t = tables();
        let p = t.primes()[i] as u64;
        prop_assume!(p.pow(k) <= t.limit());
        let s = SampledFunction::new(Model::Steinhaus, seed, t);
        let want = s.prime_value(p).unwrap().powu(k);
        prop_assert!((s.value_at(p.pow(k)).unwrap() - want).norm() < 1e-12);
    }

    #[test]
    fn evaluation_order_is_irrelevant(seed in any::<u64>(), start in 1u64..10_000) {
        let t = tables();
        for model in Model::ALL {
            let a = SampledFunction::new(model, seed, t);
            let b = SampledFunction::new(model, seed, t);
            let forward: Vec<Complex64> = (0..=10_000).map(|n| if n == 0 { Complex64::new(0.0, 0.0) } else { a.value_at(n).unwrap() }).collect();
            let table = a.values_upto(10_000).unwrap();
            // Visit in a scrambled order on the second instance.
            let mut n = start;
            for _ in 0..500 {
                prop_assert_eq!(b.value_at(n).unwrap(), forward[n as usize]);
                prop_assert!((table[n as usize] - forward[n as usize]).norm() < 1e-12);
                n = (n * 7919 + 13) % 10_000 + 1;
            }
        }
    }

    #[test]
    fn increment_decomposition_is_exact(x_prev in 2u64..=10_000, extra in 0u64..=5_000, seed in 0u64..1000) {
        let t = tables();
        let x = (x_prev + extra).min(10_000);
        let f = SampledFunction::new(Model::Rademacher, seed, t);
        let (a, b, c) = sums::increment_decomposition_check(&f, x_prev, x).unwrap();
        prop_assert_eq!(a + b + c, sums::large_prime_sum(&f, x).unwrap());
        let g = SampledFunction::new(Model::Steinhaus, seed, t);
        let (a, b, c) = sums::increment_decomposition_check(&g, x_prev, x).unwrap();
        prop_assert!((a + b + c - sums::large_prime_sum(&g, x).unwrap()).norm() < 1e-9);
    }

    #[test]
    fn large_prime_sum_is_a_window_sum(x in 2u64..=10_000, seed in 0u64..1000) {
        let t = tables();
        let f = SampledFunction::new(Model::Rademacher, seed, t);
        prop_assert_eq!(
            sums::large_prime_sum(&f, x).unwrap(),
            sums::interval_sum_pconstraint(&f, 0, x, isqrt(x), x).unwrap()
        );
    }

    #[test]
    fn variance_is_nonnegative_and_bounded_by_support(x in 2u64..=100_000, seed in any::<u64>()) {
        let t = tables();
        let f = SampledFunction::new(Model::Steinhaus, seed, t);
        let v = sums::conditional_variance(&f, x).unwrap();
        prop_assert!(v >= 0.0);
        // |A(y)| <= y, so V(x) <= sum_p (x/p)^2.
        let cap: f64 = t.primes_between(isqrt(x), x).iter().map(|&p| ((x / p as u64) as f64).powi(2)).sum();
        prop_assert!(v <= cap + 1e-9);
    }
}

#[test]
fn zero_realization_sums() {
    let t = tables();
    let z = SampledFunction::zero(Model::Steinhaus, t);
    assert_eq!(sums::large_prime_sum(&z, 1000).unwrap(), Complex64::new(0.0, 0.0));
    assert_eq!(z.prefix_sums(50).unwrap()[50], Complex64::new(1.0, 0.0));
}
