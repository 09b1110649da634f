//! Monte Carlo checks against exactly known expectations.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;

use rmf_core::euler::{self, EulerFactors};
use rmf_core::harness::{self, ExperimentConfig, YSequence};
use rmf_core::quad::QuadConfig;
use rmf_core::sieve::isqrt;
use rmf_core::stats::{within_se, MeanAccumulator};
use rmf_core::sums;
use rmf_core::{derive_seed, Model, PrimeTables, SampledFunction};

fn tables() -> &'static PrimeTables {
    static T: OnceLock<PrimeTables> = OnceLock::new();
    T.get_or_init(|| PrimeTables::build(200_000).unwrap())
}

fn realizations(model: Model, trials: u64, base: u64) -> impl Iterator<Item = SampledFunction<'static>> {
    (0..trials).map(move |j| SampledFunction::new(model, derive_seed(base, j), tables()))
}

#[test]
fn prime_values_have_mean_zero() {
    for model in Model::ALL {
        for p in [2, 3, 101, 199_999] {
            let (mut re, mut im) = (MeanAccumulator::new(), MeanAccumulator::new());
            for f in realizations(model, 100_000, p) {
                let v = f.prime_value(p).unwrap();
                re.push(v.re);
                im.push(v.im);
            }
            let tol = 3.0 / 100_000f64.sqrt();
            assert!(re.mean().abs() < tol && im.mean().abs() < tol, "{model} p = {p}");
        }
    }
}

#[test]
fn prefix_sums_are_centered_and_orthogonal() {
    let t = tables();
    let sf = t.squarefree_prefix(1000).unwrap();
    for model in Model::ALL {
        for y in [10u64, 100, 1000] {
            let mut sq = MeanAccumulator::new();
            let (mut re, mut im) = (MeanAccumulator::new(), MeanAccumulator::new());
            for f in realizations(model, 10_000, y) {
                let a = f.prefix_sums(y).unwrap()[y as usize];
                sq.push(a.norm_sqr());
                re.push(a.re);
                im.push(a.im);
            }
            let exact = match model {
                Model::Rademacher => sf[y as usize] as f64,
                Model::Steinhaus => y as f64,
            };
            assert!(within_se(sq.mean(), sq.std_error(), exact), "{model} y = {y}");
            // A(y) includes f(1) = 1.
            assert!(within_se(re.mean(), re.std_error(), 1.0));
            assert!(within_se(im.mean(), im.std_error(), 0.0));
        }
    }
}

#[test]
fn large_prime_sums_have_mean_zero_and_exact_variance() {
    for model in Model::ALL {
        for x in [1000u64, 10_000] {
            let (mut re, mut im, mut v) = (MeanAccumulator::new(), MeanAccumulator::new(), MeanAccumulator::new());
            for f in realizations(model, 10_000, x) {
                let prefix = f.prefix_sums(isqrt(x)).unwrap();
                let m = sums::large_prime_sum_with_prefix(&f, x, &prefix);
                re.push(m.re);
                im.push(m.im);
                v.push(sums::conditional_variance_with_prefix(tables(), x, &prefix));
            }
            assert!(within_se(re.mean(), re.std_error(), 0.0), "{model} x = {x}");
            assert!(within_se(im.mean(), im.std_error(), 0.0));
            let exact = sums::exact_expected_variance(x, model, tables()).unwrap();
            assert!(within_se(v.mean(), v.std_error(), exact), "{model} x = {x}");
        }
    }
}

#[test]
fn conditional_mean_of_large_prime_sum_is_zero() {
    let t = tables();
    let x = 5000;
    for model in Model::ALL {
        for cond in 0..3 {
            let base = SampledFunction::new(model, cond, t);
            let (mut re, mut im) = (MeanAccumulator::new(), MeanAccumulator::new());
            for j in 0..4000 {
                let f = base.with_resampled_above(isqrt(x), derive_seed(99, j));
                let m = sums::large_prime_sum(&f, x).unwrap();
                re.push(m.re);
                im.push(m.im);
            }
            assert!(within_se(re.mean(), re.std_error(), 0.0), "{model} seed {cond}");
            assert!(within_se(im.mean(), im.std_error(), 0.0));
        }
    }
}

#[test]
fn expected_variance_examples() {
    let t = tables();
    for model in Model::ALL {
        assert_eq!(sums::exact_expected_variance(10, model, t).unwrap(), 3.0);
        let x = 100_000;
        let e = sums::exact_expected_variance(x, model, t).unwrap();
        let c1 = e / x as f64;
        assert!(c1 > 0.3 && c1 < 1.0, "{model}: {c1}");
    }
    let mut v = MeanAccumulator::new();
    for f in realizations(Model::Steinhaus, 10_000, 10) {
        v.push(sums::conditional_variance(&f, 10).unwrap());
    }
    assert!(within_se(v.mean(), v.std_error(), 3.0));
}

#[test]
fn euler_product_expectation_is_t_independent() {
    let t = tables();
    for model in Model::ALL {
        let mut estimates = Vec::new();
        for tt in [0.0, 0.5, 2.0] {
            // |S|^2 is strongly right-skewed; a miss is retried once with 4x trials.
            let r = harness::rerun_on_failure(
                10_000,
                |n| euler::expected_product_identity_check(0, 100, tt, model, n, 17, t),
                |r| !r.agrees,
            )
            .unwrap()
            .result;
            assert!(r.agrees, "{model} t = {tt}: {r:?}");
            estimates.push(r);
        }
        for w in estimates.windows(2) {
            let joint = w[0].std_error.hypot(w[1].std_error);
            assert!((w[0].estimate - w[1].estimate).abs() <= 3.0 * joint);
        }
    }
    let r = euler::expected_product_identity_check(2, 3, 0.0, Model::Rademacher, 10_000, 1, t).unwrap();
    assert_eq!(r.exact, 4.0 / 3.0);
    assert!(r.agrees);
    let r = euler::expected_product_identity_check(2, 100, 1.3, Model::Steinhaus, 10_000, 2, t).unwrap();
    assert!(r.agrees);
}

#[test]
fn parseval_integral_mean_grows_like_log_x() {
    let t = tables();
    let x = 1000u64;
    let quad = QuadConfig::default().with_rel_tol(1e-5);
    let t_cut = euler::default_t_cut(x);
    let mut acc = MeanAccumulator::new();
    for f in realizations(Model::Rademacher, 200, 5) {
        acc.push(euler::parseval_integral(&f, x, &quad).unwrap().value);
    }
    let truncated = euler::exact_product_expectation(0, x, Model::Rademacher, t) * 4.0 * (2.0 * t_cut).atan();
    assert!(within_se(acc.mean(), acc.std_error(), truncated));
    let per_log = acc.mean() / (x as f64).ln();
    assert!(per_log > 1.0 && per_log < 20.0, "{per_log}");
    assert!(
        (euler::expected_parseval_integral(x, Model::Rademacher, t)
            - 2.0 * PI * truncated / (4.0 * (2.0 * t_cut).atan()))
        .abs()
            < 1e-9
    );
}

#[test]
fn parseval_identity_random_sequences() {
    let quad = QuadConfig::default().with_rel_tol(1e-9).with_t_cut(2000.0);
    for i in 0..10u64 {
        let coeffs: Vec<Complex64> = (0..10u64)
            .map(|k| {
                let u = derive_seed(i, k);
                Complex64::new((u >> 40) as f64 / (1u64 << 24) as f64 - 0.5, (u & 0xffff) as f64 / 65536.0 - 0.5)
            })
            .collect();
        let c = euler::parseval_identity_check(&coeffs, 0.7, &quad).unwrap();
        assert!(c.agrees(), "{c:?}");
    }
}

#[test]
fn y_sequence_is_a_submartingale_in_mean() {
    let t = tables();
    let quad = QuadConfig::default().with_rel_tol(1e-7);
    for model in Model::ALL {
        let seq = YSequence::second_block(0.1, 24, &quad).unwrap();
        assert_eq!(seq.points[0], 8);
        for seed in 0..2 {
            let steps = harness::submartingale_check_y(&seq, model, seed, 500, 3, t).unwrap();
            for s in &steps {
                assert!(!s.deficit.violated, "{model} {s:?}");
                assert!(s.conditional_mean.agrees, "{model} {s:?}");
                if s.new_primes.is_empty() {
                    assert_eq!(s.deficit.estimate, 0.0);
                }
            }
        }
    }
}

#[test]
fn y_values_match_the_adaptive_statistic() {
    let t = tables();
    let quad = QuadConfig::default().with_rel_tol(1e-8).with_t_cut(80.0);
    let seq = YSequence::second_block(0.1, 20, &quad).unwrap();
    let f = SampledFunction::new(Model::Steinhaus, 6, t);
    let steps = harness::submartingale_check_y(&seq, Model::Steinhaus, 6, 2, 0, t).unwrap();
    for s in &steps {
        let y = euler::y_statistic(&f, s.x_prev, 2f64.exp(), 2, 2.5, &quad).unwrap();
        assert!((y.value - s.y_before).abs() < 1e-6 * y.value, "{} vs {}", y.value, s.y_before);
    }
    let factors = EulerFactors::new(&f, 20).unwrap();
    assert!(factors.sup_abs() > 1.0);
}

#[test]
fn hoeffding_tails_below_derived_bound() {
    let t = tables();
    for model in Model::ALL {
        let cfg = ExperimentConfig { model, ..Default::default() };
        let r = harness::hoeffding_tail_check(&cfg, 1000, 3, 10_000, None, t).unwrap();
        assert!(!r.report.violated, "{r:?}");
        assert!(r.v0 >= 1.0);
        assert!(r.report.bound > 0.0 && r.displayed_bound > 0.0);
        if let Some((a, b)) = r.component_tails {
            assert!(!a.violated && !b.violated);
        }
    }
}

#[test]
fn variance_ensemble_matches_oracle() {
    let t = tables();
    let cfg = ExperimentConfig { model: Model::Steinhaus, x_max: 100_000, trials: 1000, ..Default::default() };
    let e = harness::variance_ratio_ensemble(&cfg, t).unwrap();
    let xs: Vec<u64> = e.checkpoints.iter().map(|c| c.x).collect();
    assert_eq!(xs, vec![10, 100, 1000, 10_000, 100_000]);
    for c in &e.checkpoints {
        assert!(c.mean.agrees, "{c:?}");
        assert!(c.ratio.min >= 0.0);
    }
    assert!(e.trend.is_finite());
}
