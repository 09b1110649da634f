//! Experiment driver: test-point grids, per-trial sup statistics and the
//! Monte Carlo inequality suites.
//!
//! Every suite draws realization `j` from `derive_seed(base, j)` and reduces
//! samples in index order, so results do not depend on the thread count.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::euler::{self, EulerFactors, NodeProduct, NodeRule, PrimePhases};
use crate::quad::QuadConfig;
use crate::rmf::{derive_seed, Model, SampledFunction};
use crate::sieve::{isqrt, PrimeTables};
use crate::stats::{MeanAccumulator, MomentReport, OracleReport, Quantiles, SE_MULTIPLIER};
use crate::sums;

/// The constant in the event `|M_f(x)| > 6 sqrt(x) R(x)`.
pub const THEOREM_CONSTANT: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub epsilon: f64,
    pub model: Model,
    pub seed_base: u64,
    pub trials: u64,
    pub x_max: u64,
    pub quad: QuadConfig,
    /// The conditioning parameter `T >= 1`.
    pub t_param: f64,
    pub oracle_cap: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            model: Model::Rademacher,
            seed_base: 0,
            trials: 100,
            x_max: 10_000,
            quad: QuadConfig::default(),
            t_param: 10.0,
            oracle_cap: sums::ORACLE_CAP,
        }
    }
}

impl ExperimentConfig {
    /// `K = 1 / (4 epsilon)`.
    pub fn k_exponent(&self) -> f64 {
        1.0 / (4.0 * self.epsilon)
    }

    pub fn validate(&self, tables: &PrimeTables) -> Result<()> {
        check_epsilon(self.epsilon)?;
        if self.trials == 0 {
            return Err(Error::invalid("trials must be positive"));
        }
        if self.x_max > tables.limit() {
            return Err(Error::invalid(format!("x_max = {} exceeds the table limit {}", self.x_max, tables.limit())));
        }
        if !(self.t_param >= 1.0 && self.t_param.is_finite()) {
            return Err(Error::invalid(format!("T must be at least 1, got {}", self.t_param)));
        }
        if self.oracle_cap == 0 {
            return Err(Error::invalid("oracle cap must be positive"));
        }
        self.quad.validate()
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1/4), got {epsilon}")));
    }
    Ok(())
}

/// `{floor(e^{i^eps}) : i >= 1}` restricted to `[3, x_max]`, ascending.
///
/// `x` is a test point iff some integer `i` satisfies
/// `(log x)^{1/eps} <= i < (log(x+1))^{1/eps}`, which is tested directly so
/// the (astronomically large) indices `i` are never enumerated.
pub fn test_points(epsilon: f64, x_max: u64) -> Result<Vec<u64>> {
    check_epsilon(epsilon)?;
    let inv = 1.0 / epsilon;
    let mut out = Vec::new();
    if x_max < 3 {
        return Ok(out);
    }
    let mut lo = 3f64.ln().powf(inv);
    for x in 3..=x_max {
        let hi = ((x + 1) as f64).ln().powf(inv);
        if !hi.is_finite() || lo.ceil() < hi {
            out.push(x);
        }
        lo = hi;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockBoundary {
    pub ell: u32,
    /// `log X_ell = 2^{ell^K}`.
    pub log_value: f64,
    /// `floor(X_ell)`.
    pub value: u64,
}

/// The block boundaries `X_ell = e^{2^{ell^K}} <= x_max`, `ell >= 1`.
pub fn block_boundaries(epsilon: f64, x_max: u64) -> Result<Vec<BlockBoundary>> {
    check_epsilon(epsilon)?;
    let k = 1.0 / (4.0 * epsilon);
    let log_max = (x_max.max(1) as f64).ln();
    let mut out = Vec::new();
    for ell in 1u32.. {
        let log_value = 2f64.powf((ell as f64).powf(k));
        if log_value > log_max + 1.0 {
            break;
        }
        let value = log_value.exp().floor() as u64;
        if value > x_max {
            break;
        }
        out.push(BlockBoundary { ell, log_value, value });
    }
    Ok(out)
}

/// `R(x) = (log log x)^{1/4 + eps}`.
pub fn r_of(x: f64, epsilon: f64) -> Result<f64> {
    if !(x >= 3.0 && x.is_finite()) {
        return Err(Error::invalid(format!("R(x) needs x >= 3, got {x}")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("bad epsilon {epsilon}")));
    }
    Ok(x.ln().ln().powf(0.25 + epsilon))
}

/// `sqrt(x) R(x)`, the scale of the normalized sup.
pub fn sup_scale(x: u64, epsilon: f64) -> f64 {
    (x as f64).sqrt() * (x as f64).ln().ln().powf(0.25 + epsilon)
}

/// `sqrt(log log x) / x`, the scale of the variance sup.
pub fn variance_scale(x: u64) -> f64 {
    (x as f64).ln().ln().sqrt() / x as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub grid: Vec<u64>,
    pub m_values: Vec<Complex64>,
    pub v_values: Vec<f64>,
    /// `max_i |M_f(x_i)| / (sqrt(x_i) R(x_i))`, zero on an empty grid.
    pub normalized_sup: f64,
    /// `max_i V(x_i) sqrt(log log x_i) / x_i`, zero on an empty grid.
    pub variance_sup: f64,
    pub degenerate: bool,
}

impl TrialResult {
    /// The sups recomputed from the stored values.
    pub fn recompute_sups(&self, epsilon: f64) -> (f64, f64) {
        let mut sup = SupTracker::default();
        for ((&x, m), &v) in self.grid.iter().zip(&self.m_values).zip(&self.v_values) {
            sup.push(x, *m, v, epsilon);
        }
        (sup.normalized, sup.variance)
    }

    pub fn summary(&self, epsilon: f64) -> TrialSummary {
        let mut sup = SupTracker::default();
        for ((&x, m), &v) in self.grid.iter().zip(&self.m_values).zip(&self.v_values) {
            sup.push(x, *m, v, epsilon);
        }
        sup.finish(self.seed)
    }
}

/// Per-trial sup statistics without the grid values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSummary {
    pub seed: u64,
    pub points: usize,
    pub normalized_sup: f64,
    /// Grid point attaining `normalized_sup` (0 on an empty grid).
    pub normalized_sup_at: u64,
    pub variance_sup: f64,
    pub variance_sup_at: u64,
    pub final_x: u64,
    pub final_m: Complex64,
    pub final_v: f64,
    pub degenerate: bool,
}

impl TrialSummary {
    pub fn exceeds_constant(&self) -> bool {
        self.normalized_sup > THEOREM_CONSTANT
    }
}

#[derive(Debug, Default)]
struct SupTracker {
    points: usize,
    normalized: f64,
    normalized_at: u64,
    variance: f64,
    variance_at: u64,
    last: Option<(u64, Complex64, f64)>,
}

impl SupTracker {
    fn push(&mut self, x: u64, m: Complex64, v: f64, epsilon: f64) {
        let a = m.norm() / sup_scale(x, epsilon);
        let b = v * variance_scale(x);
        if self.points == 0 || a > self.normalized {
            self.normalized = a;
            self.normalized_at = x;
        }
        if self.points == 0 || b > self.variance {
            self.variance = b;
            self.variance_at = x;
        }
        self.points += 1;
        self.last = Some((x, m, v));
    }

    fn finish(self, seed: u64) -> TrialSummary {
        let (final_x, final_m, final_v) = self.last.unwrap_or((0, Complex64::new(0.0, 0.0), 0.0));
        TrialSummary {
            seed,
            points: self.points,
            normalized_sup: self.normalized,
            normalized_sup_at: self.normalized_at,
            variance_sup: self.variance,
            variance_sup_at: self.variance_at,
            final_x,
            final_m,
            final_v,
            degenerate: self.points == 0,
        }
    }
}

/// Shared state for many trials over one grid.
pub struct Simulation<'a> {
    config: ExperimentConfig,
    tables: &'a PrimeTables,
    grid: Vec<u64>,
    lpf: Vec<u32>,
}

impl<'a> Simulation<'a> {
    pub fn new(config: ExperimentConfig, tables: &'a PrimeTables) -> Result<Self> {
        config.validate(tables)?;
        let grid = test_points(config.epsilon, config.x_max)?;
        let lpf = match grid.last() {
            Some(&x) => tables.largest_prime_factor_table(x)?,
            None => Vec::new(),
        };
        Ok(Self { config, tables, grid, lpf })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn grid(&self) -> &[u64] {
        &self.grid
    }

    pub fn trial_seed(&self, index: u64) -> u64 {
        derive_seed(self.config.seed_base, index)
    }

    fn scan(&self, seed: u64, mut visit: impl FnMut(u64, Complex64, f64)) -> Result<()> {
        let Some(&x_end) = self.grid.last() else {
            return Ok(());
        };
        let f = SampledFunction::new(self.config.model, seed, self.tables);
        let mut next = 0;
        sums::scan_large_prime_sums(&f, x_end, &self.lpf, |x, m, v| {
            if self.grid.get(next) == Some(&x) {
                next += 1;
                visit(x, m, v);
            }
        })
    }

    pub fn run_trial(&self, seed: u64) -> Result<TrialResult> {
        let n = self.grid.len();
        let mut m_values = Vec::with_capacity(n);
        let mut v_values = Vec::with_capacity(n);
        let mut sup = SupTracker::default();
        let eps = self.config.epsilon;
        self.scan(seed, |x, m, v| {
            m_values.push(m);
            v_values.push(v);
            sup.push(x, m, v, eps);
        })?;
        let s = sup.finish(seed);
        Ok(TrialResult {
            seed,
            grid: self.grid.clone(),
            m_values,
            v_values,
            normalized_sup: s.normalized_sup,
            variance_sup: s.variance_sup,
            degenerate: s.degenerate,
        })
    }

    pub fn run_summary(&self, seed: u64) -> Result<TrialSummary> {
        let mut sup = SupTracker::default();
        let eps = self.config.epsilon;
        self.scan(seed, |x, m, v| sup.push(x, m, v, eps))?;
        Ok(sup.finish(seed))
    }

    /// Summaries of trials `0..config.trials`, in index order.
    pub fn summaries(&self) -> Result<Vec<TrialSummary>> {
        (0..self.config.trials).into_par_iter().map(|j| self.run_summary(self.trial_seed(j))).collect()
    }
}

pub fn run_trial(config: &ExperimentConfig, seed: u64, tables: &PrimeTables) -> Result<TrialResult> {
    Simulation::new(*config, tables)?.run_trial(seed)
}

/// Distribution of the normalized sup over an ensemble, with the fraction of
/// trials exceeding [`THEOREM_CONSTANT`]. Reported, never asserted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendReport {
    pub seed_base: u64,
    pub trials: usize,
    pub x_max: u64,
    pub epsilon: f64,
    pub constant: f64,
    pub normalized_sup: Quantiles,
    pub variance_sup: Quantiles,
    pub exceedance_fraction: f64,
    pub degenerate_trials: usize,
}

pub fn trend_report(config: &ExperimentConfig, summaries: &[TrialSummary]) -> Result<TrendReport> {
    let ns: Vec<f64> = summaries.iter().map(|s| s.normalized_sup).collect();
    let vs: Vec<f64> = summaries.iter().map(|s| s.variance_sup).collect();
    let (Some(normalized_sup), Some(variance_sup)) = (Quantiles::from_samples(&ns), Quantiles::from_samples(&vs))
    else {
        return Err(Error::invalid("no usable trials"));
    };
    let exceed = summaries.iter().filter(|s| s.exceeds_constant()).count();
    Ok(TrendReport {
        seed_base: config.seed_base,
        trials: summaries.len(),
        x_max: config.x_max,
        epsilon: config.epsilon,
        constant: THEOREM_CONSTANT,
        normalized_sup,
        variance_sup,
        exceedance_fraction: exceed as f64 / summaries.len() as f64,
        degenerate_trials: summaries.iter().filter(|s| s.degenerate).count(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianDrift {
    pub drift: f64,
    pub joint_se: f64,
    /// `drift <= 3 * joint_se`.
    pub stable: bool,
}

/// Compares the medians of two independent ensembles.
pub fn median_drift(a: &Quantiles, b: &Quantiles) -> MedianDrift {
    let drift = (a.median - b.median).abs();
    let joint_se = a.median_se.hypot(b.median_se);
    MedianDrift { drift, joint_se, stable: drift.is_finite() && drift <= SE_MULTIPLIER * joint_se }
}

/// Outcome of a suite that may have been rerun with more trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Rerun<R> {
    pub result: R,
    pub trials: u64,
    pub reran: bool,
}

/// Runs `suite(trials)`; if `failed` holds, reruns once with four times the
/// trials and keeps that result.
pub fn rerun_on_failure<R>(
    trials: u64,
    suite: impl Fn(u64) -> Result<R>,
    failed: impl Fn(&R) -> bool,
) -> Result<Rerun<R>> {
    let first = suite(trials)?;
    if !failed(&first) {
        return Ok(Rerun { result: first, trials, reran: false });
    }
    let trials = trials.saturating_mul(4);
    Ok(Rerun { result: suite(trials)?, trials, reran: true })
}

fn mean_of(samples: impl IntoIterator<Item = f64>) -> MeanAccumulator {
    samples.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    /// `a_n = 1` for `n` in the set.
    Indicator(Vec<u64>),
    /// `a_n = 1` for `n <= N`.
    Ones(u64),
    Explicit(Vec<(u64, Complex64)>),
}

impl WeightSpec {
    pub fn terms(&self) -> Vec<(u64, Complex64)> {
        let one = Complex64::new(1.0, 0.0);
        match self {
            WeightSpec::Indicator(ns) => ns.iter().map(|&n| (n, one)).collect(),
            WeightSpec::Ones(n) => (1..=*n).map(|k| (k, one)).collect(),
            WeightSpec::Explicit(t) => t.clone(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            WeightSpec::Indicator(ns) => {
                let parts: Vec<String> = ns.iter().map(u64::to_string).collect();
                format!("indicator:{}", parts.join("+"))
            }
            WeightSpec::Ones(n) => format!("ones:{n}"),
            WeightSpec::Explicit(t) => format!("explicit:{}", t.len()),
        }
    }
}

/// `E|sum a_n f(n)|^{2m}` against `(sum |a_n|^2 d_{2m-1}(n))^m`.
pub fn hypercontractive_check(
    spec: &WeightSpec,
    model: Model,
    m: u32,
    trials: u64,
    seed_base: u64,
    tables: &PrimeTables,
) -> Result<MomentReport> {
    if !(1..=3).contains(&m) {
        return Err(Error::invalid(format!("m must lie in 1..=3, got {m}")));
    }
    if trials < 1000 {
        return Err(Error::invalid(format!("need at least 1000 trials, got {trials}")));
    }
    let terms = spec.terms();
    if terms.is_empty() {
        return Err(Error::invalid("empty weight support"));
    }
    let mut n_max = 0;
    let mut inner = 0.0;
    for &(n, a) in &terms {
        if n == 0 || n > tables.limit() {
            return Err(Error::invalid(format!("support point {n} out of range")));
        }
        if !(a.re.is_finite() && a.im.is_finite()) {
            return Err(Error::invalid("non-finite weight"));
        }
        n_max = n_max.max(n);
        inner += a.norm_sqr() * tables.divisor_m(n, 2 * m - 1)? as f64;
    }
    let bound = inner.powi(m as i32);
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|j| {
            let f = SampledFunction::new(model, derive_seed(seed_base, j), tables);
            let vals = f.values_upto(n_max)?;
            let s: Complex64 = terms.iter().map(|&(n, a)| a * vals[n as usize]).sum();
            Ok(s.norm_sqr().powi(m as i32))
        })
        .collect::<Result<_>>()?;
    Ok(MomentReport::from_samples(&mean_of(samples), bound))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoeffdingReport {
    pub x: u64,
    pub conditioning_seed: u64,
    pub t: f64,
    /// `V(x)` of the fixed small-prime realization.
    pub v0: f64,
    /// Empirical `P(|M_f(x)| >= t)` against `2 exp(-t^2 / (2 V0))`.
    ///
    /// For Steinhaus this follows from `E exp(mu |M|^2) <= 1 / (1 - mu V0)`
    /// (average `exp(2 sqrt(mu) Re(g M))` over a complex Gaussian `g`),
    /// which gives `e u exp(-u) <= 2 exp(-u/2)` with `u = t^2 / V0`.
    pub report: MomentReport,
    /// `exp(-4 x R(x)^2 / V0)`, for comparison only.
    pub displayed_bound: f64,
    /// Steinhaus only: empirical `P(|Re M| >= t/sqrt 2)` and
    /// `P(|Im M| >= t/sqrt 2)`, each bounded by `2 exp(-t^2 / (2 V0))`
    /// since `E exp(lambda Re(f(p) c)) = I_0(lambda |c|) <= exp(lambda^2 |c|^2 / 4)`.
    pub component_tails: Option<(MomentReport, MomentReport)>,
    pub degenerate: bool,
}

/// Conditional tail of `M_f(x)` given `f` on primes `<= sqrt(x)`.
/// `t = None` uses `t = 2 sqrt(x) R(x)`.
pub fn hoeffding_tail_check(
    config: &ExperimentConfig,
    x: u64,
    small_prime_seed: u64,
    trials: u64,
    t: Option<f64>,
    tables: &PrimeTables,
) -> Result<HoeffdingReport> {
    if x < 16 || x > tables.limit() {
        return Err(Error::invalid(format!("need 16 <= x <= {}, got {x}", tables.limit())));
    }
    if trials < 10_000 {
        return Err(Error::invalid(format!("need at least 10000 resamples, got {trials}")));
    }
    let r_x = r_of(x as f64, config.epsilon)?;
    let t = t.unwrap_or(2.0 * (x as f64).sqrt() * r_x);
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("bad threshold {t}")));
    }
    let r = isqrt(x);
    let base = SampledFunction::new(config.model, small_prime_seed, tables);
    let prefix = base.prefix_sums(r)?;
    let coeffs: Vec<(u64, Complex64)> =
        tables.primes_between(r, x).iter().map(|&p| (p as u64, prefix[(x / p as u64) as usize])).collect();
    let v0: f64 = coeffs.iter().map(|(_, c)| c.norm_sqr()).sum();
    let resample_base = derive_seed(config.seed_base, small_prime_seed);
    let t_comp = t / std::f64::consts::SQRT_2;
    let hits: Vec<(bool, bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|j| {
            let f = base.with_resampled_above(r, derive_seed(resample_base, j));
            let m: Complex64 = coeffs.iter().map(|&(p, c)| f.prime_value_unchecked(p) * c).sum();
            (m.norm() >= t, m.re.abs() >= t_comp, m.im.abs() >= t_comp)
        })
        .collect();
    let indicator = |k: usize| mean_of(hits.iter().map(|h| f64::from(u8::from([h.0, h.1, h.2][k]))));

    let degenerate = v0 == 0.0;
    let tail_bound = |prefactor: f64, denom: f64| {
        if t == 0.0 {
            prefactor
        } else if degenerate {
            0.0
        } else {
            prefactor * (-t * t / (denom * v0)).exp()
        }
    };
    let bound = tail_bound(2.0, 2.0);
    let component_tails = match config.model {
        Model::Rademacher => None,
        Model::Steinhaus => {
            Some((MomentReport::from_samples(&indicator(1), bound), MomentReport::from_samples(&indicator(2), bound)))
        }
    };
    let displayed_bound = if degenerate { 0.0 } else { (-4.0 * x as f64 * r_x * r_x / v0).exp() };
    Ok(HoeffdingReport {
        x,
        conditioning_seed: small_prime_seed,
        t,
        v0,
        report: MomentReport::from_samples(&indicator(0), bound),
        displayed_bound,
        component_tails,
        degenerate,
    })
}

/// `E|sum_{m <= y} f(m)|^2`: the squarefree count (Rademacher) or `y`.
fn second_moment(y: u64, model: Model, sf: &[u64]) -> f64 {
    match model {
        Model::Rademacher => sf[y as usize] as f64,
        Model::Steinhaus => y as f64,
    }
}

/// One step `k -> k+1` of
/// `Z_k = |sum_{n <= x_base, sqrt(x_base) < P(n) <= floor(sqrt(k))} f(n)|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZStep {
    pub x_base: u64,
    pub k: u64,
    /// The prime revealed by the step, when `k + 1` is its square.
    pub new_prime: Option<u64>,
    pub z_before: f64,
    /// `Z_k - mean Z_{k+1}`; violated when it exceeds 0 by more than 3 SE.
    pub deficit: MomentReport,
    /// Mean increment against its exact value `|sum_{m <= x_base/p} f(m)|^2`.
    pub increment: OracleReport,
}

/// Conditional increments of `Z` for `k` in `k_lo..k_hi`, conditioning on
/// the realization `conditioning_seed` and resampling the newly revealed
/// prime `resamples` times.
pub fn submartingale_check_z(
    config: &ExperimentConfig,
    x_base: u64,
    k_lo: u64,
    k_hi: u64,
    conditioning_seed: u64,
    resamples: u64,
    tables: &PrimeTables,
) -> Result<Vec<ZStep>> {
    if x_base < 2 || x_base > config.oracle_cap.min(tables.limit()) {
        return Err(Error::invalid(format!("x_base = {x_base} out of range")));
    }
    if k_lo < x_base || k_hi <= k_lo || k_hi - k_lo > 1_000_000 {
        return Err(Error::invalid(format!("need x_base <= k_lo < k_hi with a short window, got [{k_lo}, {k_hi})")));
    }
    if isqrt(k_hi) > tables.limit() {
        return Err(Error::invalid("window reaches beyond the table limit"));
    }
    if resamples < 2 {
        return Err(Error::invalid("need at least two resamples"));
    }
    let r0 = isqrt(x_base);
    let f = SampledFunction::new(config.model, conditioning_seed, tables);
    let prefix = f.prefix_sums(x_base / (r0 + 1))?;
    let mut s = sums::interval_sum_pconstraint(&f, 0, x_base, r0, isqrt(k_lo))?;
    let step_base = derive_seed(config.seed_base, conditioning_seed);
    let mut out = Vec::new();
    for k in k_lo..k_hi {
        let z = s.norm_sqr();
        let q = isqrt(k + 1);
        let new_prime = (q > isqrt(k) && tables.is_prime(q)).then_some(q);
        let step = match new_prime {
            None => ZStep {
                x_base,
                k,
                new_prime,
                z_before: z,
                deficit: MomentReport::new(0.0, 0.0, 0.0, resamples),
                increment: OracleReport::new(0.0, 0.0, 0.0, resamples),
            },
            Some(p) => {
                // Every n <= x_base with P(n) = p is p * m with m < p.
                let c = prefix[(x_base / p) as usize];
                let seeds = derive_seed(step_base, k);
                let incs: Vec<f64> = (0..resamples)
                    .into_par_iter()
                    .map(|j| {
                        let g = f.with_resampled_above(p - 1, derive_seed(seeds, j));
                        (s + g.prime_value_unchecked(p) * c).norm_sqr() - z
                    })
                    .collect();
                let acc = mean_of(incs);
                ZStep {
                    x_base,
                    k,
                    new_prime,
                    z_before: z,
                    deficit: MomentReport::new(-acc.mean(), acc.std_error(), 0.0, acc.count()),
                    increment: OracleReport::from_samples(&acc, c.norm_sqr()),
                }
            }
        };
        if let Some(p) = new_prime {
            s += f.prime_value_unchecked(p) * prefix[(x_base / p) as usize];
        }
        out.push(step);
    }
    Ok(out)
}

/// `count` steps `(x_base, k)` with `x_base` in `[x_lo, x_hi]`; even-indexed
/// steps reveal a prime, odd-indexed ones are arbitrary.
pub fn z_step_sample(seed: u64, count: usize, x_lo: u64, x_hi: u64, tables: &PrimeTables) -> Result<Vec<(u64, u64)>> {
    if x_lo < 4 || x_hi < x_lo {
        return Err(Error::invalid(format!("bad range [{x_lo}, {x_hi}]")));
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count as u64 {
        let x_base = x_lo + derive_seed(seed, 2 * i) % (x_hi - x_lo + 1);
        let r0 = isqrt(x_base);
        let k = if i % 2 == 0 {
            let window = tables.primes_between(r0, 2 * r0 + 2);
            let p = window[(derive_seed(seed, 2 * i + 1) % window.len() as u64) as usize] as u64;
            p * p - 1
        } else {
            x_base + derive_seed(seed, 2 * i + 1) % (3 * x_base)
        };
        out.push((x_base, k));
    }
    Ok(out)
}

/// A run of test points inside one block `(X_{ell-1}, X_ell]`, with the
/// integral truncated at a common `t_cut` so successive values are
/// comparable.
#[derive(Debug, Clone, PartialEq)]
pub struct YSequence {
    pub points: Vec<u64>,
    pub log_x_prev: f64,
    pub ell: u32,
    pub k_exp: f64,
    pub t_cut: f64,
    pub rel_tol: f64,
}

impl YSequence {
    /// Test points in `(X_1, x_hi]` of block `ell = 2`, which contains every
    /// test point above `X_1 = e^2` below `X_2 = e^{2^{2^K}}`.
    pub fn second_block(epsilon: f64, x_hi: u64, quad: &QuadConfig) -> Result<Self> {
        let k_exp = 1.0 / (4.0 * epsilon);
        let log_x_prev = 2.0;
        let points: Vec<u64> =
            test_points(epsilon, x_hi)?.into_iter().filter(|&x| (x as f64).ln() > log_x_prev).collect();
        let seq = Self {
            points,
            log_x_prev,
            ell: 2,
            k_exp,
            t_cut: quad.t_cut.unwrap_or_else(|| euler::default_t_cut(x_hi)),
            rel_tol: quad.rel_tol,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::invalid("empty Y sequence"));
        }
        if self.points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("Y sequence points must increase"));
        }
        if !(self.t_cut > 0.0 && self.t_cut.is_finite()) {
            return Err(Error::invalid(format!("bad truncation {}", self.t_cut)));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::invalid(format!("bad tolerance {}", self.rel_tol)));
        }
        euler::y_normalization_log((self.points[0] as f64).ln(), self.log_x_prev, self.ell, self.k_exp)?;
        Ok(())
    }

    /// `Y_x / I_x`, the factor applied to the bare integral.
    fn scale(&self, x: u64) -> f64 {
        let lx = (x as f64).ln();
        euler::y_normalization_log(lx, self.log_x_prev, self.ell, self.k_exp).unwrap_or(f64::NAN) / lx
    }

    fn last(&self) -> u64 {
        *self.points.last().unwrap_or(&0)
    }

    /// Node rule resolved on the realization `seed` at the last point.
    fn rule(&self, model: Model, seed: u64, tables: &PrimeTables) -> Result<(NodeRule, f64)> {
        let f = SampledFunction::new(model, seed, tables);
        NodeRule::converged_for(&EulerFactors::new(&f, self.last())?, self.t_cut, self.rel_tol)
    }

    /// Exact mean of the discretized `Y` at the last point.
    fn expected_last(&self, rule: &NodeRule, model: Model, tables: &PrimeTables) -> f64 {
        let x = self.last();
        self.scale(x) * euler::exact_product_expectation(0, x, model, tables) * rule.kernel_integral()
    }
}

/// One step `x_{i-1} -> x_i` of the `Y` sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct YStep {
    pub conditioning_seed: u64,
    pub x_prev: u64,
    pub x: u64,
    pub new_primes: Vec<u64>,
    pub y_before: f64,
    /// `Y_{x_{i-1}} - mean Y_{x_i}`; violated when above 0 by more than 3 SE.
    pub deficit: MomentReport,
    /// Mean of `Y_{x_i}` against its exact conditional mean.
    pub conditional_mean: OracleReport,
    pub quadrature_error: f64,
}

/// Conditional increments of `Y` along `seq`: `f` is fixed by
/// `conditioning_seed` up to `x_{i-1}` and primes in `(x_{i-1}, x_i]` are
/// resampled `resamples` times.
pub fn submartingale_check_y(
    seq: &YSequence,
    model: Model,
    conditioning_seed: u64,
    resamples: u64,
    seed_base: u64,
    tables: &PrimeTables,
) -> Result<Vec<YStep>> {
    seq.validate()?;
    if seq.last() > tables.limit() {
        return Err(Error::invalid("Y sequence exceeds the table limit"));
    }
    if resamples < 2 {
        return Err(Error::invalid("need at least two resamples"));
    }
    let (rule, quad_err) = seq.rule(model, conditioning_seed, tables)?;
    let f = SampledFunction::new(model, conditioning_seed, tables);
    let mut prod = NodeProduct::one(&rule);
    for &p in tables.primes_between(0, seq.points[0]) {
        prod.multiply_prime(&PrimePhases::new(&rule, p as u64), f.prime_value_unchecked(p as u64));
    }
    let step_base = derive_seed(seed_base, conditioning_seed);
    let mut out = Vec::new();
    for w in seq.points.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let base_integral = prod.integral();
        let y_before = seq.scale(x0) * base_integral;
        let new_primes: Vec<u64> = tables.primes_between(x0, x1).iter().map(|&p| p as u64).collect();
        let phases: Vec<PrimePhases> = new_primes.iter().map(|&p| PrimePhases::new(&rule, p)).collect();
        let exact = seq.scale(x1) * base_integral * euler::exact_product_expectation(x0, x1, model, tables);
        let seeds = derive_seed(step_base, x1);
        let ys: Vec<f64> = if new_primes.is_empty() {
            vec![seq.scale(x1) * base_integral; resamples as usize]
        } else {
            (0..resamples)
                .into_par_iter()
                .map(|j| {
                    let g = f.with_resampled_above(x0, derive_seed(seeds, j));
                    let extra: Vec<(&PrimePhases, Complex64)> =
                        phases.iter().map(|ph| (ph, g.prime_value_unchecked(ph.prime()))).collect();
                    seq.scale(x1) * prod.integral_with(&extra)
                })
                .collect()
        };
        let acc = mean_of(ys);
        out.push(YStep {
            conditioning_seed,
            x_prev: x0,
            x: x1,
            new_primes,
            y_before,
            deficit: MomentReport::new(y_before - acc.mean(), acc.std_error(), 0.0, acc.count()),
            conditional_mean: OracleReport::from_samples(&acc, exact),
            quadrature_error: quad_err,
        });
        for ph in &phases {
            prod.multiply_prime(ph, f.prime_value_unchecked(ph.prime()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceSpec {
    /// `X_k = value` for `len` steps.
    Constant { value: f64, len: usize },
    /// `Z_k` for `x_base <= k <= k_end`, recorded at each prime reveal
    /// (the sequence is constant between reveals).
    ZWindow { x_base: u64, k_end: u64 },
    /// `Y_{x_i}` along a run of test points.
    YGrid(YSequence),
}

impl SequenceSpec {
    pub fn label(&self) -> String {
        match self {
            SequenceSpec::Constant { value, len } => format!("constant:{value}:{len}"),
            SequenceSpec::ZWindow { x_base, k_end } => format!("z:{x_base}:{k_end}"),
            SequenceSpec::YGrid(s) => format!("y:{}:{}", s.points[0], s.last()),
        }
    }
}

/// Paths of a nonnegative submartingale together with the exact mean of
/// its last element.
struct Paths {
    paths: Vec<Vec<f64>>,
    expected_last: f64,
}

fn sequence_paths(
    spec: &SequenceSpec,
    model: Model,
    trials: u64,
    seed_base: u64,
    tables: &PrimeTables,
) -> Result<Paths> {
    match spec {
        SequenceSpec::Constant { value, len } => {
            if *len == 0 || !(*value >= 0.0) {
                return Err(Error::invalid("constant sequence needs len >= 1 and value >= 0"));
            }
            Ok(Paths { paths: vec![vec![*value; *len]; trials as usize], expected_last: *value })
        }
        SequenceSpec::ZWindow { x_base, k_end } => {
            let (x_base, k_end) = (*x_base, *k_end);
            if x_base < 4 || k_end < x_base || x_base > tables.limit() || isqrt(k_end) > tables.limit() {
                return Err(Error::invalid(format!("bad Z window x_base = {x_base}, k_end = {k_end}")));
            }
            let r0 = isqrt(x_base);
            let reveal: Vec<u64> = tables.primes_between(r0, isqrt(k_end)).iter().map(|&p| p as u64).collect();
            let sf = tables.squarefree_prefix(x_base / (r0 + 1))?;
            let expected_last = reveal.iter().map(|&p| second_moment(x_base / p, model, &sf)).sum();
            let paths = (0..trials)
                .into_par_iter()
                .map(|j| {
                    let f = SampledFunction::new(model, derive_seed(seed_base, j), tables);
                    let prefix = f.prefix_sums(x_base / (r0 + 1))?;
                    let mut s = Complex64::new(0.0, 0.0);
                    let mut path = Vec::with_capacity(reveal.len() + 1);
                    path.push(0.0);
                    for &p in &reveal {
                        s += f.prime_value_unchecked(p) * prefix[(x_base / p) as usize];
                        path.push(s.norm_sqr());
                    }
                    Ok(path)
                })
                .collect::<Result<_>>()?;
            Ok(Paths { paths, expected_last })
        }
        SequenceSpec::YGrid(seq) => {
            seq.validate()?;
            let (rule, _) = seq.rule(model, seed_base, tables)?;
            let expected_last = seq.expected_last(&rule, model, tables);
            let all_phases: Vec<PrimePhases> =
                tables.primes_between(0, seq.last()).iter().map(|&p| PrimePhases::new(&rule, p as u64)).collect();
            let paths = (0..trials)
                .into_par_iter()
                .map(|j| {
                    let f = SampledFunction::new(model, derive_seed(seed_base, j), tables);
                    let mut prod = NodeProduct::one(&rule);
                    let mut next = 0;
                    let mut path = Vec::with_capacity(seq.points.len());
                    for &x in &seq.points {
                        while next < all_phases.len() && all_phases[next].prime() <= x {
                            let ph = &all_phases[next];
                            prod.multiply_prime(ph, f.prime_value_unchecked(ph.prime()));
                            next += 1;
                        }
                        path.push(seq.scale(x) * prod.integral());
                    }
                    path
                })
                .collect();
            Ok(Paths { paths, expected_last })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoobMaximal {
    pub lambda: f64,
    /// Estimate of `lambda P(max_k X_k > lambda)`.
    pub lhs: f64,
    /// Estimate of `E[X_n]`.
    pub rhs: f64,
    /// Paired difference `lambda 1{max > lambda} - X_n` against 0.
    pub report: MomentReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoobLp {
    pub p: f64,
    /// Estimate of `E[(max_k X_k)^p]`.
    pub lhs: f64,
    /// Estimate of `(p/(p-1))^p max_k E[X_k^p]`.
    pub rhs: f64,
    /// Index `k` maximizing the estimated `E[X_k^p]`.
    pub argmax: usize,
    /// Paired difference `max^p - (p/(p-1))^p X_{argmax}^p` against 0.
    pub report: MomentReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoobReport {
    pub label: String,
    pub length: usize,
    pub trials: u64,
    /// Exact `E[X_n]`.
    pub expected_last: f64,
    pub maximal: Vec<DoobMaximal>,
    pub lp: Option<DoobLp>,
}

impl DoobReport {
    pub fn violated(&self) -> bool {
        self.maximal.iter().any(|m| m.report.violated) || self.lp.is_some_and(|l| l.report.violated)
    }
}

/// `lambda` values as multiples of the exact `E[X_n]`.
pub const DOOB_LAMBDA_MULTIPLES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// Doob's maximal inequality at each `lambda` (absolute values; `None`
/// uses [`DOOB_LAMBDA_MULTIPLES`] of the exact `E[X_n]`) and, when
/// `p_exponent` is given, the `L^p` inequality.
pub fn doob_check(
    spec: &SequenceSpec,
    model: Model,
    lambdas: Option<&[f64]>,
    p_exponent: Option<f64>,
    trials: u64,
    seed_base: u64,
    tables: &PrimeTables,
) -> Result<DoobReport> {
    if trials < 2 {
        return Err(Error::invalid("need at least two trials"));
    }
    if let Some(p) = p_exponent {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::invalid(format!("L^p exponent must exceed 1, got {p}")));
        }
    }
    let Paths { paths, expected_last } = sequence_paths(spec, model, trials, seed_base, tables)?;
    let lambdas: Vec<f64> = match lambdas {
        Some(l) => l.to_vec(),
        None => DOOB_LAMBDA_MULTIPLES.iter().map(|c| c * expected_last).collect(),
    };
    if lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::invalid("lambda must be positive"));
    }
    let report = doob_from_paths(&paths, &lambdas, p_exponent);
    Ok(DoobReport {
        label: spec.label(),
        length: paths.first().map_or(0, Vec::len),
        trials,
        expected_last,
        maximal: report.0,
        lp: report.1,
    })
}

/// Both Doob inequalities on sample paths of equal length.
pub fn doob_from_paths(
    paths: &[Vec<f64>],
    lambdas: &[f64],
    p_exponent: Option<f64>,
) -> (Vec<DoobMaximal>, Option<DoobLp>) {
    let maxes: Vec<f64> = paths.iter().map(|p| p.iter().copied().fold(0.0, f64::max)).collect();
    let lasts: Vec<f64> = paths.iter().map(|p| *p.last().unwrap_or(&0.0)).collect();
    let rhs = mean_of(lasts.iter().copied()).mean();
    let maximal = lambdas
        .iter()
        .map(|&lambda| {
            let hits = maxes.iter().map(|&m| if m > lambda { lambda } else { 0.0 });
            let lhs = mean_of(hits.clone()).mean();
            let diff = mean_of(hits.zip(&lasts).map(|(h, x)| h - x));
            DoobMaximal { lambda, lhs, rhs, report: MomentReport::from_samples(&diff, 0.0) }
        })
        .collect();
    let lp = p_exponent.map(|p| {
        let len = paths.first().map_or(0, Vec::len);
        let (argmax, _) = (0..len)
            .map(|k| (k, mean_of(paths.iter().map(|path| path[k].powf(p))).mean()))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        let c = (p / (p - 1.0)).powf(p);
        let lhs = mean_of(maxes.iter().map(|m| m.powf(p))).mean();
        let rhs = c * mean_of(paths.iter().map(|path| path[argmax].powf(p))).mean();
        let diff = mean_of(paths.iter().zip(&maxes).map(|(path, m)| m.powf(p) - c * path[argmax].powf(p)));
        DoobLp { p, lhs, rhs, argmax, report: MomentReport::from_samples(&diff, 0.0) }
    });
    (maximal, lp)
}

/// Distribution of the Parseval integral at `X_prev` against the threshold
/// `sqrt(T) 2^{(ell-1)^K} / sqrt((ell-1)^K)`, where `X_prev = X_{ell-1}`
/// gives `2^{(ell-1)^K} = log X_prev`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaEventReport {
    pub x_prev: u64,
    pub t_param: f64,
    pub threshold: f64,
    pub integrals: Quantiles,
    /// Fraction of trials whose integral exceeds the threshold.
    pub exceedance_fraction: f64,
    /// `T^{-1/4}`.
    pub budget: f64,
    /// MC mean of the truncated integral against `2 pi`-type exact mean
    /// `prod E|local factor|^2 * int_{|t|<=T} dt / |1/2+it|^2`.
    pub mean: OracleReport,
    /// Mean and standard error of
    /// `sqrt(integral) / (log X_prev / sqrt(log log X_prev))^{1/2}`.
    pub low_moment_ratio: (f64, f64),
}

pub fn sigma_event_statistic(
    config: &ExperimentConfig,
    x_prev: u64,
    trials: u64,
    tables: &PrimeTables,
) -> Result<SigmaEventReport> {
    config.quad.validate()?;
    if x_prev < 3 || x_prev > tables.limit() {
        return Err(Error::invalid(format!("need 3 <= X_prev <= {}, got {x_prev}", tables.limit())));
    }
    if !(config.t_param >= 1.0 && config.t_param.is_finite()) {
        return Err(Error::invalid(format!("T must be at least 1, got {}", config.t_param)));
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    let log_x = (x_prev as f64).ln();
    let power = log_x.log2();
    let threshold = config.t_param.sqrt() * log_x / power.sqrt();
    let t_cut = config.quad.t_cut.unwrap_or_else(|| euler::default_t_cut(x_prev));
    let quad = config.quad.with_t_cut(t_cut);
    let integrals: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|j| {
            let f = SampledFunction::new(config.model, derive_seed(config.seed_base, j), tables);
            euler::parseval_integral(&f, x_prev, &quad).map(|e| e.value)
        })
        .collect::<Result<_>>()?;
    let exceed = integrals.iter().filter(|&&v| v > threshold).count();
    let exact = euler::exact_product_expectation(0, x_prev, config.model, tables) * 4.0 * (2.0 * t_cut).atan();
    let scale = (log_x / log_x.ln().sqrt()).sqrt();
    let ratio = mean_of(integrals.iter().map(|v| v.max(0.0).sqrt() / scale));
    Ok(SigmaEventReport {
        x_prev,
        t_param: config.t_param,
        threshold,
        integrals: Quantiles::from_samples(&integrals).ok_or_else(|| Error::invalid("non-finite integral"))?,
        exceedance_fraction: exceed as f64 / trials as f64,
        budget: config.t_param.powf(-0.25),
        mean: OracleReport::from_samples(&mean_of(integrals.iter().copied()), exact),
        low_moment_ratio: (ratio.mean(), ratio.std_error()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceCheckpoint {
    pub x: u64,
    /// `V(x) sqrt(log log x) / x` over trials.
    pub ratio: Quantiles,
    /// MC mean of `V(x)` against `E[V(x)]`.
    pub mean: OracleReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEnsemble {
    pub checkpoints: Vec<VarianceCheckpoint>,
    /// Median ratio at the last checkpoint over that at the first.
    pub trend: f64,
}

/// Grid points closest below each power of ten, and the last grid point.
pub fn variance_checkpoints(grid: &[u64]) -> Vec<u64> {
    let mut out = Vec::new();
    let mut pow = 10u64;
    let Some(&last) = grid.last() else {
        return out;
    };
    while pow <= last {
        let i = grid.partition_point(|&x| x <= pow);
        if i > 0 {
            out.push(grid[i - 1]);
        }
        pow = match pow.checked_mul(10) {
            Some(p) => p,
            None => break,
        };
    }
    out.push(last);
    out.dedup();
    out
}

pub fn variance_ratio_ensemble(config: &ExperimentConfig, tables: &PrimeTables) -> Result<VarianceEnsemble> {
    config.validate(tables)?;
    let grid = test_points(config.epsilon, config.x_max)?;
    let xs = variance_checkpoints(&grid);
    variance_ensemble_at(config, &xs, tables)
}

/// [`variance_ratio_ensemble`] at explicit points `xs >= 3`.
pub fn variance_ensemble_at(config: &ExperimentConfig, xs: &[u64], tables: &PrimeTables) -> Result<VarianceEnsemble> {
    let Some(&x_top) = xs.iter().max() else {
        return Err(Error::invalid("no checkpoints"));
    };
    if xs.iter().any(|&x| x < 3) || x_top > tables.limit() {
        return Err(Error::invalid("checkpoints must lie in [3, limit]"));
    }
    let r_top = isqrt(x_top);
    let rows: Vec<Vec<f64>> = (0..config.trials)
        .into_par_iter()
        .map(|j| {
            let f = SampledFunction::new(config.model, derive_seed(config.seed_base, j), tables);
            let prefix = f.prefix_sums(r_top)?;
            Ok(xs
                .iter()
                .map(|&x| sums::conditional_variance_with_prefix(tables, x, &prefix[..=isqrt(x) as usize]))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut checkpoints = Vec::with_capacity(xs.len());
    for (i, &x) in xs.iter().enumerate() {
        let vs: Vec<f64> = rows.iter().map(|r| r[i]).collect();
        let ratios: Vec<f64> = vs.iter().map(|v| v * variance_scale(x)).collect();
        let exact = sums::exact_expected_variance(x, config.model, tables)?;
        checkpoints.push(VarianceCheckpoint {
            x,
            ratio: Quantiles::from_samples(&ratios).ok_or_else(|| Error::invalid("empty ensemble"))?,
            mean: OracleReport::from_samples(&mean_of(vs), exact),
        });
    }
    let trend = match (checkpoints.first(), checkpoints.last()) {
        (Some(a), Some(b)) => b.ratio.median / a.ratio.median,
        _ => f64::NAN,
    };
    Ok(VarianceEnsemble { checkpoints, trend })
}
