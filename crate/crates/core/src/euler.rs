//! Truncated Euler products on the critical line and their `L^2` integrals.
//!
//! For a realization `f` the truncated product at `s = 1/2 + it` is
//!
//! ```text
//! Rademacher: S_x(s) = prod_{p <= x} (1 + f(p) p^{-s})
//! Steinhaus:  S_x(s) = prod_{p <= x} (1 - f(p) p^{-s})^{-1}
//! ```
//!
//! Products are accumulated as a sum of log-magnitudes and a sum of phases.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, QuadConfig};
use crate::rmf::{derive_seed, Model, SampledFunction};
use crate::sieve::PrimeTables;
use crate::stats::{MeanAccumulator, OracleReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerProductValue {
    pub x: u64,
    pub t: f64,
    pub value: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralEstimate {
    /// Quadrature value of the integral truncated to `|t| <= truncation_t`.
    pub value: f64,
    pub truncation_t: f64,
    pub quadrature_error_bound: f64,
    /// Bound on the discarded mass from `|t| > truncation_t`.
    pub tail_bound: f64,
}

impl IntegralEstimate {
    pub fn total_error_bound(&self) -> f64 {
        self.quadrature_error_bound + self.tail_bound
    }
}

#[derive(Debug, Clone, Copy)]
struct LocalFactor {
    log_p: f64,
    /// `f(p) / sqrt(p)`
    coeff: Complex64,
}

/// Prime data of one realization over a range of primes, materialized once
/// so the product can be evaluated at many `t`.
#[derive(Debug, Clone)]
pub struct EulerFactors {
    model: Model,
    factors: Vec<LocalFactor>,
}

impl EulerFactors {
    /// Factors for the primes `p <= x`.
    pub fn new(f: &SampledFunction<'_>, x: u64) -> Result<Self> {
        Self::for_range(f, 0, x)
    }

    /// Factors for the primes `lo < p <= hi`.
    pub fn for_range(f: &SampledFunction<'_>, lo: u64, hi: u64) -> Result<Self> {
        let tables = f.tables();
        if hi > tables.limit() {
            return Err(Error::invalid(format!("x = {hi} exceeds the table limit {}", tables.limit())));
        }
        let factors = tables
            .primes_between(lo, hi)
            .iter()
            .map(|&p| {
                let p = p as f64;
                LocalFactor { log_p: p.ln(), coeff: f.prime_value_unchecked(p as u64) / p.sqrt() }
            })
            .collect();
        Ok(Self { model: f.model(), factors })
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// `(log |S|, arg S)` at `1/2 + it`, with the phase unreduced.
    pub fn log_abs_and_arg(&self, t: f64) -> (f64, f64) {
        let mut log_abs = 0.0;
        let mut arg = 0.0;
        for lf in &self.factors {
            let (s, c) = (-t * lf.log_p).sin_cos();
            let z = lf.coeff * Complex64::new(c, s);
            match self.model {
                Model::Rademacher => {
                    let w = Complex64::new(1.0 + z.re, z.im);
                    log_abs += 0.5 * (2.0 * z.re + z.norm_sqr()).ln_1p();
                    arg += w.im.atan2(w.re);
                }
                Model::Steinhaus => {
                    let w = Complex64::new(1.0 - z.re, -z.im);
                    log_abs -= 0.5 * (-2.0 * z.re + z.norm_sqr()).ln_1p();
                    arg -= w.im.atan2(w.re);
                }
            }
        }
        (log_abs, arg)
    }

    pub fn value(&self, t: f64) -> Complex64 {
        let (la, arg) = self.log_abs_and_arg(t);
        Complex64::from_polar(la.exp(), arg)
    }

    /// `|S(1/2 + it)|^2`.
    pub fn abs_sq(&self, t: f64) -> f64 {
        let mut log_sq = 0.0;
        for lf in &self.factors {
            let c = (t * lf.log_p).cos();
            let s = -(t * lf.log_p).sin();
            let re = lf.coeff.re * c - lf.coeff.im * s;
            let n2 = lf.coeff.norm_sqr();
            match self.model {
                Model::Rademacher => log_sq += (2.0 * re + n2).ln_1p(),
                Model::Steinhaus => log_sq -= (-2.0 * re + n2).ln_1p(),
            }
        }
        log_sq.exp()
    }

    /// Upper bound for `|S(1/2 + it)|` over all real `t`.
    pub fn sup_abs(&self) -> f64 {
        let log: f64 = self
            .factors
            .iter()
            .map(|lf| {
                let r = lf.coeff.norm();
                match self.model {
                    Model::Rademacher => r.ln_1p(),
                    Model::Steinhaus => -(-r).ln_1p(),
                }
            })
            .sum();
        log.exp()
    }

    fn is_real(&self) -> bool {
        self.factors.iter().all(|lf| lf.coeff.im == 0.0)
    }

    /// `log x`-scale oscillation frequency used to seed the quadrature mesh.
    fn frequency_hint(&self) -> f64 {
        self.factors.last().map_or(1.0, |lf| lf.log_p.max(1.0))
    }
}

pub fn euler_product(f: &SampledFunction<'_>, x: u64, t: f64) -> Result<EulerProductValue> {
    if !t.is_finite() {
        return Err(Error::invalid(format!("t must be finite, got {t}")));
    }
    let factors = EulerFactors::new(f, x)?;
    Ok(EulerProductValue { x, t, value: factors.value(t) })
}

/// Default truncation `T = 50 log x` (at least 50).
pub fn default_t_cut(x: u64) -> f64 {
    50.0 * (x.max(3) as f64).ln()
}

fn initial_panels(t_cut: f64, freq: f64) -> usize {
    ((t_cut * freq / 2.0).ceil() as usize).clamp(64, 1 << 20)
}

/// `int_{-inf}^{inf} |S(1/2+it)|^2 / |1/2+it|^2 dt` for precomputed factors.
pub fn parseval_integral_of(factors: &EulerFactors, t_cut: f64, quad: &QuadConfig) -> Result<IntegralEstimate> {
    quad.validate()?;
    let panels = initial_panels(t_cut, factors.frequency_hint());
    let r = if factors.is_real() {
        // |S(1/2 - it)| = |S(1/2 + it)| when every f(p) is real.
        let half = adaptive_simpson(|t| factors.abs_sq(t) / (0.25 + t * t), 0.0, t_cut, panels, quad)?;
        crate::quad::QuadResult {
            value: 2.0 * half.value,
            error_estimate: 2.0 * half.error_estimate,
            evaluations: half.evaluations,
        }
    } else {
        adaptive_simpson(|t| (factors.abs_sq(t) + factors.abs_sq(-t)) / (0.25 + t * t), 0.0, t_cut, panels, quad)?
    };
    let sup = factors.sup_abs();
    // Two tails, each int_T^inf dt / (1/4 + t^2) = 2 arctan(1 / (2T)).
    let tail = sup * sup * 4.0 * (0.5 / t_cut).atan();
    Ok(IntegralEstimate {
        value: r.value,
        truncation_t: t_cut,
        quadrature_error_bound: r.error_estimate,
        tail_bound: tail,
    })
}

/// Bare integral of `|S_x(1/2+it) / (1/2+it)|^2` over the real line.
pub fn parseval_integral(f: &SampledFunction<'_>, x: u64, quad: &QuadConfig) -> Result<IntegralEstimate> {
    let factors = EulerFactors::new(f, x)?;
    let t_cut = quad.t_cut.unwrap_or_else(|| default_t_cut(x));
    parseval_integral_of(&factors, t_cut, quad)
}

/// `prod_{lo < p <= hi} (1 + 1/p)` (Rademacher) or `(1 - 1/p)^{-1}`
/// (Steinhaus): the exact mean of `|prod_{lo < p <= hi} factor|^2`.
pub fn exact_product_expectation(lo: u64, hi: u64, model: Model, tables: &PrimeTables) -> f64 {
    let log: f64 = tables
        .primes_between(lo, hi)
        .iter()
        .map(|&p| {
            let inv = 1.0 / p as f64;
            match model {
                Model::Rademacher => inv.ln_1p(),
                Model::Steinhaus => -(-inv).ln_1p(),
            }
        })
        .sum();
    log.exp()
}

/// `E[int |S_x / (1/2+it)|^2 dt] = 2 pi E|S_x|^2`, since the mean of
/// `|S_x(1/2+it)|^2` does not depend on `t`.
pub fn expected_parseval_integral(x: u64, model: Model, tables: &PrimeTables) -> f64 {
    2.0 * PI * exact_product_expectation(0, x, model, tables)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParsevalCheck {
    /// Closed-form `int_0^inf |sum_{n <= u} a_n|^2 u^{-1-2 sigma} du`.
    pub lhs: f64,
    /// Quadrature of `(1/2pi) int |A(sigma+it)/(sigma+it)|^2 dt` over `|t| <= T`.
    pub rhs: f64,
    pub quadrature_error_bound: f64,
    pub tail_bound: f64,
}

impl ParsevalCheck {
    pub fn combined_error_bound(&self) -> f64 {
        self.quadrature_error_bound + self.tail_bound
    }

    pub fn agrees(&self) -> bool {
        (self.lhs - self.rhs).abs() <= self.combined_error_bound()
    }
}

/// Checks Parseval's identity for the Dirichlet series of a finitely
/// supported sequence; `coeffs[k]` is `a_{k+1}`.
pub fn parseval_identity_check(coeffs: &[Complex64], sigma: f64, quad: &QuadConfig) -> Result<ParsevalCheck> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if coeffs.is_empty() {
        return Err(Error::invalid("empty coefficient sequence"));
    }
    quad.validate()?;
    let n = coeffs.len();

    // The partial sum is constant on [k, k+1).
    let mut lhs = 0.0;
    let mut partial = Complex64::new(0.0, 0.0);
    for (i, a) in coeffs.iter().enumerate() {
        let k = (i + 1) as f64;
        partial += a;
        let w = if i + 1 < n {
            (k.powf(-2.0 * sigma) - (k + 1.0).powf(-2.0 * sigma)) / (2.0 * sigma)
        } else {
            k.powf(-2.0 * sigma) / (2.0 * sigma)
        };
        lhs += partial.norm_sqr() * w;
    }

    let terms: Vec<(f64, Complex64)> = coeffs
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let ln = ((i + 1) as f64).ln();
            (ln, a * (-sigma * ln).exp())
        })
        .collect();
    let dirichlet_sq = |t: f64| -> f64 {
        let mut s = Complex64::new(0.0, 0.0);
        for &(ln, c) in &terms {
            let (sn, cs) = (-t * ln).sin_cos();
            s += c * Complex64::new(cs, sn);
        }
        s.norm_sqr()
    };
    let t_cut = quad.t_cut.unwrap_or_else(|| default_t_cut(n as u64 + 1));
    let freq = ((n as f64).ln()).max(1.0);
    let r = adaptive_simpson(
        |t| (dirichlet_sq(t) + dirichlet_sq(-t)) / (sigma * sigma + t * t),
        0.0,
        t_cut,
        initial_panels(t_cut, freq),
        quad,
    )?;
    let sup: f64 = terms.iter().map(|(_, c)| c.norm()).sum();
    // (1/2pi) * 2 * int_T^inf dt/(sigma^2+t^2) = atan(sigma/T) / (pi sigma)
    let tail = sup * sup * (sigma / t_cut).atan() / (PI * sigma);
    Ok(ParsevalCheck {
        lhs,
        rhs: r.value / (2.0 * PI),
        quadrature_error_bound: r.error_estimate / (2.0 * PI),
        tail_bound: tail,
    })
}

/// Monte Carlo check of `E prod_{lo<p<=hi} |local factor(1/2+it)|^2` against
/// its exact value. `lo = 0` or `1` includes every prime up to `hi`.
pub fn expected_product_identity_check(
    lo: u64,
    hi: u64,
    t: f64,
    model: Model,
    trials: u64,
    seed_base: u64,
    tables: &PrimeTables,
) -> Result<OracleReport> {
    if trials < 100 {
        return Err(Error::invalid(format!("need at least 100 trials, got {trials}")));
    }
    if lo > hi || hi > tables.limit() {
        return Err(Error::invalid(format!("need lo <= hi <= {}, got lo = {lo}, hi = {hi}", tables.limit())));
    }
    let exact = exact_product_expectation(lo, hi, model, tables);
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|j| {
            let f = SampledFunction::new(model, derive_seed(seed_base, j), tables);
            EulerFactors::for_range(&f, lo, hi).map(|e| e.abs_sq(t))
        })
        .collect::<Result<_>>()?;
    let acc: MeanAccumulator = samples.into_iter().collect();
    Ok(OracleReport::from_samples(&acc, exact))
}

/// `(log x_i / log X_prev)^{1 / (ell - 1)^K}`.
pub fn y_normalization(x_i: f64, x_prev: f64, ell: u32, k_exp: f64) -> Result<f64> {
    if !(x_prev > 1.0 && x_prev <= x_i) {
        return Err(Error::invalid(format!("need 1 < X_prev <= x_i, got X_prev = {x_prev}, x_i = {x_i}")));
    }
    y_normalization_log(x_i.ln(), x_prev.ln(), ell, k_exp)
}

/// [`y_normalization`] from `log x_i` and `log X_prev`, for block boundaries
/// too large to represent.
pub fn y_normalization_log(log_x_i: f64, log_x_prev: f64, ell: u32, k_exp: f64) -> Result<f64> {
    if ell < 2 {
        return Err(Error::invalid(format!("block index must be >= 2, got {ell}")));
    }
    if !(log_x_prev > 0.0 && log_x_prev <= log_x_i) {
        return Err(Error::invalid(format!("need 0 < log X_prev <= log x_i, got {log_x_prev} and {log_x_i}")));
    }
    let power = 1.0 / ((ell - 1) as f64).powf(k_exp);
    Ok((log_x_i / log_x_prev).powf(power))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YStatistic {
    pub value: f64,
    pub normalization: f64,
    pub integral: IntegralEstimate,
}

/// `Y_{x_i} = (log x_i)^{-1} (log x_i / log X_prev)^{1/(ell-1)^K} int |S_{x_i}/(1/2+it)|^2 dt`.
pub fn y_statistic(
    f: &SampledFunction<'_>,
    x_i: u64,
    x_prev: f64,
    ell: u32,
    k_exp: f64,
    quad: &QuadConfig,
) -> Result<YStatistic> {
    let normalization = y_normalization(x_i as f64, x_prev, ell, k_exp)?;
    let integral = parseval_integral(f, x_i, quad)?;
    Ok(YStatistic { value: normalization * integral.value / (x_i as f64).ln(), normalization, integral })
}

/// Composite Simpson rule on a fixed set of nodes for
/// `int_{|t| <= T} |S(1/2+it)|^2 / |1/2+it|^2 dt`, with the kernel folded
/// into the weights. Rademacher integrands are even, so the rule covers
/// `[0, T]` with doubled weights; Steinhaus covers `[-T, T]`.
///
/// Used where many realizations sharing most prime values are integrated:
/// the product over the shared primes is tabulated once per node.
#[derive(Debug, Clone)]
pub struct NodeRule {
    model: Model,
    t_cut: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl NodeRule {
    pub fn new(model: Model, t_cut: f64, panels: usize) -> Result<Self> {
        if !(t_cut > 0.0 && t_cut.is_finite()) {
            return Err(Error::invalid(format!("truncation T must be positive, got {t_cut}")));
        }
        if panels == 0 {
            return Err(Error::invalid("need at least one panel"));
        }
        let (a, scale) = match model {
            Model::Rademacher => (0.0, 2.0),
            Model::Steinhaus => (-t_cut, 1.0),
        };
        let n = 2 * panels;
        let h = (t_cut - a) / n as f64;
        let mut nodes = Vec::with_capacity(n + 1);
        let mut weights = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let t = if j == n { t_cut } else { a + h * j as f64 };
            let simpson = if j == 0 || j == n {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            nodes.push(t);
            weights.push(scale * simpson * h / 3.0 / (0.25 + t * t));
        }
        Ok(Self { model, t_cut, nodes, weights })
    }

    /// Doubles the panel count until the rule and its refinement agree on
    /// `factors` to `rel_tol`. Returns the refined rule and the Richardson
    /// error estimate of its value on `factors`.
    pub fn converged_for(factors: &EulerFactors, t_cut: f64, rel_tol: f64) -> Result<(Self, f64)> {
        let mut panels = initial_panels(t_cut, factors.frequency_hint());
        let coarse = Self::new(factors.model, t_cut, panels)?;
        let mut coarse_value = NodeProduct::from_factors(&coarse, factors).integral();
        loop {
            panels *= 2;
            let fine = Self::new(factors.model, t_cut, panels)?;
            let fine_value = NodeProduct::from_factors(&fine, factors).integral();
            let err = (fine_value - coarse_value).abs() / 15.0;
            if err <= rel_tol * fine_value.abs() {
                return Ok((fine, err));
            }
            if panels > 1 << 22 {
                return Err(Error::Quadrature { partial: fine_value, error_estimate: err, evaluations: fine.len() });
            }
            coarse_value = fine_value;
        }
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn t_cut(&self) -> f64 {
        self.t_cut
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// The rule applied to `|S|^2 = 1`; approximates `4 arctan(2T)`.
    pub fn kernel_integral(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// `cos(t ln p) / sqrt(p)` and `sin(t ln p) / sqrt(p)` on the nodes of a rule.
#[derive(Debug, Clone)]
pub struct PrimePhases {
    p: u64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl PrimePhases {
    pub fn new(rule: &NodeRule, p: u64) -> Self {
        let lp = (p as f64).ln();
        let r = 1.0 / (p as f64).sqrt();
        let (sin, cos) = rule
            .nodes
            .iter()
            .map(|&t| {
                let (s, c) = (t * lp).sin_cos();
                (s * r, c * r)
            })
            .unzip();
        Self { p, cos, sin }
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    /// `|local factor|^2` at node `j` for `f(p) = v`.
    #[inline]
    fn factor(&self, model: Model, j: usize, v: Complex64) -> f64 {
        // Re(v p^{-1/2 - it}) with p^{-it} = cos - i sin.
        let re = v.re * self.cos[j] + v.im * self.sin[j];
        let n2 = v.norm_sqr() / self.p as f64;
        match model {
            Model::Rademacher => 1.0 + 2.0 * re + n2,
            Model::Steinhaus => 1.0 / (1.0 - 2.0 * re + n2),
        }
    }
}

/// `|S(1/2+it)|^2` tabulated on the nodes of a [`NodeRule`].
#[derive(Debug, Clone)]
pub struct NodeProduct<'r> {
    rule: &'r NodeRule,
    values: Vec<f64>,
}

impl<'r> NodeProduct<'r> {
    /// The empty product.
    pub fn one(rule: &'r NodeRule) -> Self {
        Self { rule, values: vec![1.0; rule.len()] }
    }

    pub fn from_factors(rule: &'r NodeRule, factors: &EulerFactors) -> Self {
        let values = rule.nodes.iter().map(|&t| factors.abs_sq(t)).collect();
        Self { rule, values }
    }

    pub fn multiply_prime(&mut self, phases: &PrimePhases, v: Complex64) {
        let model = self.rule.model;
        for (j, x) in self.values.iter_mut().enumerate() {
            *x *= phases.factor(model, j, v);
        }
    }

    pub fn integral(&self) -> f64 {
        self.rule.integrate(&self.values)
    }

    /// The integral after multiplying in several more primes, without
    /// storing the product.
    pub fn integral_with(&self, extra: &[(&PrimePhases, Complex64)]) -> f64 {
        let model = self.rule.model;
        self.values
            .iter()
            .zip(&self.rule.weights)
            .enumerate()
            .map(|(j, (x, w))| {
                let mut g = w * x;
                for (ph, v) in extra {
                    g *= ph.factor(model, j, *v);
                }
                g
            })
            .sum()
    }

    /// The integral after multiplying in one more prime, without storing it.
    pub fn integral_with_prime(&self, phases: &PrimePhases, v: Complex64) -> f64 {
        let model = self.rule.model;
        self.values
            .iter()
            .zip(&self.rule.weights)
            .enumerate()
            .map(|(j, (x, w))| w * x * phases.factor(model, j, v))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tables() -> PrimeTables {
        PrimeTables::build(2000).unwrap()
    }

    #[test]
    fn empty_and_single_factor_products() {
        let t = tables();
        let f = SampledFunction::new(Model::Rademacher, 3, &t);
        assert_eq!(euler_product(&f, 1, 0.3).unwrap().value, Complex64::new(1.0, 0.0));
        let v = euler_product(&f, 2, 0.0).unwrap().value;
        let want = 1.0 + f.prime_value(2).unwrap().re / 2f64.sqrt();
        assert!((v - Complex64::new(want, 0.0)).norm() < 1e-15);
        assert!(euler_product(&f, 2, f64::NAN).is_err());
    }

    #[test]
    fn product_matches_direct_multiplication() {
        let t = tables();
        for model in Model::ALL {
            let f = SampledFunction::new(model, 11, &t);
            for &tt in &[0.0, 0.7, -3.1, 25.0] {
                let mut direct = Complex64::new(1.0, 0.0);
                for &p in t.primes_between(0, 500) {
                    let p = p as f64;
                    let z = f.prime_value(p as u64).unwrap() * Complex64::new(-0.5 * p.ln(), -tt * p.ln()).exp();
                    direct *= match model {
                        Model::Rademacher => 1.0 + z,
                        Model::Steinhaus => 1.0 / (1.0 - z),
                    };
                }
                let e = EulerFactors::new(&f, 500).unwrap();
                let got = e.value(tt);
                assert!((got - direct).norm() < 1e-9 * direct.norm(), "{model} t = {tt}");
                assert!((e.abs_sq(tt) - direct.norm_sqr()).abs() < 1e-9 * direct.norm_sqr());
                assert!(direct.norm() <= e.sup_abs());
            }
        }
    }

    #[test]
    fn zero_realization_integrates_to_two_pi() {
        let t = tables();
        let z = SampledFunction::zero(Model::Rademacher, &t);
        let quad = QuadConfig::default().with_rel_tol(1e-10);
        let est = parseval_integral(&z, 100, &quad).unwrap();
        assert!((est.value + est.tail_bound - 2.0 * PI).abs() < 1e-8);
        assert!((est.value - 2.0 * PI).abs() <= est.total_error_bound() + 1e-9);
        assert!(est.tail_bound > 0.0);
    }

    #[test]
    fn parseval_integral_self_convergence() {
        let t = tables();
        for model in Model::ALL {
            let f = SampledFunction::new(model, 42, &t);
            let quad = QuadConfig::default().with_rel_tol(1e-8).with_t_cut(60.0);
            let est = parseval_integral(&f, 10, &quad).unwrap();
            // Independent composite trapezoid on the same truncated range.
            let factors = EulerFactors::new(&f, 10).unwrap();
            let g = |s: f64| factors.abs_sq(s) / (0.25 + s * s);
            let trap = |h: f64| {
                let n = (120.0 / h).round() as usize;
                let mut acc = 0.5 * (g(-60.0) + g(60.0));
                for i in 1..n {
                    acc += g(-60.0 + i as f64 * h);
                }
                acc * h
            };
            let (t1, t2) = (trap(0.01), trap(0.005));
            // Richardson estimate of the trapezoid error.
            let trap_err = (t1 - t2).abs() / 3.0;
            assert!(
                (est.value - t2).abs() <= est.quadrature_error_bound + trap_err + 1e-9,
                "{model}: {} vs {t2}",
                est.value
            );
        }
    }

    #[test]
    fn doubling_truncation_stays_within_tail_bound() {
        let t = tables();
        let f = SampledFunction::new(Model::Steinhaus, 5, &t);
        let quad = QuadConfig::default().with_rel_tol(1e-8);
        let a = parseval_integral(&f, 30, &quad.with_t_cut(80.0)).unwrap();
        let b = parseval_integral(&f, 30, &quad.with_t_cut(160.0)).unwrap();
        assert!(b.value >= a.value - a.quadrature_error_bound - b.quadrature_error_bound);
        assert!(b.value - a.value <= a.tail_bound + a.quadrature_error_bound + b.quadrature_error_bound);
    }

    #[test]
    fn parseval_identity_examples() {
        let quad = QuadConfig::default().with_rel_tol(1e-11).with_t_cut(5000.0);
        let one = [Complex64::new(1.0, 0.0)];
        let c = parseval_identity_check(&one, 0.5, &quad).unwrap();
        assert!((c.lhs - 1.0).abs() < 1e-15);
        assert!(c.agrees());
        assert!((c.rhs - 1.0).abs() < 1e-3);

        let two = [Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)];
        let c = parseval_identity_check(&two, 0.5, &quad).unwrap();
        assert!((c.lhs - 2.5).abs() < 1e-14);
        assert!(c.agrees(), "{c:?}");

        assert!(parseval_identity_check(&one, 0.0, &quad).is_err());
        assert!(parseval_identity_check(&one, -1.0, &quad).is_err());
    }

    #[test]
    fn product_identity_edge_cases() {
        let t = tables();
        let r = expected_product_identity_check(7, 7, 0.0, Model::Rademacher, 100, 0, &t).unwrap();
        assert_eq!((r.estimate, r.std_error, r.exact), (1.0, 0.0, 1.0));
        assert!(r.agrees);
        assert!(expected_product_identity_check(2, 3, 0.0, Model::Rademacher, 99, 0, &t).is_err());
        assert!((exact_product_expectation(2, 3, Model::Rademacher, &t) - 4.0 / 3.0).abs() < 1e-15);
        assert!((exact_product_expectation(0, 3, Model::Steinhaus, &t) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn y_normalization_examples() {
        assert_eq!(y_normalization(500.0, 500.0, 3, 2.5).unwrap(), 1.0);
        let n = y_normalization(1000.0, 100.0, 2, 2.5).unwrap();
        assert!((n - 1.5).abs() < 1e-14);
        let mut last = 0.0;
        for x in [100.0, 150.0, 400.0, 1e4, 1e6] {
            let n = y_normalization(x, 100.0, 3, 2.5).unwrap();
            assert!(n >= last && n >= 1.0);
            last = n;
        }
        assert!(y_normalization(10.0, 100.0, 2, 2.5).is_err());
        assert!(y_normalization(1000.0, 100.0, 1, 2.5).is_err());
    }

    #[test]
    fn y_statistic_scales_the_integral() {
        let t = tables();
        let f = SampledFunction::new(Model::Rademacher, 2, &t);
        let quad = QuadConfig::default().with_rel_tol(1e-7);
        let y = y_statistic(&f, 1000, 100.0, 2, 2.5, &quad).unwrap();
        assert!((y.normalization - 1.5).abs() < 1e-14);
        let bare = parseval_integral(&f, 1000, &quad).unwrap();
        assert!((y.value - 1.5 * bare.value / 1000f64.ln()).abs() < 1e-9 * y.value);
    }

    #[test]
    fn node_rule_matches_adaptive_quadrature() {
        let t = tables();
        for model in Model::ALL {
            let f = SampledFunction::new(model, 8, &t);
            let factors = EulerFactors::new(&f, 30).unwrap();
            let (rule, err) = NodeRule::converged_for(&factors, 100.0, 1e-9).unwrap();
            let nodes = NodeProduct::from_factors(&rule, &factors).integral();
            let quad = QuadConfig::default().with_rel_tol(1e-10).with_t_cut(100.0);
            let adaptive = parseval_integral(&f, 30, &quad).unwrap();
            assert!(
                (nodes - adaptive.value).abs() <= 1e-7 * adaptive.value + err,
                "{model}: {nodes} vs {}",
                adaptive.value
            );
            let kernel = 4.0 * (2.0 * 100.0f64).atan();
            assert!((rule.kernel_integral() - kernel).abs() < 1e-8);
        }
    }

    #[test]
    fn node_product_extends_one_prime_at_a_time() {
        let t = tables();
        for model in Model::ALL {
            let f = SampledFunction::new(model, 9, &t);
            let rule = NodeRule::new(model, 40.0, 2000).unwrap();
            let mut prod = NodeProduct::one(&rule);
            for &p in t.primes_between(0, 23) {
                let ph = PrimePhases::new(&rule, p as u64);
                let v = f.prime_value(p as u64).unwrap();
                let ahead = prod.integral_with_prime(&ph, v);
                prod.multiply_prime(&ph, v);
                assert!((prod.integral() - ahead).abs() < 1e-12 * ahead);
            }
            let direct = NodeProduct::from_factors(&rule, &EulerFactors::new(&f, 23).unwrap());
            assert!((prod.integral() - direct.integral()).abs() < 1e-10 * direct.integral());
        }
    }
}
