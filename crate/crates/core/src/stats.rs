//! Monte Carlo summaries: means with standard errors, quantiles, and the
//! three-standard-error decision rule used by every inequality suite.

/// Number of standard errors tolerated before an estimate counts as a
/// violation of its bound.
pub const SE_MULTIPLIER: f64 = 3.0;

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for MeanAccumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = MeanAccumulator::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Monte Carlo estimate checked against an upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub estimate: f64,
    pub std_error: f64,
    pub bound: f64,
    pub trials: u64,
    /// `estimate - 3 * std_error > bound`.
    pub violated: bool,
}

impl MomentReport {
    pub fn new(estimate: f64, std_error: f64, bound: f64, trials: u64) -> Self {
        let violated = !(estimate - SE_MULTIPLIER * std_error <= bound);
        Self { estimate, std_error, bound, trials, violated }
    }

    pub fn from_samples(samples: &MeanAccumulator, bound: f64) -> Self {
        Self::new(samples.mean(), samples.std_error(), bound, samples.count())
    }

    /// Distance of the estimate from the bound in standard errors (positive
    /// when the estimate exceeds the bound).
    pub fn z_score(&self) -> f64 {
        if self.std_error > 0.0 {
            (self.estimate - self.bound) / self.std_error
        } else if self.estimate > self.bound {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Monte Carlo estimate compared with an exactly known expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub estimate: f64,
    pub std_error: f64,
    pub exact: f64,
    pub trials: u64,
    /// `|estimate - exact| <= 3 * std_error`.
    pub agrees: bool,
}

impl OracleReport {
    pub fn new(estimate: f64, std_error: f64, exact: f64, trials: u64) -> Self {
        Self { estimate, std_error, exact, trials, agrees: within_se(estimate, std_error, exact) }
    }

    pub fn from_samples(samples: &MeanAccumulator, exact: f64) -> Self {
        Self::new(samples.mean(), samples.std_error(), exact, samples.count())
    }
}

/// Whether `estimate` agrees with an exact `target` to within three standard
/// errors (two-sided). A zero standard error demands exact agreement up to
/// `1e-12` relative.
pub fn within_se(estimate: f64, std_error: f64, target: f64) -> bool {
    let slack = SE_MULTIPLIER * std_error + 1e-12 * target.abs().max(1.0);
    (estimate - target).abs() <= slack
}

/// Empirical quantile with linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let q = q.clamp(0.0, 1.0);
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Distribution summary of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantiles {
    pub count: usize,
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
    pub mean: f64,
    /// Standard error of the median from the distribution-free order
    /// statistic confidence interval, `(x_(k) - x_(j)) / (2 * 1.96)`.
    pub median_se: f64,
}

impl Quantiles {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() || samples.iter().any(|x| x.is_nan()) {
            return None;
        }
        let mut s = samples.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = s.len();
        let mean = s.iter().sum::<f64>() / n as f64;
        let half_width = 1.96 * (n as f64).sqrt() / 2.0;
        let j = ((n as f64 / 2.0 - half_width).floor().max(0.0)) as usize;
        let k = ((n as f64 / 2.0 + half_width).ceil() as usize).min(n - 1);
        Some(Self {
            count: n,
            min: s[0],
            q05: quantile_sorted(&s, 0.05),
            q25: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q75: quantile_sorted(&s, 0.75),
            q95: quantile_sorted(&s, 0.95),
            max: s[n - 1],
            mean,
            median_se: (s[k] - s[j]) / (2.0 * 1.96),
        })
    }
}
