//! Seeded Rademacher and Steinhaus random multiplicative functions.
//!
//! The value at a prime `p` is a pure function of `(seed, p)`: a SplitMix64
//! stream keyed by the seed and indexed by `p`. Nothing depends on the order in
//! which primes are visited, so lazy, parallel and partial evaluation all see
//! the same realization.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::accum::ComplexKahanSum;
use crate::error::{Error, Result};
use crate::sieve::PrimeTables;

/// Value type for `f(n)` and every sum built from it.
pub type ComplexValue = Complex64;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const KEY_SALT: u64 = 0x5851_F42D_4C95_7F2D;
const DERIVE_SALT: u64 = 0x632B_E59B_D9B4_E019;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn stream_key(seed: u64) -> u64 {
    mix64(seed ^ KEY_SALT)
}

/// Counter-mode draw: the `counter`-th output of the stream keyed by `key`.
#[inline]
fn draw(key: u64, counter: u64) -> u64 {
    mix64(key.wrapping_add(counter.wrapping_mul(GOLDEN_GAMMA)))
}

/// Child seed number `index` of `base`. Used to give trial `j` of an ensemble,
/// or resample `j` of a conditional experiment, its own independent stream.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix64(mix64(base) ^ mix64(index.wrapping_add(DERIVE_SALT)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    Rademacher,
    Steinhaus,
}

impl Model {
    pub const ALL: [Model; 2] = [Model::Rademacher, Model::Steinhaus];

    pub fn name(self) -> &'static str {
        match self {
            Model::Rademacher => "rademacher",
            Model::Steinhaus => "steinhaus",
        }
    }

    /// `f(p)` from a uniform 64-bit word.
    #[inline]
    pub fn value_from_bits(self, u: u64) -> Complex64 {
        match self {
            Model::Rademacher => {
                if u >> 63 == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(-1.0, 0.0)
                }
            }
            Model::Steinhaus => {
                let theta = TAU * (u as f64 / 18_446_744_073_709_551_616.0);
                let (s, c) = theta.sin_cos();
                Complex64::new(c, s)
            }
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rademacher" => Ok(Model::Rademacher),
            "steinhaus" => Ok(Model::Steinhaus),
            other => Err(Error::invalid(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PrimeSource {
    Seeded {
        key: u64,
        /// Primes above `above` come from a second stream.
        resample: Option<(u64, u64)>,
    },
    /// Diagnostic realization with `f(p) = 0` for every prime.
    Zero,
}

/// One realization of a random multiplicative function.
///
/// Prime values are recomputed on demand; hot loops such as
/// [`values_upto`](Self::values_upto) and the Euler-product code materialize
/// what they need locally.
#[derive(Debug, Clone, Copy)]
pub struct SampledFunction<'a> {
    model: Model,
    seed: u64,
    source: PrimeSource,
    tables: &'a PrimeTables,
}

impl<'a> SampledFunction<'a> {
    pub fn new(model: Model, seed: u64, tables: &'a PrimeTables) -> Self {
        Self { model, seed, source: PrimeSource::Seeded { key: stream_key(seed), resample: None }, tables }
    }

    /// Keeps this realization on primes `<= above` and redraws every larger
    /// prime from `seed`. This is how conditioning on `f(p), p <= above` is
    /// realized.
    pub fn with_resampled_above(self, above: u64, seed: u64) -> Self {
        let source = match self.source {
            PrimeSource::Seeded { key, .. } => PrimeSource::Seeded { key, resample: Some((above, stream_key(seed))) },
            PrimeSource::Zero => PrimeSource::Zero,
        };
        Self { source, ..self }
    }

    /// The realization with every prime value equal to zero, so `f = 1_{n=1}`.
    pub fn zero(model: Model, tables: &'a PrimeTables) -> Self {
        Self { model, seed: 0, source: PrimeSource::Zero, tables }
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tables(&self) -> &'a PrimeTables {
        self.tables
    }

    pub fn prime_value(&self, p: u64) -> Result<Complex64> {
        if !self.tables.is_prime(p) {
            return Err(Error::invalid(format!("{p} is not a prime within the table limit {}", self.tables.limit())));
        }
        Ok(self.prime_value_unchecked(p))
    }

    /// `f(p)` without checking that `p` is prime.
    #[inline]
    pub fn prime_value_unchecked(&self, p: u64) -> Complex64 {
        match self.source {
            PrimeSource::Zero => Complex64::new(0.0, 0.0),
            PrimeSource::Seeded { key, resample } => {
                let key = match resample {
                    Some((above, k)) if p > above => k,
                    _ => key,
                };
                self.model.value_from_bits(draw(key, p))
            }
        }
    }

    pub fn value_at(&self, n: u64) -> Result<Complex64> {
        let f = self.tables.factorize(n)?;
        let mut v = Complex64::new(1.0, 0.0);
        for (p, e) in f.factors {
            if self.model == Model::Rademacher && e >= 2 {
                return Ok(Complex64::new(0.0, 0.0));
            }
            v *= self.prime_value_unchecked(p).powu(e);
        }
        Ok(v)
    }

    /// `f(0..=y)` with `f(0) = 0`, in one multiplicative pass over the
    /// smallest-prime-factor table.
    pub fn values_upto(&self, y: u64) -> Result<Vec<Complex64>> {
        if y > self.tables.limit() {
            return Err(Error::invalid(format!("{y} exceeds the table limit {}", self.tables.limit())));
        }
        let n = y as usize;
        let spf = self.tables.spf();
        let mut vals: Vec<Complex64> = Vec::new();
        vals.try_reserve_exact(n + 1).map_err(|e| Error::Resource(format!("cannot allocate {} values: {e}", n + 1)))?;
        vals.push(Complex64::new(0.0, 0.0));
        if n >= 1 {
            vals.push(Complex64::new(1.0, 0.0));
        }
        for k in 2..=n {
            let p = spf[k] as usize;
            let v = if p == k {
                self.prime_value_unchecked(k as u64)
            } else {
                let rest = k / p;
                if self.model == Model::Rademacher && spf[rest] as usize == p {
                    Complex64::new(0.0, 0.0)
                } else {
                    vals[p] * vals[rest]
                }
            };
            vals.push(v);
        }
        Ok(vals)
    }

    /// `A[k] = sum_{m <= k} f(m)` for `0 <= k <= y`.
    pub fn prefix_sums(&self, y: u64) -> Result<Vec<Complex64>> {
        let vals = self.values_upto(y)?;
        Ok(prefix_from_values(&vals))
    }
}

/// Running compensated sums of `vals`; `vals[0]` is ignored and the output
/// starts at zero.
pub fn prefix_from_values(vals: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(vals.len());
    let mut acc = ComplexKahanSum::new();
    out.push(Complex64::new(0.0, 0.0));
    for &v in vals.iter().skip(1) {
        acc.add(v);
        out.push(acc.value());
    }
    out
}
