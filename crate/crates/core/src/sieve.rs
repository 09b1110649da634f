//! Smallest-prime-factor tables and the arithmetic functions built on them.
//!
//! [`PrimeTables`] holds one `u32` per integer up to `limit` (so a table for
//! `10^8` costs 400 MB) plus the ascending prime list. Everything else in the
//! crate reads factorizations out of these tables; they are immutable once
//! built and can be shared freely between threads.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::accum::KahanSum;
use crate::error::{Error, Result};

/// Largest table limit accepted by [`PrimeTables::build`]. At 4 bytes per
/// entry this is a 4 GiB `spf` array.
pub const MAX_LIMIT: u64 = 1 << 30;

const CACHE_MAGIC: [u8; 8] = *b"RMFSPF\x00\x01";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeTables {
    limit: u64,
    spf: Vec<u32>,
    primes: Vec<u32>,
}

/// Prime factorization with primes in strictly increasing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub n: u64,
    pub factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn product(&self) -> u64 {
        self.factors.iter().map(|&(p, e)| p.pow(e)).product()
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }
}

fn alloc_zeroed(len: usize) -> Result<Vec<u32>> {
    let mut v = Vec::new();
    v.try_reserve_exact(len).map_err(|e| Error::Resource(format!("cannot allocate {len} table entries: {e}")))?;
    v.resize(len, 0);
    Ok(v)
}

impl PrimeTables {
    /// Linear sieve for smallest prime factors up to `limit`.
    pub fn build(limit: u64) -> Result<Self> {
        if limit < 2 {
            return Err(Error::invalid(format!("table limit must be >= 2, got {limit}")));
        }
        if limit > MAX_LIMIT {
            return Err(Error::Resource(format!("table limit {limit} exceeds the supported maximum {MAX_LIMIT}")));
        }
        let n = limit as usize;
        let mut spf = alloc_zeroed(n + 1)?;
        let mut primes: Vec<u32> = Vec::new();
        spf[1] = 1;
        for i in 2..=n {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                if p > si {
                    break;
                }
                let ip = i * p as usize;
                if ip > n {
                    break;
                }
                spf[ip] = p;
            }
        }
        Ok(Self { limit, spf, primes })
    }

    fn from_spf(limit: u64, spf: Vec<u32>) -> Result<Self> {
        if spf.len() as u64 != limit + 1 || spf.get(1) != Some(&1) {
            return Err(Error::Cache("spf array has the wrong shape".into()));
        }
        let mut primes = Vec::new();
        for (n, &s) in spf.iter().enumerate().skip(2) {
            let s = s as usize;
            if s < 2 || s > n || n % s != 0 {
                return Err(Error::Cache(format!("spf[{n}] = {s} is not a factor")));
            }
            if s == n {
                primes.push(n as u32);
            }
        }
        Ok(Self { limit, spf, primes })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// The raw smallest-prime-factor array; `spf()[1] == 1`, index 0 unused.
    pub fn spf(&self) -> &[u32] {
        &self.spf
    }

    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    #[inline]
    pub fn smallest_prime_factor(&self, n: u64) -> u64 {
        self.spf[n as usize] as u64
    }

    fn check_range(&self, n: u64) -> Result<()> {
        if n == 0 || n > self.limit {
            return Err(Error::invalid(format!("{n} is outside the table range [1, {}]", self.limit)));
        }
        Ok(())
    }

    fn check_upper(&self, x: u64) -> Result<()> {
        if x > self.limit {
            return Err(Error::invalid(format!("{x} exceeds the table limit {}", self.limit)));
        }
        Ok(())
    }

    pub fn is_prime(&self, n: u64) -> bool {
        n >= 2 && n <= self.limit && self.spf[n as usize] as u64 == n
    }

    /// Number of primes `<= x` (x clamped to the table limit).
    pub fn prime_count(&self, x: u64) -> usize {
        let x = x.min(self.limit);
        self.primes.partition_point(|&p| (p as u64) <= x)
    }

    /// Primes in the half-open interval `(lo, hi]`.
    pub fn primes_between(&self, lo: u64, hi: u64) -> &[u32] {
        if hi <= lo {
            return &[];
        }
        let a = self.prime_count(lo);
        let b = self.prime_count(hi);
        &self.primes[a..b.max(a)]
    }

    pub fn factorize(&self, n: u64) -> Result<Factorization> {
        self.check_range(n)?;
        let mut factors: Vec<(u64, u32)> = Vec::new();
        let mut m = n as usize;
        while m > 1 {
            let p = self.spf[m] as usize;
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            factors.push((p as u64, e));
        }
        Ok(Factorization { n, factors })
    }

    /// Calls `visit(p, e)` for each prime power exactly dividing `n`, in
    /// increasing order of `p`. No bounds checking.
    #[inline]
    pub(crate) fn for_each_prime_power(&self, n: u64, mut visit: impl FnMut(u64, u32)) {
        let mut m = n as usize;
        while m > 1 {
            let p = self.spf[m] as usize;
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            visit(p as u64, e);
        }
    }

    /// `P(n)`. `P(1)` is undefined and reported as an error.
    pub fn largest_prime_factor(&self, n: u64) -> Result<u64> {
        if n < 2 {
            return Err(Error::invalid("largest prime factor of n < 2 is undefined"));
        }
        self.check_range(n)?;
        Ok(self.largest_prime_factor_unchecked(n))
    }

    #[inline]
    pub(crate) fn largest_prime_factor_unchecked(&self, n: u64) -> u64 {
        let mut m = n as usize;
        let mut last = 1;
        while m > 1 {
            let p = self.spf[m] as usize;
            last = p;
            m /= p;
        }
        last as u64
    }

    /// `P(n)` for every `n <= upto`, with the entry for 0 and 1 set to 1.
    pub fn largest_prime_factor_table(&self, upto: u64) -> Result<Vec<u32>> {
        self.check_upper(upto)?;
        let n = upto as usize;
        let mut lpf = alloc_zeroed(n + 1)?;
        if n >= 1 {
            lpf[1] = 1;
        }
        for i in 2..=n {
            let p = self.spf[i];
            lpf[i] = p.max(lpf[i / p as usize]);
        }
        if n >= 1 {
            lpf[0] = 1;
        }
        Ok(lpf)
    }

    pub fn mobius(&self, n: u64) -> Result<i8> {
        self.check_range(n)?;
        Ok(self.mobius_unchecked(n))
    }

    #[inline]
    pub(crate) fn mobius_unchecked(&self, n: u64) -> i8 {
        let mut m = n as usize;
        let mut sign = 1i8;
        while m > 1 {
            let p = self.spf[m] as usize;
            m /= p;
            if m % p == 0 {
                return 0;
            }
            sign = -sign;
        }
        sign
    }

    /// `d_m(n)`, the number of ordered `m`-tuples with product `n`.
    pub fn divisor_m(&self, n: u64, m: u32) -> Result<u128> {
        self.check_range(n)?;
        if m == 0 {
            return Err(Error::invalid("divisor function order must be >= 1"));
        }
        let mut acc: u128 = 1;
        let mut overflow = false;
        self.for_each_prime_power(n, |_, e| {
            if overflow {
                return;
            }
            match binomial_u128(e as u64 + m as u64 - 1, e as u64).and_then(|b| acc.checked_mul(b)) {
                Some(v) => acc = v,
                None => overflow = true,
            }
        });
        if overflow {
            return Err(Error::Overflow(format!("d_{m}({n}) does not fit in u128")));
        }
        Ok(acc)
    }

    /// Exact `sum_{n <= x} d_m(n)`.
    pub fn divisor_partial_sum(&self, x: u64, m: u32) -> Result<u128> {
        self.check_upper(x)?;
        let mut total: u128 = 0;
        for n in 1..=x {
            total = total
                .checked_add(self.divisor_m(n, m)?)
                .ok_or_else(|| Error::Overflow(format!("sum of d_{m}(n) up to {x}")))?;
        }
        Ok(total)
    }

    /// Count of squarefree `n <= x`.
    pub fn squarefree_count(&self, x: u64) -> Result<u64> {
        self.check_upper(x)?;
        Ok((1..=x).filter(|&n| self.mobius_unchecked(n) != 0).count() as u64)
    }

    /// Cumulative squarefree counts: entry `k` is `#{n <= k : mu(n) != 0}`.
    pub fn squarefree_prefix(&self, upto: u64) -> Result<Vec<u64>> {
        self.check_upper(upto)?;
        let mut out = Vec::with_capacity(upto as usize + 1);
        out.push(0);
        let mut c = 0;
        for n in 1..=upto {
            if self.mobius_unchecked(n) != 0 {
                c += 1;
            }
            out.push(c);
        }
        Ok(out)
    }

    fn prime_weight_sum(&self, a: u64, b: u64, w: impl Fn(f64) -> f64) -> Result<f64> {
        self.check_upper(b)?;
        if a > b {
            return Err(Error::invalid(format!("empty range: a = {a} > b = {b}")));
        }
        let sum: KahanSum = self.primes_between(a, b).iter().map(|&p| w(p as f64)).collect();
        Ok(sum.value())
    }

    /// `sum_{a < p <= b} 1/p`, compensated.
    pub fn mertens_reciprocal_sum(&self, a: u64, b: u64) -> Result<f64> {
        self.prime_weight_sum(a, b, |p| 1.0 / p)
    }

    /// `sum_{a < p <= b} log(p)/p`, compensated.
    pub fn mertens_log_sum(&self, a: u64, b: u64) -> Result<f64> {
        self.prime_weight_sum(a, b, |p| p.ln() / p)
    }

    /// Writes the `spf` array to `path`: 8-byte magic, little-endian `u64`
    /// limit, then `limit + 1` little-endian `u32` entries.
    pub fn save_cache(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&CACHE_MAGIC)?;
        w.write_all(&self.limit.to_le_bytes())?;
        for &s in &self.spf {
            w.write_all(&s.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a cache written by [`save_cache`](Self::save_cache). The stored
    /// limit must equal `expected_limit` when one is given.
    pub fn load_cache(path: &Path, expected_limit: Option<u64>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if magic != CACHE_MAGIC {
            return Err(Error::Cache("bad magic".into()));
        }
        let mut lim = [0u8; 8];
        r.read_exact(&mut lim)?;
        let limit = u64::from_le_bytes(lim);
        if let Some(want) = expected_limit {
            if want != limit {
                return Err(Error::Cache(format!("cached limit {limit} does not match requested {want}")));
            }
        }
        if !(2..=MAX_LIMIT).contains(&limit) {
            return Err(Error::Cache(format!("cached limit {limit} out of range")));
        }
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() as u64 != 4 * (limit + 1) {
            return Err(Error::Cache(format!("expected {} payload bytes, found {}", 4 * (limit + 1), bytes.len())));
        }
        let spf = bytes.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Self::from_spf(limit, spf)
    }
}

fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 1..=k as u128 {
        // r * (n - k + i) is divisible by i after the multiplication.
        r = r.checked_mul(n as u128 - k as u128 + i)? / i;
    }
    Some(r)
}

/// Integer square root: the largest `r` with `r * r <= n`.
pub fn isqrt(n: u64) -> u64 {
    if n < 2 {
        return n;
    }
    let mut r = (n as f64).sqrt() as u64;
    while r.checked_mul(r).map_or(true, |s| s > n) {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|s| s <= n) {
        r += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_division_spf(n: u64) -> u64 {
        (2..=n).find(|d| n % d == 0).unwrap()
    }

    #[test]
    fn limit_ten() {
        let t = PrimeTables::build(10).unwrap();
        assert_eq!(&t.spf()[1..], &[1, 2, 3, 2, 5, 2, 7, 2, 3, 2]);
        assert_eq!(t.primes(), &[2, 3, 5, 7]);
    }

    #[test]
    fn smallest_tables() {
        assert_eq!(PrimeTables::build(2).unwrap().primes(), &[2]);
        assert!(matches!(PrimeTables::build(1), Err(Error::InvalidArgument(_))));
        assert!(matches!(PrimeTables::build(0), Err(Error::InvalidArgument(_))));
        assert!(matches!(PrimeTables::build(MAX_LIMIT + 1), Err(Error::Resource(_))));
    }

    #[test]
    fn prime_count_thirty() {
        let t = PrimeTables::build(30).unwrap();
        let brute = (2..=30u64).filter(|&n| trial_division_spf(n) == n).count();
        assert_eq!(brute, 10);
        assert_eq!(t.primes().len(), 10);
    }

    #[test]
    fn spf_matches_trial_division() {
        let t = PrimeTables::build(5000).unwrap();
        for n in 2..=5000 {
            assert_eq!(t.smallest_prime_factor(n), trial_division_spf(n), "n = {n}");
        }
    }

    #[test]
    fn factorize_examples() {
        let t = PrimeTables::build(100).unwrap();
        assert!(t.factorize(1).unwrap().factors.is_empty());
        assert_eq!(t.factorize(12).unwrap().factors, vec![(2, 2), (3, 1)]);
        assert_eq!(t.factorize(97).unwrap().factors, vec![(97, 1)]);
        assert!(t.factorize(0).is_err());
        assert!(t.factorize(101).is_err());
    }

    #[test]
    fn largest_prime_factor_examples() {
        let t = PrimeTables::build(100).unwrap();
        assert_eq!(t.largest_prime_factor(10).unwrap(), 5);
        assert_eq!(t.largest_prime_factor(2).unwrap(), 2);
        assert_eq!(t.largest_prime_factor(97).unwrap(), 97);
        assert!(t.largest_prime_factor(1).is_err());
        let lpf = t.largest_prime_factor_table(100).unwrap();
        for n in 2..=100 {
            assert_eq!(lpf[n as usize] as u64, t.largest_prime_factor(n).unwrap());
        }
    }

    #[test]
    fn mobius_examples() {
        let t = PrimeTables::build(100).unwrap();
        assert_eq!(t.mobius(1).unwrap(), 1);
        assert_eq!(t.mobius(6).unwrap(), 1);
        assert_eq!(t.mobius(12).unwrap(), 0);
        assert_eq!(t.mobius(30).unwrap(), -1);
        assert!(t.mobius(0).is_err());
    }

    fn brute_tuples(n: u64, m: u32) -> u64 {
        if m == 1 {
            return 1;
        }
        (1..=n).filter(|d| n % d == 0).map(|d| brute_tuples(n / d, m - 1)).sum()
    }

    #[test]
    fn divisor_examples() {
        let t = PrimeTables::build(100).unwrap();
        for n in 1..=50 {
            assert_eq!(t.divisor_m(n, 1).unwrap(), 1);
        }
        assert_eq!(brute_tuples(4, 3), 6);
        assert_eq!(t.divisor_m(4, 3).unwrap(), 6);
        for p in [2, 3, 5, 7, 97] {
            assert_eq!(t.divisor_m(p, 3).unwrap(), 3);
        }
        for n in 1..=60 {
            for m in 1..=4 {
                assert_eq!(t.divisor_m(n, m).unwrap(), brute_tuples(n, m) as u128);
            }
        }
        assert!(t.divisor_m(5, 0).is_err());
    }

    #[test]
    fn divisor_overflow_is_reported() {
        let t = PrimeTables::build(1 << 20).unwrap();
        // d_m(2^20) = C(m + 19, 20), which leaves u128 for very large m.
        assert!(matches!(t.divisor_m(1 << 20, u32::MAX), Err(Error::Overflow(_))));
        assert!(t.divisor_m(1 << 20, 100).is_ok());
    }

    #[test]
    fn divisor_partial_sums() {
        let t = PrimeTables::build(100).unwrap();
        for m in 1..=5 {
            assert_eq!(t.divisor_partial_sum(1, m).unwrap(), 1);
        }
        assert_eq!(t.divisor_partial_sum(10, 2).unwrap(), 27);
        assert!(t.divisor_partial_sum(101, 2).is_err());
    }

    #[test]
    fn squarefree_examples() {
        let t = PrimeTables::build(100).unwrap();
        assert_eq!(t.squarefree_count(1).unwrap(), 1);
        assert_eq!(t.squarefree_count(10).unwrap(), 7);
        assert_eq!(t.squarefree_count(100).unwrap(), 61);
        let pre = t.squarefree_prefix(100).unwrap();
        assert_eq!(pre[100], 61);
        assert_eq!(pre[0], 0);
    }

    #[test]
    fn mertens_examples() {
        let t = PrimeTables::build(100).unwrap();
        let s = t.mertens_reciprocal_sum(1, 10).unwrap();
        assert!((s - (0.5 + 1.0 / 3.0 + 0.2 + 1.0 / 7.0)).abs() < 1e-15);
        assert!((s - 1.176_190_476_190_476).abs() < 1e-12);
        assert_eq!(t.mertens_reciprocal_sum(7, 10).unwrap(), 0.0);
        let l = t.mertens_log_sum(1, 2).unwrap();
        assert!((l - 2f64.ln() / 2.0).abs() < 1e-15);
        let l = t.mertens_log_sum(1, 10).unwrap();
        let want = 0.5 * 2f64.ln() + 3f64.ln() / 3.0 + 5f64.ln() / 5.0 + 7f64.ln() / 7.0;
        assert!((l - want).abs() < 1e-14);
        assert_eq!(t.mertens_log_sum(5, 5).unwrap(), 0.0);
        assert!(t.mertens_reciprocal_sum(10, 5).is_err());
    }

    #[test]
    fn isqrt_boundaries() {
        for r in 0..2000u64 {
            assert_eq!(isqrt(r * r), r);
            if r > 0 {
                assert_eq!(isqrt(r * r - 1), r - 1);
            }
        }
        assert_eq!(isqrt(u64::MAX), u32::MAX as u64);
    }

    #[test]
    fn cache_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spf.bin");
        let t = PrimeTables::build(1000).unwrap();
        t.save_cache(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"RMFSPF\x00\x01");
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 1000);
        assert_eq!(bytes.len(), 16 + 4 * 1001);

        assert_eq!(PrimeTables::load_cache(&path, Some(1000)).unwrap(), t);
        assert!(matches!(PrimeTables::load_cache(&path, Some(999)), Err(Error::Cache(_))));

        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(PrimeTables::load_cache(&path, None), Err(Error::Cache(_))));

        let mut bad = bytes;
        bad.truncate(bad.len() - 4);
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(PrimeTables::load_cache(&path, None), Err(Error::Cache(_))));
    }
}
