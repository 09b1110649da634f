//! Partial sums over integers with a large prime factor.
//!
//! Every `n <= x` with `P(n) > sqrt(x)` factors uniquely as `n = p * m` with
//! `sqrt(x) < p <= x` prime and `m <= x / p`, so
//!
//! ```text
//! M_f(x) = sum_{sqrt(x) < p <= x} f(p) * A_f(floor(x / p)),   A_f(y) = sum_{m <= y} f(m)
//! V(x)   = sum_{sqrt(x) < p <= x} |A_f(floor(x / p))|^2
//! ```
//!
//! and only `A_f` on `[0, floor(sqrt(x))]` is ever needed. Membership
//! `p > sqrt(x)` is decided as `p * p > x` in integer arithmetic, which is the
//! same as `p > isqrt(x)`.

use num_complex::Complex64;

use crate::accum::{ComplexKahanSum, KahanSum};
use crate::error::{Error, Result};
use crate::rmf::{Model, SampledFunction};
use crate::sieve::{isqrt, PrimeTables};

/// Largest `x` accepted by the enumeration oracles.
pub const ORACLE_CAP: u64 = 1_000_000;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumStatistics {
    pub x: u64,
    /// `M_f(x)`
    pub m_f: Complex64,
    /// `V(x)`
    pub v: f64,
    /// `A_f(x)`
    pub a_full: Complex64,
}

fn check_x(tables: &PrimeTables, x: u64) -> Result<()> {
    if x > tables.limit() {
        return Err(Error::invalid(format!("x = {x} exceeds the table limit {}", tables.limit())));
    }
    Ok(())
}

/// `M_f(x)` via the `p * m` decomposition.
pub fn large_prime_sum(f: &SampledFunction<'_>, x: u64) -> Result<Complex64> {
    check_x(f.tables(), x)?;
    let prefix = f.prefix_sums(isqrt(x))?;
    Ok(large_prime_sum_with_prefix(f, x, &prefix))
}

/// `M_f(x)` given `A_f` on at least `[0, isqrt(x)]`.
pub fn large_prime_sum_with_prefix(f: &SampledFunction<'_>, x: u64, prefix: &[Complex64]) -> Complex64 {
    let r = isqrt(x);
    debug_assert!(prefix.len() as u64 > r);
    let mut acc = ComplexKahanSum::new();
    for &p in f.tables().primes_between(r, x) {
        let p = p as u64;
        acc.add(f.prime_value_unchecked(p) * prefix[(x / p) as usize]);
    }
    acc.value()
}

/// `M_f(x)` by direct enumeration of `n <= x` with `P(n)^2 > x`.
pub fn large_prime_sum_bruteforce(f: &SampledFunction<'_>, x: u64) -> Result<Complex64> {
    check_x(f.tables(), x)?;
    if x > ORACLE_CAP {
        return Err(Error::invalid(format!("x = {x} is above the oracle cap {ORACLE_CAP}")));
    }
    let tables = f.tables();
    let mut acc = ComplexKahanSum::new();
    for n in 2..=x {
        let p = tables.largest_prime_factor_unchecked(n);
        if p * p > x {
            acc.add(f.value_at(n)?);
        }
    }
    Ok(acc.value())
}

/// `V(x) = sum_{sqrt(x) < p <= x} |A_f(floor(x/p))|^2`.
pub fn conditional_variance(f: &SampledFunction<'_>, x: u64) -> Result<f64> {
    check_x(f.tables(), x)?;
    let prefix = f.prefix_sums(isqrt(x))?;
    Ok(conditional_variance_with_prefix(f.tables(), x, &prefix))
}

/// `V(x)` given `A_f` on `[0, isqrt(x)]`, grouping primes that share the
/// quotient `floor(x/p)`.
pub fn conditional_variance_with_prefix(tables: &PrimeTables, x: u64, prefix: &[Complex64]) -> f64 {
    quotient_weighted_sum(tables, x, |q| prefix[q as usize].norm_sqr())
}

/// `sum_{sqrt(x) < p <= x} w(floor(x/p))`, evaluated one quotient at a time.
fn quotient_weighted_sum(tables: &PrimeTables, x: u64, w: impl Fn(u64) -> f64) -> f64 {
    let r = isqrt(x);
    let mut acc = KahanSum::new();
    let mut q = 1;
    while q <= r {
        let hi = x / q;
        if hi <= r {
            break;
        }
        let lo = (x / (q + 1)).max(r);
        let count = tables.prime_count(hi) - tables.prime_count(lo);
        if count > 0 {
            acc.add(count as f64 * w(q));
        }
        q += 1;
    }
    acc.value()
}

/// `E[V(x)]`, which by orthogonality of the `f(n)` is
/// `sum_{sqrt(x) < p <= x} Q(floor(x/p))` with `Q(y) = y` (Steinhaus) or the
/// squarefree count up to `y` (Rademacher).
pub fn exact_expected_variance(x: u64, model: Model, tables: &PrimeTables) -> Result<f64> {
    check_x(tables, x)?;
    let r = isqrt(x);
    Ok(match model {
        Model::Steinhaus => quotient_weighted_sum(tables, x, |q| q as f64),
        Model::Rademacher => {
            let sf = tables.squarefree_prefix(r)?;
            quotient_weighted_sum(tables, x, |q| sf[q as usize] as f64)
        }
    })
}

/// `sum f(n)` over `n_lo < n <= n_hi` with `p_lo < P(n) <= p_hi`. `n = 1`
/// has no largest prime factor and is never included.
pub fn interval_sum_pconstraint(
    f: &SampledFunction<'_>,
    n_lo: u64,
    n_hi: u64,
    p_lo: u64,
    p_hi: u64,
) -> Result<Complex64> {
    let tables = f.tables();
    check_x(tables, n_hi)?;
    if n_lo > n_hi {
        return Err(Error::invalid(format!("n_lo = {n_lo} > n_hi = {n_hi}")));
    }
    if p_lo > p_hi {
        return Err(Error::invalid(format!("p_lo = {p_lo} > p_hi = {p_hi}")));
    }
    if p_lo == p_hi || n_lo == n_hi {
        return Ok(ZERO);
    }
    let vals = f.values_upto(n_hi)?;
    let mut acc = ComplexKahanSum::new();
    for n in (n_lo + 1).max(2)..=n_hi {
        let p = tables.largest_prime_factor_unchecked(n);
        if p > p_lo && p <= p_hi {
            acc.add(vals[n as usize]);
        }
    }
    Ok(acc.value())
}

/// Splits `M_f(x)` for `x_prev <= x` into
/// `(M_f(x_prev), -sum_{n <= x_prev, sqrt(x_prev) < P(n) <= sqrt(x)} f(n),
///  sum_{x_prev < n <= x, P(n) > sqrt(x)} f(n))`, whose total is `M_f(x)`.
pub fn increment_decomposition_check(
    f: &SampledFunction<'_>,
    x_prev: u64,
    x: u64,
) -> Result<(Complex64, Complex64, Complex64)> {
    if x_prev < 2 || x_prev > x {
        return Err(Error::invalid(format!("need 2 <= x_prev <= x, got x_prev = {x_prev}, x = {x}")));
    }
    check_x(f.tables(), x)?;
    let (r_prev, r) = (isqrt(x_prev), isqrt(x));
    let base = large_prime_sum(f, x_prev)?;
    let lost = -interval_sum_pconstraint(f, 0, x_prev, r_prev, r)?;
    let gained = interval_sum_pconstraint(f, x_prev, x, r, x)?;
    Ok((base, lost, gained))
}

pub fn sum_statistics(f: &SampledFunction<'_>, x: u64) -> Result<SumStatistics> {
    check_x(f.tables(), x)?;
    let prefix = f.prefix_sums(x)?;
    Ok(SumStatistics {
        x,
        m_f: large_prime_sum_with_prefix(f, x, &prefix),
        v: conditional_variance_with_prefix(f.tables(), x, &prefix),
        a_full: prefix[x as usize],
    })
}

/// Walks `x = 1, 2, ..., x_max` maintaining `M_f(x)` and `V(x)`
/// incrementally and calls `visit(x, M_f(x), V(x))` at every step.
///
/// Going from `y - 1` to `y`:
/// * if `P(y)^2 > y` then `y` joins `M_f`, and the unique prime `p = P(y)`
///   with `p | y`, `p^2 > y` moves its quotient from `y/p - 1` to `y/p`;
/// * if `y = q^2` with `q` prime, every `n < y` with `P(n) = q` (namely
///   `q * m`, `m < q`) drops out, removing `f(q) A_f(q - 1)` from `M_f` and
///   `|A_f(q - 1)|^2` from `V`.
///
/// `lpf` must hold `P(n)` for `n <= x_max` (see
/// [`PrimeTables::largest_prime_factor_table`]). Total cost is `O(x_max)`.
pub fn scan_large_prime_sums(
    f: &SampledFunction<'_>,
    x_max: u64,
    lpf: &[u32],
    mut visit: impl FnMut(u64, Complex64, f64),
) -> Result<()> {
    let tables = f.tables();
    check_x(tables, x_max)?;
    if (lpf.len() as u64) <= x_max {
        return Err(Error::invalid("largest-prime-factor table is too short"));
    }
    if x_max == 0 {
        return Ok(());
    }
    let vals = f.values_upto(x_max)?;
    let prefix = crate::rmf::prefix_from_values(&vals);
    let mut m = ComplexKahanSum::new();
    let mut v = KahanSum::new();
    visit(1, ZERO, 0.0);
    for y in 2..=x_max {
        let p = lpf[y as usize] as u64;
        if p * p > y {
            m.add(vals[y as usize]);
            let q = (y / p) as usize;
            v.add(prefix[q].norm_sqr() - prefix[q - 1].norm_sqr());
        }
        let r = isqrt(y);
        if r * r == y && tables.is_prime(r) {
            let a = prefix[(r - 1) as usize];
            m.add(-(vals[r as usize] * a));
            v.add(-a.norm_sqr());
        }
        visit(y, m.value(), v.value().max(0.0));
    }
    Ok(())
}
