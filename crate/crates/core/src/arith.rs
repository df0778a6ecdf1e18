//! Primes, factorization and divisor machinery shared by every other module.
//!
//! Exact values use [`ExactInt`] (unsigned, arbitrary precision) and
//! [`ExactRational`] (signed ratio in lowest terms). Fixed-width arithmetic
//! appears only behind checked operations.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

/// Arbitrary-precision non-negative integer used for all counts and B-values.
pub type ExactInt = BigUint;
/// Arbitrary-precision rational in lowest terms with positive denominator.
pub type ExactRational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("zero has no factorization or divisor list")]
    Zero,
}

/// Prime-exponent representation of a positive integer.
///
/// Primes are strictly increasing and every stored exponent is at least one;
/// the empty factor list is `1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FactorizationMap {
    factors: Vec<(u64, u32)>,
    value: u64,
}

impl FactorizationMap {
    pub fn one() -> Self {
        FactorizationMap {
            factors: Vec::new(),
            value: 1,
        }
    }

    /// Builds a map from `(prime, exponent)` pairs, checking the invariants.
    ///
    /// Returns `None` when primes are unsorted, an exponent is zero, a base is
    /// not prime, or the product overflows `u64`.
    pub fn from_factors(factors: Vec<(u64, u32)>) -> Option<Self> {
        let mut value: u64 = 1;
        let mut last = 1u64;
        for &(p, a) in &factors {
            if p <= last || a == 0 || !is_prime(p) {
                return None;
            }
            last = p;
            value = value.checked_mul(p.checked_pow(a)?)?;
        }
        Some(FactorizationMap { factors, value })
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    /// Number of divisors, `prod (a_r + 1)`.
    pub fn divisor_count(&self) -> u64 {
        self.factors.iter().map(|&(_, a)| a as u64 + 1).product()
    }

    /// Recomputes the represented integer from the factor list.
    pub fn reconstruct(&self) -> ExactInt {
        self.factors
            .iter()
            .fold(ExactInt::one(), |acc, &(p, a)| acc * pow_u64(p, a))
    }
}

/// Sieve of Eratosthenes; returns the primes `<= limit` in ascending order.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let limit = limit as usize;
    let mut composite = vec![false; limit + 1];
    let mut primes = Vec::new();
    for i in 2..=limit {
        if composite[i] {
            continue;
        }
        primes.push(i as u64);
        let mut j = i.saturating_mul(i);
        while j <= limit {
            composite[j] = true;
            j += i;
        }
    }
    primes
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Trial-division factorization.
pub fn factorize(n: u64) -> Result<FactorizationMap, ArithError> {
    if n == 0 {
        return Err(ArithError::Zero);
    }
    let mut factors = Vec::new();
    let mut m = n;
    let mut d = 2u64;
    while d.saturating_mul(d) <= m {
        if m.is_multiple_of(d) {
            let mut a = 0u32;
            while m.is_multiple_of(d) {
                m /= d;
                a += 1;
            }
            factors.push((d, a));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if m > 1 {
        factors.push((m, 1));
    }
    Ok(FactorizationMap { factors, value: n })
}

/// Smallest-prime-factor table for fast repeated factorization up to `limit`.
/// Larger inputs fall back to trial division.
#[derive(Debug, Clone)]
pub struct SpfSieve {
    spf: Vec<u32>,
}

impl SpfSieve {
    pub fn new(limit: u32) -> Self {
        let limit = limit.max(1) as usize;
        let mut spf = vec![0u32; limit + 1];
        for i in 2..=limit {
            if spf[i] != 0 {
                continue;
            }
            let mut j = i;
            while j <= limit {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
        SpfSieve { spf }
    }

    pub fn limit(&self) -> u64 {
        (self.spf.len() - 1) as u64
    }

    pub fn factorize(&self, n: u64) -> Result<FactorizationMap, ArithError> {
        if n == 0 {
            return Err(ArithError::Zero);
        }
        if n > self.limit() {
            return factorize(n);
        }
        let mut factors: Vec<(u64, u32)> = Vec::new();
        let mut m = n as usize;
        while m > 1 {
            let p = self.spf[m] as usize;
            let mut a = 0;
            while m.is_multiple_of(p) {
                m /= p;
                a += 1;
            }
            factors.push((p as u64, a));
        }
        Ok(FactorizationMap { factors, value: n })
    }
}

/// All divisors of `n` in ascending order.
pub fn divisors(n: u64) -> Result<Vec<u64>, ArithError> {
    Ok(divisors_of(&factorize(n)?))
}

pub fn divisors_of(map: &FactorizationMap) -> Vec<u64> {
    let mut out = vec![1u64];
    for &(p, a) in map.factors() {
        let len = out.len();
        let mut pk = 1u64;
        for _ in 0..a {
            pk *= p;
            for i in 0..len {
                out.push(out[i] * pk);
            }
        }
    }
    out.sort_unstable();
    out
}

pub fn pow_u64(base: u64, exp: u32) -> ExactInt {
    num_traits::pow(ExactInt::from(base), exp as usize)
}

pub fn factorial(n: u64) -> ExactInt {
    (1..=n).fold(ExactInt::one(), |acc, k| acc * k)
}

/// Converts a non-negative rational with unit denominator to an integer.
pub fn rational_to_int(r: &ExactRational) -> Option<ExactInt> {
    if !r.denom().is_one() || r.numer() < &BigInt::zero() {
        return None;
    }
    r.numer().to_biguint()
}

pub fn int_to_rational(n: &ExactInt) -> ExactRational {
    ExactRational::from_integer(BigInt::from(n.clone()))
}

/// Natural logarithm of a big unsigned integer, correct to f64 precision.
pub fn ln_big(n: &ExactInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return num_traits::ToPrimitive::to_f64(n)
            .unwrap_or(f64::INFINITY)
            .ln();
    }
    let shift = bits - 64;
    let top: ExactInt = n >> shift;
    let top = num_traits::ToPrimitive::to_f64(&top).unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_primes(limit: u64) -> Vec<u64> {
        (2..=limit)
            .filter(|&n| (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0))
            .collect()
    }

    #[test]
    fn primes_small() {
        assert_eq!(primes_up_to(10), vec![2, 3, 5, 7]);
        assert_eq!(primes_up_to(2), vec![2]);
        assert!(primes_up_to(1).is_empty());
        assert!(primes_up_to(0).is_empty());
        assert_eq!(primes_up_to(100).len(), 25);
        assert_eq!(primes_up_to(1000), trial_primes(1000));
    }

    #[test]
    fn factorize_examples() {
        assert!(factorize(1).unwrap().is_one());
        assert_eq!(factorize(12).unwrap().factors(), &[(2, 2), (3, 1)]);
        assert_eq!(factorize(999_983).unwrap().factors(), &[(999_983, 1)]);
        assert!(is_prime(999_983));
        assert_eq!(factorize(0), Err(ArithError::Zero));
    }

    #[test]
    fn spf_agrees_with_trial_division() {
        let sieve = SpfSieve::new(10_000);
        for n in 1..=10_000u64 {
            let f = sieve.factorize(n).unwrap();
            assert_eq!(f, factorize(n).unwrap());
            assert_eq!(f.reconstruct(), ExactInt::from(n));
        }
        // beyond the table
        assert_eq!(sieve.factorize(999_983).unwrap().factors(), &[(999_983, 1)]);
    }

    #[test]
    fn divisor_examples() {
        assert_eq!(divisors(1).unwrap(), vec![1]);
        assert_eq!(divisors(6).unwrap(), vec![1, 2, 3, 6]);
        let brute: Vec<u64> = (1..=28).filter(|d| 28 % d == 0).collect();
        assert_eq!(divisors(28).unwrap(), brute);
        assert_eq!(divisors(0), Err(ArithError::Zero));
    }

    #[test]
    fn divisor_count_matches_exponents() {
        for n in 1..=10_000u64 {
            let f = factorize(n).unwrap();
            let d = divisors_of(&f);
            assert_eq!(d.len() as u64, f.divisor_count());
            assert!(d.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn from_factors_rejects_bad_input() {
        assert!(FactorizationMap::from_factors(vec![(3, 1), (2, 1)]).is_none());
        assert!(FactorizationMap::from_factors(vec![(2, 0)]).is_none());
        assert!(FactorizationMap::from_factors(vec![(4, 1)]).is_none());
        assert_eq!(
            FactorizationMap::from_factors(vec![(2, 2), (3, 1)])
                .unwrap()
                .value(),
            12
        );
    }

    #[test]
    fn ln_big_large() {
        let n = pow_u64(10, 400);
        assert!((ln_big(&n) - 400.0 * 10f64.ln()).abs() < 1e-9);
        assert!((ln_big(&ExactInt::from(1000u32)) - 1000f64.ln()).abs() < 1e-12);
    }
}
