//! Asymptotic and statistical quantities around `B(l, n) / n^(l-1)`.
//!
//! Floating accumulations all go through [`CompensatedSum`] in ascending-`n`
//! order and are never split across threads, so results are reproducible to
//! the last bit.

use num_traits::ToPrimitive;
use serde::Serialize;
use thiserror::Error;

use crate::arith::{int_to_rational, pow_u64, primes_up_to, ExactInt};
use crate::sieve::ArithTable;

/// Euler–Mascheroni constant.
#[allow(clippy::excessive_precision)]
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;

/// Bin count used for the cumulative error histogram.
pub const DEFAULT_BINS: usize = 250;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LimitError {
    #[error("invalid arguments: {0}")]
    InvalidArgs(String),
    #[error("requested N = {requested} exceeds table size {nmax}")]
    TableTooShort { requested: u64, nmax: u64 },
    #[error("table holds l = {found}, expected l = {expected}")]
    WrongEll { expected: u32, found: u32 },
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

/// `zeta(s)` for integer `s >= 2` from the alternating eta series with
/// Borwein's Chebyshev acceleration. The remainder of the `n`-term sum is at
/// most `3 / (3 + sqrt 8)^n` for `eta`, hence at most twice that for `zeta`;
/// `n` is the smallest count meeting `eps` (capped where f64 rounding
/// dominates).
pub fn zeta(s: u32, eps: f64) -> f64 {
    assert!(s >= 2, "zeta needs s >= 2");
    let rate = 3.0 + 8f64.sqrt();
    let mut n = 1usize;
    while 6.0 / rate.powi(n as i32) > eps && n < 64 {
        n += 1;
    }
    // d_k = n sum_{i<=k} (n+i-1)! 4^i / ((n-i)! (2i)!)
    let nf = n as f64;
    let mut d = Vec::with_capacity(n + 1);
    let mut term = 1.0f64;
    let mut acc = 1.0f64;
    d.push(acc);
    for i in 1..=n {
        let fi = i as f64;
        term *= 4.0 * (nf + fi - 1.0) * (nf - fi + 1.0) / ((2.0 * fi) * (2.0 * fi - 1.0));
        acc += term;
        d.push(acc);
    }
    let dn = d[n];
    let mut sum = CompensatedSum::new();
    for (k, dk) in d.iter().take(n).enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum.add(sign * ((dk - dn) / dn) / ((k + 1) as f64).powi(s as i32));
    }
    let eta = -sum.value();
    eta / (1.0 - 2f64.powi(1 - s as i32))
}

/// The conjectured constant `gamma/2 + ln(24 zeta(2))/4 - zeta(2)/2`.
pub fn mu_constant() -> f64 {
    let z2 = zeta(2, 1e-17);
    EULER_GAMMA / 2.0 + (24.0 * z2).ln() / 4.0 - z2 / 2.0
}

fn check_range(table: &ArithTable, n: u64) -> Result<(), LimitError> {
    if n == 0 {
        return Err(LimitError::InvalidArgs("N must be positive".into()));
    }
    if n > table.nmax() {
        return Err(LimitError::TableTooShort {
            requested: n,
            nmax: table.nmax(),
        });
    }
    Ok(())
}

/// `(1/N) sum_{n<=N} B(l,n)/n^(l-1)`, each term rounded once to f64.
pub fn cesaro_mean(table: &ArithTable, n: u64) -> Result<f64, LimitError> {
    empirical_moment(table, 1, n)
}

/// Cesàro mean with integer parts of each term summed exactly and only the
/// fractional remainders `(B mod n^(l-1)) / n^(l-1)` accumulated in floating
/// point. Differs from [`cesaro_mean`] only through per-term rounding.
pub fn cesaro_mean_split(table: &ArithTable, n: u64) -> Result<f64, LimitError> {
    check_range(table, n)?;
    let mut whole = ExactInt::default();
    let mut frac = CompensatedSum::new();
    for i in 1..=n {
        let b = table.get(i);
        let den = pow_u64(i, table.ell() - 1);
        whole += &b / &den;
        let r = int_to_rational(&(&b % &den)) / int_to_rational(&den);
        frac.add(r.to_f64().unwrap_or(0.0));
    }
    let whole = whole.to_f64().unwrap_or(f64::INFINITY);
    let mut total = CompensatedSum::new();
    total.add(whole);
    total.add(frac.value());
    Ok(total.value() / n as f64)
}

/// `(1/N) sum_{n<=N} (B(l,n)/n^(l-1))^m`.
pub fn empirical_moment(table: &ArithTable, m: u32, n: u64) -> Result<f64, LimitError> {
    check_range(table, n)?;
    if m == 0 {
        return Err(LimitError::InvalidArgs(
            "moment order must be positive".into(),
        ));
    }
    let sum: CompensatedSum = (1..=n).map(|i| table.index_f64(i).powi(m as i32)).collect();
    Ok(sum.value() / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: u64,
}

/// Equal-width histogram over `[min, max]`; bins are right-open except the
/// last. Edge placement and boundary handling follow numpy's `histogram`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    assert!(bins > 0);
    if values.is_empty() {
        return Vec::new();
    }
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let step = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * step).collect();
    edges[bins] = hi;
    let norm = bins as f64 / (hi - lo);
    let mut counts = vec![0u64; bins];
    for &v in values {
        let mut idx = ((v - lo) * norm) as isize;
        if idx >= bins as isize {
            idx = bins as isize - 1;
        }
        let mut idx = idx.max(0) as usize;
        if v < edges[idx] {
            idx -= 1;
        } else if idx != bins - 1 && v >= edges[idx + 1] {
            idx += 1;
        }
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            left: edges[i],
            right: edges[i + 1],
            count,
        })
        .collect()
}

/// Statistics of `E_N = sum_{n<=N} sigma(n)/n - zeta(2) N + ln(N)/2` and of
/// the cumulative sums `X_M = sum_{N<=M} (E_N + mu)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSummary {
    pub nmax: u64,
    #[serde(rename = "mean_E")]
    pub mean_e: f64,
    pub mu: f64,
    /// `-mu`, the conjectured limit of the mean.
    pub minus_mu: f64,
    pub rel_err: f64,
    pub bins: usize,
    /// `E_N` at `N = nmax`, the plain (non-averaged) limit evidence.
    #[serde(rename = "final_E")]
    pub final_e: f64,
    #[serde(skip)]
    pub histogram: Vec<HistogramBin>,
}

impl ErrorSummary {
    /// Summary JSON, without the histogram.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data");
        s.push('\n');
        s
    }

    /// Histogram CSV with header `bin_left,bin_right,count`.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,count\n");
        for b in &self.histogram {
            out.push_str(&format!("{},{},{}\n", b.left, b.right, b.count));
        }
        out
    }
}

/// How partial sums of `sigma(n)/n` are accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Accumulation {
    /// Each term rounded once to f64, then compensated summation.
    #[default]
    RoundedTerms,
    /// Integer parts `sigma(n) div n` summed exactly; only the remainders
    /// `(sigma(n) mod n)/n` go through compensated summation.
    SplitExact,
}

/// The error sequence `E_1..E_N` for an `l = 2` table.
pub fn error_sequence(table: &ArithTable, n: u64) -> Result<Vec<f64>, LimitError> {
    error_sequence_with(table, n, Accumulation::RoundedTerms)
}

pub fn error_sequence_with(
    table: &ArithTable,
    n: u64,
    mode: Accumulation,
) -> Result<Vec<f64>, LimitError> {
    if table.ell() != 2 {
        return Err(LimitError::WrongEll {
            expected: 2,
            found: table.ell(),
        });
    }
    check_range(table, n)?;
    let z2 = zeta(2, 1e-17);
    let mut running = CompensatedSum::new();
    let mut whole = 0u128;
    Ok((1..=n)
        .map(|i| {
            let nf = i as f64;
            match mode {
                Accumulation::RoundedTerms => {
                    running.add(table.index_f64(i));
                    (running.value() - z2 * nf) - (-0.5 * nf.ln())
                }
                Accumulation::SplitExact => {
                    let sigma = table.get_u128(i).expect("sigma(n) fits in u128");
                    whole += sigma / i as u128;
                    running.add((sigma % i as u128) as f64 / nf);
                    z2.mul_add(-nf, whole as f64) + running.value() + 0.5 * nf.ln()
                }
            }
        })
        .collect())
}

pub fn error_series(table: &ArithTable, n: u64, bins: usize) -> Result<ErrorSummary, LimitError> {
    error_series_with(table, n, bins, Accumulation::RoundedTerms)
}

pub fn error_series_with(
    table: &ArithTable,
    n: u64,
    bins: usize,
    mode: Accumulation,
) -> Result<ErrorSummary, LimitError> {
    if bins == 0 {
        return Err(LimitError::InvalidArgs("bins must be positive".into()));
    }
    let errors = error_sequence_with(table, n, mode)?;
    let mu = mu_constant();
    let mean_e = errors.iter().copied().collect::<CompensatedSum>().value() / n as f64;
    let mut running = CompensatedSum::new();
    let cumulative: Vec<f64> = errors
        .iter()
        .map(|e| {
            running.add(e + mu);
            running.value()
        })
        .collect();
    Ok(ErrorSummary {
        nmax: n,
        mean_e,
        mu,
        minus_mu: -mu,
        rel_err: (mean_e + mu).abs() / mu,
        bins,
        final_e: *errors.last().expect("n >= 1"),
        histogram: histogram(&cumulative, bins),
    })
}

// ln of the ratio B^(l,p,a)/p^((l-1)a) = prod_{i=1}^{l-1} (1-u^{a+i})/(1-u^i), u = 1/p.
fn ln_normalized_local(ell: u32, u: f64, a: u32) -> f64 {
    (1..ell)
        .map(|i| (-u.powi((a + i) as i32)).ln_1p() - (-u.powi(i as i32)).ln_1p())
        .sum()
}

/// `L_p - 1` where `L_p = (1 - 1/p) sum_{a>=0} p^{-a} (B^(l,p,a)/p^((l-1)a))^m`,
/// summed until the geometric tail bound `C p^{-A}` falls below `eps`, with
/// `C = prod_{i=1}^{l-1} (1 - p^{-i})^{-m}`.
pub fn local_moment_excess(ell: u32, p: u64, m: u32, eps: f64) -> f64 {
    let u = 1.0 / p as f64;
    let c = (-(m as f64) * (1..ell).map(|i| (-u.powi(i as i32)).ln_1p()).sum::<f64>()).exp();
    let mut sum = CompensatedSum::new();
    let mut ua = 1.0f64;
    let mut a = 0u32;
    loop {
        a += 1;
        ua *= u;
        sum.add(ua * (m as f64 * ln_normalized_local(ell, u, a)).exp_m1());
        if c * ua * u <= eps || ua == 0.0 {
            break;
        }
    }
    (1.0 - u) * sum.value()
}

pub fn local_moment(ell: u32, p: u64, m: u32, eps: f64) -> f64 {
    1.0 + local_moment_excess(ell, p, m, eps)
}

/// Upper bound for `sum_{p > x} 1/p^2`, from `pi(t) < 1.25506 t / ln t`.
pub fn prime_square_tail(x: u64) -> f64 {
    let x = x.max(2) as f64;
    2.52 / (x * x.ln())
}

/// `zeta(2)^2 zeta(3) / zeta(4)`, the second moment for `l = 2`.
pub fn l2_second_moment_closed() -> f64 {
    let z = |s| zeta(s, 1e-17);
    z(2) * z(2) * z(3) / z(4)
}

/// `zeta(3) zeta(4) prod_{p <= cutoff} (1 - p^{-3} + 3/(p(p-1)))`, the third
/// moment for `l = 2` in product form.
pub fn l2_third_moment_product(prime_cutoff: u64) -> f64 {
    let logs: CompensatedSum = primes_up_to(prime_cutoff)
        .into_iter()
        .map(|p| {
            let pf = p as f64;
            (-pf.powi(-3) + 3.0 / (pf * (pf - 1.0))).ln_1p()
        })
        .collect();
    zeta(3, 1e-17) * zeta(4, 1e-17) * logs.value().exp()
}

/// Euler-product estimate of the `m`-th moment of the limiting distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentResult {
    pub ell: u32,
    pub order: u32,
    pub theoretical: f64,
    pub empirical: Option<f64>,
    pub empirical_n: Option<u64>,
    pub prime_cutoff: u64,
    /// Estimated absolute error from primes above the cutoff plus truncation.
    pub tail_bound: f64,
    /// `zeta(2)...zeta(l)` when `order = 1`.
    pub closed_form: Option<f64>,
    /// False when the `order = 1` closed form disagrees beyond `tail_bound`.
    pub closed_form_ok: bool,
}

pub fn theoretical_moment(
    ell: u32,
    m: u32,
    prime_cutoff: u64,
    eps: f64,
) -> Result<MomentResult, LimitError> {
    if ell < 2 || m < 1 || prime_cutoff < 2 || !(eps > 0.0 && eps.is_finite()) {
        return Err(LimitError::InvalidArgs(format!(
            "need l >= 2, m >= 1, cutoff >= 2, eps > 0 (got {ell}, {m}, {prime_cutoff}, {eps})"
        )));
    }
    let primes = primes_up_to(prime_cutoff);
    let per_prime = eps / primes.len() as f64;
    let mut log_sum = CompensatedSum::new();
    let mut k_tail = 0.0f64;
    for &p in &primes {
        let excess = local_moment_excess(ell, p, m, per_prime);
        log_sum.add(excess.ln_1p());
        if 2 * p > prime_cutoff || primes.len() < 8 {
            k_tail = k_tail.max(excess * (p as f64).powi(2));
        }
    }
    let value = log_sum.value().exp();
    let tail_bound =
        value * (2.0 * k_tail * prime_square_tail(prime_cutoff)).exp_m1() + value * eps;
    let closed_form = (m == 1).then(|| (2..=ell).map(|s| zeta(s, 1e-17)).product::<f64>());
    let closed_form_ok = closed_form.is_none_or(|c| (value - c).abs() <= tail_bound + 1e-12);
    Ok(MomentResult {
        ell,
        order: m,
        theoretical: value,
        empirical: None,
        empirical_n: None,
        prime_cutoff,
        tail_bound,
        closed_form,
        closed_form_ok,
    })
}

/// Per-prime comparison for the `l = 3` second moment: the local factor from
/// the geometric model against the factor shape
/// `(1 + p^{-j} + 2p^{-3} + p^{-4} + p^{-6}) / prod_{s=2}^{5}(1 - p^{-s})`
/// with `j = 1` (`linear`) and `j = 2` (`quadratic`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorDiscrepancy {
    pub p: u64,
    pub local: f64,
    pub linear: f64,
    pub quadratic: f64,
}

pub fn l3_second_moment_factors(primes: &[u64]) -> Vec<FactorDiscrepancy> {
    primes
        .iter()
        .map(|&p| {
            let u = 1.0 / p as f64;
            let zeta_part: f64 = (2..=5).map(|s| 1.0 / (1.0 - u.powi(s))).product();
            let tail = 2.0 * u.powi(3) + u.powi(4) + u.powi(6);
            FactorDiscrepancy {
                p,
                local: local_moment(3, p, 2, 1e-18),
                linear: (1.0 + u + tail) * zeta_part,
                quadratic: (1.0 + u * u + tail) * zeta_part,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sieve::{sieve_b, SieveConfig};
    use std::f64::consts::PI;

    #[test]
    fn zeta_values() {
        assert!((zeta(2, 1e-12) - PI * PI / 6.0).abs() <= 1e-12);
        assert!((zeta(2, 1e-17) - PI * PI / 6.0).abs() <= 4e-16);
        assert!((zeta(4, 1e-12) - PI.powi(4) / 90.0).abs() <= 1e-12);
        let z20 = zeta(20, 1e-12);
        assert!(z20 > 1.0 && z20 < 1.000002);
        assert!((zeta(3, 1e-15) - 1.202_056_903_159_594_2).abs() < 1e-14);
    }

    #[test]
    fn mu_value() {
        assert!((mu_constant() - 0.385_079_332_231_326_07).abs() <= 1e-14);
        assert!((EULER_GAMMA / 2.0 - 0.288_607_832_450_766_4).abs() < 1e-15);
        let z2 = zeta(2, 1e-17);
        let rebuilt = EULER_GAMMA / 2.0 + (24.0 * z2).ln() / 4.0 - z2 / 2.0;
        assert_eq!(rebuilt.to_bits(), mu_constant().to_bits());
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut naive = 0.0;
        let mut comp = CompensatedSum::new();
        for _ in 0..1_000_000 {
            naive += 0.1;
            comp.add(0.1);
        }
        assert!((comp.value() - 100_000.0).abs() < (naive - 100_000.0f64).abs());
        assert!((comp.value() - 100_000.0).abs() < 1e-9);
    }

    #[test]
    fn cesaro_small() {
        let t = sieve_b(2, 100, &SieveConfig::default()).unwrap();
        assert_eq!(cesaro_mean(&t, 1).unwrap(), 1.0);
        let direct: f64 = (1..=10).map(|n| t.index_f64(n)).sum::<f64>() / 10.0;
        assert!((cesaro_mean(&t, 10).unwrap() - direct).abs() < 1e-15);
        assert!(
            (cesaro_mean_split(&t, 100).unwrap() - cesaro_mean(&t, 100).unwrap()).abs() < 1e-13
        );
        assert!(cesaro_mean(&t, 101).is_err());
        assert!(cesaro_mean(&t, 0).is_err());
    }

    #[test]
    fn local_moment_closed_forms() {
        assert!((local_moment(2, 2, 1, 1e-16) - 4.0 / 3.0).abs() < 1e-14);
        assert!((local_moment(2, 3, 1, 1e-16) - 9.0 / 8.0).abs() < 1e-14);
        for p in [2u64, 3, 5, 7] {
            for ell in 2..=4u32 {
                let closed: f64 = (2..=ell)
                    .map(|s| 1.0 / (1.0 - (p as f64).powi(-(s as i32))))
                    .product();
                assert!(
                    (local_moment(ell, p, 1, 1e-15) - closed).abs() < 1e-13,
                    "p={p} l={ell}"
                );
                assert!(local_moment(ell, p, 3, 1e-12) >= 1.0 - 1.0 / p as f64);
            }
        }
    }

    #[test]
    fn local_moment_second_and_third_closed_forms() {
        for p in [2u64, 3, 5, 11, 101] {
            let u = 1.0 / p as f64;
            let second = (1.0 - u.powi(4)) / ((1.0 - u * u).powi(2) * (1.0 - u.powi(3)));
            assert!((local_moment(2, p, 2, 1e-16) - second).abs() < 1e-13);
            let third = (1.0 - u.powi(3) + 3.0 * u * u / (1.0 - u))
                / ((1.0 - u.powi(3)) * (1.0 - u.powi(4)));
            assert!((local_moment(2, p, 3, 1e-16) - third).abs() < 1e-13);
        }
    }

    #[test]
    fn first_moment_converges_with_cutoff() {
        let target = zeta(2, 1e-17) * zeta(3, 1e-17);
        let errs: Vec<f64> = [100u64, 1000, 10_000]
            .iter()
            .map(|&c| {
                let r = theoretical_moment(3, 1, c, 1e-12).unwrap();
                assert!(r.closed_form_ok);
                (r.theoretical - target).abs()
            })
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    }

    #[test]
    fn low_moments_match_product_forms() {
        let second = theoretical_moment(2, 2, 100_000, 1e-12).unwrap();
        assert!((second.theoretical - l2_second_moment_closed()).abs() <= second.tail_bound);
        let third = theoretical_moment(2, 3, 100_000, 1e-12).unwrap();
        assert!((third.theoretical - l2_third_moment_product(100_000)).abs() <= third.tail_bound);
        assert!(third.tail_bound < 1e-4);
        assert!(prime_square_tail(1000) > 1.0 / (1000.0 * 1000f64.ln()));
    }

    #[test]
    fn histogram_basics() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let h = histogram(&v, 10);
        assert_eq!(h.len(), 10);
        assert!(h.iter().all(|b| b.count == 10));
        assert_eq!(h[9].right, 99.0);
        let flat = histogram(&[2.0, 2.0], 4);
        assert_eq!(flat.iter().map(|b| b.count).sum::<u64>(), 2);
    }

    #[test]
    fn error_series_small() {
        let t = sieve_b(2, 10_000, &SieveConfig::default()).unwrap();
        let s = error_series(&t, 10_000, 250).unwrap();
        assert_eq!(s.histogram.len(), 250);
        assert_eq!(s.histogram.iter().map(|b| b.count).sum::<u64>(), 10_000);
        assert_eq!(
            s.to_json(),
            error_series(&t, 10_000, 250).unwrap().to_json()
        );
        let t3 = sieve_b(3, 10, &SieveConfig::default()).unwrap();
        assert!(matches!(
            error_series(&t3, 10, 250),
            Err(LimitError::WrongEll { .. })
        ));
    }

    #[test]
    fn accumulation_modes_agree() {
        let t = sieve_b(2, 100_000, &SieveConfig::default()).unwrap();
        let a = error_series_with(&t, 100_000, 50, Accumulation::RoundedTerms).unwrap();
        let b = error_series_with(&t, 100_000, 50, Accumulation::SplitExact).unwrap();
        assert!(
            (a.mean_e - b.mean_e).abs() < 1e-10,
            "{} {}",
            a.mean_e,
            b.mean_e
        );
        assert!((a.final_e - b.final_e).abs() < 1e-10);
    }

    #[test]
    fn l3_factor_shapes() {
        for d in l3_second_moment_factors(&[2, 3, 5, 7, 101, 10_007]) {
            assert!((d.local - d.quadratic).abs() < 1e-12 * d.local, "{d:?}");
            assert!(d.linear - d.local > 0.5 / d.p as f64);
        }
    }
}
