//! Generating functions over exact rationals.
//!
//! `L_l(z) = sum_{n>=1} B(l, n)/n z^n` and
//! `G_l(x, z) = exp(x L_l(z)) = sum_n H_{l,n}(x) z^n`, where
//! `n! [x^k] H_{l,n}(x) = A(l, n, k)`. The exponential is expanded with the
//! differential recurrence `n g_n = x sum_{m=1}^{n} m l_m g_{n-m}`.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::arith::{factorial, int_to_rational, ln_big, rational_to_int, ExactInt, ExactRational};
use crate::limit_stats::zeta;
use crate::perm_oracle::ATable;
use crate::sieve::{sieve_b, ArithTable, SieveConfig, SieveError};

#[derive(Debug, Error)]
pub enum GenfuncError {
    #[error("invalid arguments: {0}")]
    InvalidArgs(String),
    #[error("{what} is not a non-negative integer: {value}")]
    NonIntegral { what: String, value: String },
    #[error("inner series vanishes at theta = {theta}; its logarithm is undefined")]
    ZeroInner { theta: f64 },
    #[error(transparent)]
    Sieve(#[from] SieveError),
}

fn table_for(ell: u32, nmax: u64) -> Result<ArithTable, GenfuncError> {
    Ok(sieve_b(ell, nmax.max(1), &SieveConfig::default())?)
}

/// `l_n = B(l, n) / n` for `n = 1..=nmax` (index 0 holds `l_1`).
pub fn series_l(ell: u32, nmax: u64) -> Result<Vec<ExactRational>, GenfuncError> {
    if nmax < 1 {
        return Err(GenfuncError::InvalidArgs("nmax must be at least 1".into()));
    }
    let table = table_for(ell, nmax)?;
    Ok(series_l_from_table(&table, nmax))
}

pub fn series_l_from_table(table: &ArithTable, nmax: u64) -> Vec<ExactRational> {
    (1..=nmax.min(table.nmax()))
        .map(|n| int_to_rational(&table.get(n)) / ExactRational::from_integer(BigInt::from(n)))
        .collect()
}

/// Truncated `G_l(x, z)`: `coeffs[n][k] = [x^k z^n]`, for `n <= order`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoly {
    ell: u32,
    order: usize,
    coeffs: Vec<Vec<ExactRational>>,
}

impl SeriesPoly {
    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Coefficients of `H_{l,n}(x)`, lowest degree first.
    pub fn poly(&self, n: usize) -> &[ExactRational] {
        &self.coeffs[n]
    }

    pub fn coeff(&self, n: usize, k: usize) -> ExactRational {
        self.coeffs[n]
            .get(k)
            .cloned()
            .unwrap_or_else(ExactRational::zero)
    }

    /// `H_{l,n}(x)` by Horner's rule.
    pub fn eval(&self, n: usize, x: &ExactRational) -> ExactRational {
        self.coeffs[n]
            .iter()
            .rev()
            .fold(ExactRational::zero(), |acc, c| acc * x + c)
    }

    /// `A(l, n, k) = n! [x^k z^n]` for `k = 1..=n`, checked to be integers.
    pub fn a_row(&self, n: usize) -> Result<ATable, GenfuncError> {
        if n == 0 || n > self.order {
            return Err(GenfuncError::InvalidArgs(format!(
                "row {n} outside 1..={}",
                self.order
            )));
        }
        let fact = int_to_rational(&factorial(n as u64));
        let mut counts = std::collections::BTreeMap::new();
        for k in 1..=n {
            let v = &fact * self.coeff(n, k);
            let a = rational_to_int(&v).ok_or_else(|| GenfuncError::NonIntegral {
                what: format!("{n}! [x^{k} z^{n}]"),
                value: v.to_string(),
            })?;
            counts.insert(k as u32, a);
        }
        Ok(ATable {
            ell: self.ell,
            n: n as u32,
            counts,
        })
    }
}

pub fn exp_series(ell: u32, order: usize) -> Result<SeriesPoly, GenfuncError> {
    let table = table_for(ell, order as u64)?;
    Ok(exp_series_from_table(&table, order))
}

pub fn exp_series_from_table(table: &ArithTable, order: usize) -> SeriesPoly {
    assert!(
        order as u64 <= table.nmax(),
        "table too short for order {order}"
    );
    // m l_m = B(l, m)
    let weights: Vec<ExactRational> = (1..=order as u64)
        .map(|m| int_to_rational(&table.get(m)))
        .collect();
    let mut coeffs: Vec<Vec<ExactRational>> = vec![vec![ExactRational::one()]];
    for n in 1..=order {
        let mut g = vec![ExactRational::zero(); n + 1];
        for m in 1..=n {
            let prev = &coeffs[n - m];
            for (j, c) in prev.iter().enumerate() {
                if !c.is_zero() {
                    g[j + 1] += &weights[m - 1] * c;
                }
            }
        }
        let inv_n = ExactRational::new(BigInt::one(), BigInt::from(n));
        g.iter_mut().for_each(|c| *c *= &inv_n);
        coeffs.push(g);
    }
    SeriesPoly {
        ell: table.ell(),
        order,
        coeffs,
    }
}

/// `H_{l,n}(x)` for a single rational `x`, through the integer recurrence
/// `V_n = a sum_m B(m) b^(m-1) (n-1)!/(n-m)! V_{n-m}` with `x = a/b` and
/// `V_n = b^n n! H_{l,n}(x)`.
pub fn h_value(table: &ArithTable, n: usize, x: &ExactRational) -> ExactRational {
    assert!(n as u64 <= table.nmax() || n == 0, "table too short");
    let a = x.numer().clone();
    let b = x.denom().clone();
    let bs: Vec<BigInt> = (1..=n as u64).map(|m| BigInt::from(table.get(m))).collect();
    let mut v: Vec<BigInt> = vec![BigInt::one()];
    for i in 1..=n {
        let mut acc = BigInt::zero();
        let mut falling = BigInt::one(); // (i-1)!/(i-m)!
        let mut bpow = BigInt::one(); // b^(m-1)
        for m in 1..=i {
            if m > 1 {
                falling *= i - m + 1;
                bpow *= &b;
            }
            acc += &bs[m - 1] * &falling * &bpow * &v[i - m];
        }
        v.push(&a * acc);
    }
    let den = num_traits::pow(b, n) * BigInt::from(factorial(n as u64));
    BigRational::new(v[n].clone(), den)
}

/// `p(0..=nmax)` by Euler's pentagonal recurrence.
pub fn partition_numbers(nmax: usize) -> Vec<ExactInt> {
    let mut p: Vec<BigInt> = vec![BigInt::one()];
    for i in 1..=nmax {
        let mut sum = BigInt::zero();
        for k in 1.. {
            let g1 = k * (3 * k - 1) / 2;
            if g1 > i {
                break;
            }
            let g2 = k * (3 * k + 1) / 2;
            let mut term = p[i - g1].clone();
            if g2 <= i {
                term += &p[i - g2];
            }
            if k % 2 == 1 {
                sum += term;
            } else {
                sum -= term;
            }
        }
        p.push(sum);
    }
    p.into_iter()
        .map(|v| v.to_biguint().expect("partition numbers are positive"))
        .collect()
}

/// Smallest `N >= max(n, 1)` with `N^l r^N / (1 - r) < 1e-17`, which bounds
/// the dropped part of the inner series at radius `r`, using `B(l, nu)/nu <= nu^l`.
pub fn default_truncation(ell: u32, n: u32, r: f64) -> usize {
    let mut big_n = n.max(1) as usize;
    let tail = |m: usize| ell as f64 * (m as f64).ln() + m as f64 * r.ln() - (1.0 - r).ln();
    while tail(big_n) >= (1e-17f64).ln() && big_n < 1 << 20 {
        big_n += 1;
    }
    big_n
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyCheck {
    pub ell: u32,
    pub n: u32,
    pub k: u32,
    pub r: f64,
    pub grid: usize,
    pub n_trunc: usize,
    pub numeric: f64,
    pub exact: f64,
    pub abs_err: f64,
}

/// Trapezoidal evaluation of
/// `A(l,n,k)/n! = (1/k!) (1/2pi) ∮ r^{-n} e^{-in theta} S(r e^{i theta})^k d theta`
/// with `S(w) = sum_{nu <= n_trunc} (B(l,nu)/nu) w^nu`, compared with the exact
/// coefficient from [`exp_series`].
pub fn cauchy_check(
    ell: u32,
    n: u32,
    k: u32,
    r: f64,
    grid: usize,
    n_trunc: usize,
) -> Result<CauchyCheck, GenfuncError> {
    if !(r > 0.0 && r < 1.0) {
        return Err(GenfuncError::InvalidArgs(format!(
            "radius {r} not in (0, 1)"
        )));
    }
    if grid == 0 {
        return Err(GenfuncError::InvalidArgs(
            "grid size must be positive".into(),
        ));
    }
    if n_trunc < n as usize || n_trunc == 0 {
        return Err(GenfuncError::InvalidArgs(format!(
            "truncation {n_trunc} must be at least max(n, 1) = {}",
            n.max(1)
        )));
    }
    let table = table_for(ell, n_trunc as u64)?;
    let exact = if n == 0 {
        if k == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        let series = exp_series_from_table(&table, n as usize);
        series
            .coeff(n as usize, k as usize)
            .to_f64()
            .unwrap_or(f64::NAN)
    };
    let numeric = contour_sum(&table, n, k, r, grid, n_trunc)?;
    Ok(CauchyCheck {
        ell,
        n,
        k,
        r,
        grid,
        n_trunc,
        numeric,
        exact,
        abs_err: (numeric - exact).abs(),
    })
}

fn contour_sum(
    table: &ArithTable,
    n: u32,
    k: u32,
    r: f64,
    grid: usize,
    n_trunc: usize,
) -> Result<f64, GenfuncError> {
    let weights: Vec<f64> = (1..=n_trunc as u64)
        .map(|nu| table.get(nu).to_f64().unwrap_or(f64::INFINITY) / nu as f64)
        .collect();
    let ln_k_fact: f64 = (2..=k).map(|i| (i as f64).ln()).sum();
    let scale = (-(n as f64) * r.ln() - ln_k_fact).exp();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..grid {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / grid as f64;
        let w = Complex64::from_polar(r, theta);
        let inner = weights
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |s, &l| (s + l) * w);
        if k > 0 && inner.norm() == 0.0 {
            return Err(GenfuncError::ZeroInner { theta });
        }
        let phase = Complex64::from_polar(1.0, -(n as f64) * theta);
        acc += phase * inner.powu(k);
    }
    Ok(scale * acc.re / grid as f64)
}

/// Exact `H_{2,n}(x)` divided by
/// `x^{(1+x)/4} 2^{-(5+3x)/4} 3^{-(1+x)/4} n^{-(3+x)/4} exp(2 sqrt(x zeta(2) n))`.
pub fn hr_ratio(n: u64, x: f64) -> Result<f64, GenfuncError> {
    if n < 1 || !(x > 0.0 && x.is_finite()) {
        return Err(GenfuncError::InvalidArgs(format!(
            "need n >= 1 and x > 0 (got n = {n}, x = {x})"
        )));
    }
    let table = table_for(2, n)?;
    let xr = BigRational::from_float(x).expect("finite");
    let h = h_value(&table, n as usize, &xr);
    let ln_h = ln_positive(&h);
    let z2 = zeta(2, 1e-17);
    let nf = n as f64;
    let ln_asym = (1.0 + x) / 4.0 * x.ln()
        - (5.0 + 3.0 * x) / 4.0 * 2f64.ln()
        - (1.0 + x) / 4.0 * 3f64.ln()
        - (3.0 + x) / 4.0 * nf.ln()
        + 2.0 * (x * z2 * nf).sqrt();
    Ok((ln_h - ln_asym).exp())
}

fn ln_positive(v: &ExactRational) -> f64 {
    assert!(v.is_positive());
    ln_big(v.numer().magnitude()) - ln_big(v.denom().magnitude())
}
