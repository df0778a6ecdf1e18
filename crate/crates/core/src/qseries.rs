//! q-Pochhammer products over exact rationals and an executable check of the
//! q-analogue of the power rule
//!
//! ```text
//! z(1-q) sum_{k>=0} q^k (q^{k+1} z; q)_{l-1} = (1-q)(1 - (z;q)_l) / (1-q^l)
//! ```
//!
//! The infinite left side is truncated after `K` terms, where `K` is the
//! smallest count whose rational geometric tail bound is below the requested
//! tolerance. Everything except the reported `abs_diff` stays exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::arith::ExactRational;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QSeriesError {
    #[error("|q| = {0} is not below 1; the series does not converge")]
    NotConvergent(f64),
    #[error("ell must be at least 2 (got {0})")]
    InvalidEll(u32),
    #[error("tail tolerance must be positive and finite (got {0})")]
    InvalidTolerance(f64),
}

/// `(z;q)_r = (1-z)(1-qz)...(1-q^{r-1}z)`; the empty product for `r = 0`.
pub fn qpoch(z: &ExactRational, q: &ExactRational, r: u32) -> ExactRational {
    let mut acc = ExactRational::one();
    let mut term = z.clone();
    for _ in 0..r {
        acc *= ExactRational::one() - &term;
        term *= q;
    }
    acc
}

/// Gaussian binomial `[m choose j]_q = (q;q)_m / ((q;q)_j (q;q)_{m-j})`.
pub fn q_binomial(q: &ExactRational, m: u32, j: u32) -> ExactRational {
    assert!(j <= m);
    qpoch(q, q, m) / (qpoch(q, q, j) * qpoch(q, q, m - j))
}

/// Right side of the q-binomial theorem for `(z;q)_m`:
/// `sum_j q^{j(j-1)/2} [m choose j]_q (-z)^j`.
pub fn q_binomial_expansion(z: &ExactRational, q: &ExactRational, m: u32) -> ExactRational {
    (0..=m)
        .map(|j| {
            let tri = num_traits::pow(q.clone(), (j * j.saturating_sub(1) / 2) as usize);
            let mz = num_traits::pow(-z.clone(), j as usize);
            tri * q_binomial(q, m, j) * mz
        })
        .fold(ExactRational::zero(), |a, b| a + b)
}

/// Closed finite form of `sum_{k>=0} q^k (q^{k+1}z;q)_{l-1}` obtained by
/// expanding with the q-binomial theorem, summing each geometric series and
/// using `(q;q)_j (1-q^{j+1}) = (q;q)_{j+1}`.
pub fn power_rule_finite_sum(ell: u32, z: &ExactRational, q: &ExactRational) -> ExactRational {
    let m = ell - 1;
    let top = qpoch(q, q, m);
    (0..=m)
        .map(|j| {
            let tri = num_traits::pow(q.clone(), (j * j.saturating_sub(1) / 2) as usize);
            let qj = num_traits::pow(q.clone(), j as usize);
            let mz = num_traits::pow(-z.clone(), j as usize);
            tri * &top / (qpoch(q, q, j + 1) * qpoch(q, q, m - j)) * mz * qj
        })
        .fold(ExactRational::zero(), |a, b| a + b)
}

/// Exact right side `(1-q)(1-(z;q)_l)/(1-q^l)`.
pub fn power_rule_rhs(ell: u32, z: &ExactRational, q: &ExactRational) -> ExactRational {
    let one = ExactRational::one();
    (&one - q) * (&one - qpoch(z, q, ell)) / (&one - num_traits::pow(q.clone(), ell as usize))
}

/// Partial sum `z(1-q) sum_{k<terms} q^k (q^{k+1}z;q)_{l-1}`.
pub fn power_rule_lhs_partial(
    ell: u32,
    z: &ExactRational,
    q: &ExactRational,
    terms: u32,
) -> ExactRational {
    let one = ExactRational::one();
    let mut sum = ExactRational::zero();
    let mut qk = one.clone();
    let mut shifted = z * q;
    for _ in 0..terms {
        sum += &qk * qpoch(&shifted, q, ell - 1);
        qk *= q;
        shifted *= q;
    }
    z * (&one - q) * sum
}

/// Rational bound on the magnitude of the left-side terms with index `>= terms`:
/// `|z| |1-q| C |q|^K / (1-|q|)` with `C = prod_{j=1}^{l-1} (1 + |z||q|^j)`.
pub fn power_rule_tail_bound(
    ell: u32,
    z: &ExactRational,
    q: &ExactRational,
    terms: u32,
) -> ExactRational {
    let one = ExactRational::one();
    let az = z.abs();
    let aq = q.abs();
    let mut c = one.clone();
    let mut aqj = aq.clone();
    for _ in 1..ell {
        c *= &one + &az * &aqj;
        aqj *= &aq;
    }
    &az * (&one - q).abs() * c * num_traits::pow(aq.clone(), terms as usize) / (&one - &aq)
}

/// Outcome of one power-rule verification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRuleCheck {
    pub ell: u32,
    #[serde(serialize_with = "ser_rational")]
    pub z: ExactRational,
    #[serde(serialize_with = "ser_rational")]
    pub q: ExactRational,
    pub terms: u32,
    #[serde(serialize_with = "ser_rational")]
    pub lhs_truncated: ExactRational,
    #[serde(serialize_with = "ser_rational")]
    pub rhs_exact: ExactRational,
    #[serde(serialize_with = "ser_rational")]
    pub tail_bound: ExactRational,
    pub tail_eps: f64,
    pub abs_diff: f64,
    /// `|lhs - rhs| <= tail_bound`, compared exactly.
    pub bracketed: bool,
    /// `|lhs - rhs| <= tail_eps`, compared exactly.
    pub bound_ok: bool,
}

fn ser_rational<S: serde::Serializer>(r: &ExactRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

fn validate(ell: u32, q: &ExactRational, tail_eps: f64) -> Result<(), QSeriesError> {
    if ell < 2 {
        return Err(QSeriesError::InvalidEll(ell));
    }
    if q.abs() >= ExactRational::one() {
        return Err(QSeriesError::NotConvergent(q.to_f64().unwrap_or(f64::NAN)));
    }
    if !(tail_eps > 0.0 && tail_eps.is_finite()) {
        return Err(QSeriesError::InvalidTolerance(tail_eps));
    }
    Ok(())
}

/// Smallest `K` whose tail bound is at most `tail_eps`.
pub fn terms_for_tolerance(
    ell: u32,
    z: &ExactRational,
    q: &ExactRational,
    tail_eps: f64,
) -> Result<u32, QSeriesError> {
    validate(ell, q, tail_eps)?;
    let eps = BigRational::from_float(tail_eps).expect("finite");
    let mut terms = 0u32;
    let mut bound = power_rule_tail_bound(ell, z, q, 0);
    let aq = q.abs();
    while bound > eps {
        terms += 1;
        bound *= &aq;
    }
    Ok(terms)
}

pub fn verify_power_rule(
    ell: u32,
    z: &ExactRational,
    q: &ExactRational,
    tail_eps: f64,
) -> Result<PowerRuleCheck, QSeriesError> {
    let terms = terms_for_tolerance(ell, z, q, tail_eps)?;
    verify_power_rule_with_terms(ell, z, q, tail_eps, terms)
}

/// Same as [`verify_power_rule`] but with a caller-chosen truncation.
pub fn verify_power_rule_with_terms(
    ell: u32,
    z: &ExactRational,
    q: &ExactRational,
    tail_eps: f64,
    terms: u32,
) -> Result<PowerRuleCheck, QSeriesError> {
    validate(ell, q, tail_eps)?;
    let lhs = power_rule_lhs_partial(ell, z, q, terms);
    let rhs = power_rule_rhs(ell, z, q);
    let tail = power_rule_tail_bound(ell, z, q, terms);
    let diff = (&lhs - &rhs).abs();
    let eps = BigRational::from_float(tail_eps).expect("finite");
    Ok(PowerRuleCheck {
        ell,
        z: z.clone(),
        q: q.clone(),
        terms,
        abs_diff: diff.to_f64().unwrap_or(f64::INFINITY),
        bracketed: diff <= tail,
        bound_ok: diff <= eps,
        lhs_truncated: lhs,
        rhs_exact: rhs,
        tail_bound: tail,
        tail_eps,
    })
}

/// The reference grid: `l` in `2..=6`, `q` in `{1/2, 1/3, 2/5}`,
/// `z` in `{0, 1/2, 1}`, as `(l, z, q)`.
pub fn standard_grid() -> Vec<(u32, ExactRational, ExactRational)> {
    let mut out = Vec::new();
    for ell in 2..=6 {
        for q in ["1/2", "1/3", "2/5"] {
            for z in ["0", "1/2", "1"] {
                let r = |s| parse_rational(s).expect("literal");
                out.push((ell, r(z), r(q)));
            }
        }
    }
    out
}

/// Parses `"p/q"` or an integer into an exact rational.
pub fn parse_rational(s: &str) -> Option<ExactRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(ExactRational::new(n, d))
        }
        None => s.parse::<BigInt>().ok().map(ExactRational::from_integer),
    }
}
