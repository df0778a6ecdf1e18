//! Pointwise `B(l, n)` by three independent exact routes, and the
//! generalized abundancy index `B(l, n) / n^(l-1)`.
//!
//! * [`b_via_flags`] enumerates divisor chains `d_1 | d_2 | ... | d_{l-1} | n`
//!   and sums `d_1 d_2 ... d_{l-1}`.
//! * [`b_via_recursion`] uses `B(l, n) = sum_{d | n} (n/d)^(l-1) B(l-1, d)`
//!   with `B(1, n) = 1`.
//! * [`b_via_multiplicativity`] multiplies prime-power local factors, each
//!   evaluated as a q-Pochhammer quotient in exact rationals.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::arith::{
    divisors, factorize, int_to_rational, is_prime, pow_u64, rational_to_int, ArithError, ExactInt,
    ExactRational,
};
use crate::qseries::qpoch;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AbundancyError {
    #[error("n must be positive")]
    ZeroN,
    #[error("ell must be at least {min} (got {got})")]
    InvalidEll { got: u32, min: u32 },
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("local factor B^({ell},{p},{a}) evaluated to non-integer {value}")]
    NonIntegral {
        ell: u32,
        p: u64,
        a: u32,
        value: String,
    },
}

impl From<ArithError> for AbundancyError {
    fn from(_: ArithError) -> Self {
        AbundancyError::ZeroN
    }
}

fn check(ell: u32, n: u64, min_ell: u32) -> Result<(), AbundancyError> {
    if ell < min_ell {
        return Err(AbundancyError::InvalidEll {
            got: ell,
            min: min_ell,
        });
    }
    if n == 0 {
        return Err(AbundancyError::ZeroN);
    }
    Ok(())
}

/// Sum over flags `d_1 | ... | d_{l-1} | n` of `d_1 ... d_{l-1}`.
pub fn b_via_flags(ell: u32, n: u64) -> Result<ExactInt, AbundancyError> {
    check(ell, n, 1)?;
    let divs = divisors(n)?;
    Ok(flag_sum(&divs, n, ell - 1))
}

// Sum over chains of length `depth` below `top` (each link divides the next).
fn flag_sum(divs: &[u64], top: u64, depth: u32) -> ExactInt {
    if depth == 0 {
        return ExactInt::one();
    }
    let mut total = ExactInt::zero();
    for &d in divs.iter().filter(|&&d| top.is_multiple_of(d)) {
        total += flag_sum(divs, d, depth - 1) * d;
    }
    total
}

pub fn b_via_recursion(ell: u32, n: u64) -> Result<ExactInt, AbundancyError> {
    check(ell, n, 1)?;
    if ell == 1 {
        return Ok(ExactInt::one());
    }
    let mut total = ExactInt::zero();
    for d in divisors(n)? {
        total += pow_u64(n / d, ell - 1) * b_via_recursion(ell - 1, d)?;
    }
    Ok(total)
}

/// Prime-power factor `B^(l, p, a)` of the multiplicative function `B(l, .)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalFactor {
    pub ell: u32,
    pub p: u64,
    pub a: u32,
    pub value: ExactInt,
}

impl LocalFactor {
    /// Evaluates `p^((l-1)a) (p^(-a-1); p^(-1))_{l-1} / (p^(-1); p^(-1))_{l-1}`
    /// over exact rationals and insists on an integral result.
    pub fn new(ell: u32, p: u64, a: u32) -> Result<Self, AbundancyError> {
        check(ell, 1, 1)?;
        if !is_prime(p) {
            return Err(AbundancyError::NotPrime(p));
        }
        let inv_p = ExactRational::new(BigInt::one(), BigInt::from(p));
        let shifted = num_traits::pow(inv_p.clone(), a as usize + 1);
        let quotient = qpoch(&shifted, &inv_p, ell - 1) / qpoch(&inv_p, &inv_p, ell - 1);
        let scaled = int_to_rational(&pow_u64(p, (ell - 1) * a)) * quotient;
        let value = rational_to_int(&scaled).ok_or_else(|| AbundancyError::NonIntegral {
            ell,
            p,
            a,
            value: scaled.to_string(),
        })?;
        Ok(LocalFactor { ell, p, a, value })
    }
}

pub fn local_factor(ell: u32, p: u64, a: u32) -> Result<ExactInt, AbundancyError> {
    LocalFactor::new(ell, p, a).map(|f| f.value)
}

pub fn b_via_multiplicativity(ell: u32, n: u64) -> Result<ExactInt, AbundancyError> {
    check(ell, n, 1)?;
    let mut total = ExactInt::one();
    for &(p, a) in factorize(n)?.factors() {
        total *= local_factor(ell, p, a)?;
    }
    Ok(total)
}

/// `B(l, n) / n^(l-1)` as an exact rational.
pub fn abundancy_index(ell: u32, n: u64) -> Result<ExactRational, AbundancyError> {
    check(ell, n, 2)?;
    let b = b_via_multiplicativity(ell, n)?;
    Ok(int_to_rational(&b) / int_to_rational(&pow_u64(n, ell - 1)))
}
