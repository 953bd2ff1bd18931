//! Numeric substrate shared by both voting schemes: the candidate prime base,
//! exact exponent-vector arithmetic, prime-field arithmetic and Gödel
//! encode/decode by trial division over the base.
//!
//! Exponent vectors are the canonical exact representation. A product of
//! candidate primes is an exponent sum and an inverse is a negation, so masked
//! ballots and partial tallies carrying inverse factors stay exact. The field
//! representation is the wire-level mode; its modulus is sized so the final
//! tally lifts back to an integer that factors over the base.

mod field;
mod primes;

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Pow, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use field::{choose_field_prime, field_inv, field_mul, tally_bound, FieldElement, FieldParams};
pub use primes::{first_primes, is_probable_prime, next_prime_above, PrimeBase};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GodelError {
    #[error("a prime base needs at least one candidate")]
    EmptyBase,
    #[error("an election needs at least one voter")]
    NoVoters,
    #[error("exponent vector has length {got}, base has {expected} primes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("cannot encode negative exponent {exponent} for prime {prime}")]
    NegativeExponent { prime: u64, exponent: i64 },
    #[error("cannot decode zero")]
    DecodeZero,
    #[error("value has a factor outside the prime base; residual {residual}")]
    Decode { residual: BigUint },
    #[error("{0} is not prime")]
    NotPrime(BigUint),
    #[error("field elements from different moduli ({left} vs {right})")]
    ModulusMismatch { left: BigUint, right: BigUint },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
}

/// Signed exponent per base prime: `x` represents `prod p_j^{x_j}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExponentVector(Vec<i64>);

impl ExponentVector {
    /// The multiplicative identity over `m` primes.
    pub fn zeros(m: usize) -> Self {
        Self(vec![0; m])
    }

    /// Exponent 1 at `candidate`, 0 elsewhere.
    pub fn unit(m: usize, candidate: usize) -> Self {
        let mut v = Self::zeros(m);
        v.0[candidate] = 1;
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<i64> {
        self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    pub fn is_non_negative(&self) -> bool {
        self.0.iter().all(|&x| x >= 0)
    }

    /// Product of the two represented values.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.mul_assign(other);
        out
    }

    pub fn mul_assign(&mut self, other: &Self) {
        assert_eq!(self.len(), other.len(), "exponent vectors over different bases");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    /// Quotient `self / other`.
    pub fn div(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "exponent vectors over different bases");
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.iter().map(|x| -x).collect())
    }

    /// Multiplies in one more copy of candidate `j`'s prime.
    pub fn bump(&mut self, candidate: usize) {
        self.0[candidate] += 1;
    }

    /// Numerator and denominator of the represented rational, both exact.
    pub fn to_ratio(&self, base: &PrimeBase) -> (BigUint, BigUint) {
        let mut num = BigUint::one();
        let mut den = BigUint::one();
        for (&p, &x) in base.primes().iter().zip(&self.0) {
            let power: BigUint = Pow::pow(BigUint::from(p), x.unsigned_abs());
            if x >= 0 {
                num *= power;
            } else {
                den *= power;
            }
        }
        (num, den)
    }

    /// Decimal rendering of the represented rational: `"80/3"`, or `"405000"`.
    pub fn render(&self, base: &PrimeBase) -> String {
        let (num, den) = self.to_ratio(base);
        if den.is_one() {
            num.to_string()
        } else {
            format!("{num}/{den}")
        }
    }

    /// Human-readable factored form, e.g. `2^4·3^-1·5`.
    pub fn factored(&self, base: &PrimeBase) -> String {
        let parts: Vec<String> = base
            .primes()
            .iter()
            .zip(&self.0)
            .filter(|(_, &x)| x != 0)
            .map(|(p, &x)| if x == 1 { p.to_string() } else { format!("{p}^{x}") })
            .collect();
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("·")
        }
    }
}

impl From<Vec<i64>> for ExponentVector {
    fn from(v: Vec<i64>) -> Self {
        Self(v)
    }
}

impl fmt::Display for ExponentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

fn check_len(x: &ExponentVector, base: &PrimeBase) -> Result<(), GodelError> {
    if x.len() != base.len() {
        return Err(GodelError::LengthMismatch {
            expected: base.len(),
            got: x.len(),
        });
    }
    Ok(())
}

/// `prod p_j^{x_j}` for a non-negative exponent vector.
pub fn godel_encode(x: &ExponentVector, base: &PrimeBase) -> Result<BigUint, GodelError> {
    check_len(x, base)?;
    if let Some((&prime, &exponent)) = base.primes().iter().zip(x.as_slice()).find(|(_, &e)| e < 0) {
        return Err(GodelError::NegativeExponent { prime, exponent });
    }
    Ok(x.to_ratio(base).0)
}

/// Recovers the exponent vector of `value` by dividing out each base prime in
/// turn. Anything left over is a foreign factor and is reported as the residual.
pub fn godel_decode(value: &BigUint, base: &PrimeBase) -> Result<ExponentVector, GodelError> {
    if value.is_zero() {
        return Err(GodelError::DecodeZero);
    }
    let mut rest = value.clone();
    let mut exponents = Vec::with_capacity(base.len());
    for &p in base.primes() {
        let p = BigUint::from(p);
        let mut count = 0i64;
        loop {
            let (q, r) = num_integer::Integer::div_rem(&rest, &p);
            if !r.is_zero() {
                break;
            }
            rest = q;
            count += 1;
        }
        exponents.push(count);
    }
    if !rest.is_one() {
        return Err(GodelError::Decode { residual: rest });
    }
    Ok(ExponentVector(exponents))
}

/// Exponent vector of the exact rational `numerator / denominator`.
pub fn exponent_vector_of_ratio(
    numerator: &BigUint,
    denominator: &BigUint,
    base: &PrimeBase,
) -> Result<ExponentVector, GodelError> {
    Ok(godel_decode(numerator, base)?.div(&godel_decode(denominator, base)?))
}

/// Exponent vector of a field element, lifting its residue to `[1, p)`. Only
/// meaningful when the represented integer is below the modulus.
pub fn exponent_vector_of_element(
    element: &FieldElement,
    base: &PrimeBase,
) -> Result<ExponentVector, GodelError> {
    godel_decode(element.value(), base)
}
