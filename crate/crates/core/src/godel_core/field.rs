use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigUint;
use num_traits::{One, Pow, Zero};

use super::primes::{is_probable_prime, next_prime_above, PrimeBase};
use super::GodelError;

/// Modulus of the prime field the multiplicative scheme computes in.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FieldParams {
    modulus: BigUint,
}

impl FieldParams {
    pub fn new(modulus: BigUint) -> Result<Self, GodelError> {
        if !is_probable_prime(&modulus) {
            return Err(GodelError::NotPrime(modulus));
        }
        Ok(Self { modulus })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    /// Reduces `value` into the field.
    pub fn element(self: &Arc<Self>, value: impl Into<BigUint>) -> FieldElement {
        FieldElement {
            value: value.into() % &self.modulus,
            params: Arc::clone(self),
        }
    }

    pub fn one(self: &Arc<Self>) -> FieldElement {
        self.element(BigUint::one())
    }

    /// Whether every tally of an `(m, n)` election stays below the modulus.
    pub fn admits(&self, base: &PrimeBase, voters: usize) -> bool {
        tally_bound(base, voters) < self.modulus
    }
}

/// Largest integer tally an election over `base` with `voters` voters can produce.
pub fn tally_bound(base: &PrimeBase, voters: usize) -> BigUint {
    Pow::pow(base.primorial(), voters)
}

type ParamCache = Mutex<HashMap<(usize, usize), Arc<FieldParams>>>;

/// Least prime strictly above `(p_1 * ... * p_m)^n`, so the integer tally is
/// recoverable from its residue. Memoized per `(m, n)`.
pub fn choose_field_prime(m: usize, n: usize) -> Result<Arc<FieldParams>, GodelError> {
    static CACHE: OnceLock<ParamCache> = OnceLock::new();
    if n == 0 {
        return Err(GodelError::NoVoters);
    }
    let cache = CACHE.get_or_init(Default::default);
    if let Some(params) = cache.lock().expect("field cache poisoned").get(&(m, n)) {
        return Ok(Arc::clone(params));
    }
    let base = PrimeBase::first(m)?;
    let modulus = next_prime_above(&tally_bound(&base, n));
    let params = Arc::new(FieldParams { modulus });
    cache
        .lock()
        .expect("field cache poisoned")
        .insert((m, n), Arc::clone(&params));
    Ok(params)
}

/// A residue modulo the field prime.
#[derive(Clone, Debug)]
pub struct FieldElement {
    value: BigUint,
    params: Arc<FieldParams>,
}

impl FieldElement {
    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn params(&self) -> &Arc<FieldParams> {
        &self.params
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    fn check_same_field(&self, other: &Self) -> Result<(), GodelError> {
        if Arc::ptr_eq(&self.params, &other.params) || self.params == other.params {
            Ok(())
        } else {
            Err(GodelError::ModulusMismatch {
                left: self.params.modulus.clone(),
                right: other.params.modulus.clone(),
            })
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self, GodelError> {
        self.check_same_field(other)?;
        Ok(Self {
            value: (&self.value * &other.value) % &self.params.modulus,
            params: Arc::clone(&self.params),
        })
    }

    pub fn inv(&self) -> Result<Self, GodelError> {
        let value = self
            .value
            .modinv(&self.params.modulus)
            .ok_or(GodelError::ZeroInverse)?;
        Ok(Self {
            value,
            params: Arc::clone(&self.params),
        })
    }
}

impl PartialEq for FieldElement {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value && self.params.modulus == other.params.modulus
    }
}

impl Eq for FieldElement {}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

pub fn field_mul(a: &FieldElement, b: &FieldElement) -> Result<FieldElement, GodelError> {
    a.mul(b)
}

pub fn field_inv(a: &FieldElement) -> Result<FieldElement, GodelError> {
    a.inv()
}
