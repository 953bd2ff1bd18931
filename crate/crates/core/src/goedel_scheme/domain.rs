use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::{BigUint, RandBigInt};
use num_traits::One;
use rand::Rng;

use crate::godel_core::{exponent_vector_of_ratio, godel_decode, ExponentVector, FieldElement, FieldParams, GodelError, PrimeBase};

/// Where shares, column products and partial tallies live.
///
/// [`ExactDomain`] keeps every value as a signed exponent vector, so products
/// and inverses are exact. [`FieldDomain`] works with residues modulo a prime,
/// which is what travels on the wire, and is the only domain that can sample
/// uniformly random shares.
pub trait ShareDomain {
    type Elem: Clone + fmt::Debug + PartialEq + Send + Sync;

    fn base(&self) -> &PrimeBase;

    fn one(&self) -> Self::Elem;

    /// The element for `prod p_j^{x_j}`; negative exponents are inverses.
    fn element_of(&self, x: &ExponentVector) -> Self::Elem;

    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;

    fn inv(&self, a: &Self::Elem) -> Result<Self::Elem, GodelError>;

    /// A uniform draw from the nonzero elements, if the domain supports it.
    fn random_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Self::Elem>;

    /// Exponent vector of an element known to be a product of base primes
    /// and their inverses. In the field this requires the integer to be below
    /// the modulus.
    fn exponents(&self, a: &Self::Elem) -> Result<ExponentVector, GodelError>;

    /// Decimal rendering for transcripts.
    fn render(&self, a: &Self::Elem) -> String;

    /// Inverse of [`ShareDomain::render`].
    fn parse(&self, text: &str) -> Option<Self::Elem>;

    /// Number of nonzero elements, for finite domains.
    fn unit_count(&self) -> Option<BigUint> {
        None
    }

    fn product<'a, I>(&self, items: I) -> Self::Elem
    where
        I: IntoIterator<Item = &'a Self::Elem>,
        Self::Elem: 'a,
    {
        items.into_iter().fold(self.one(), |acc, x| self.mul(&acc, x))
    }
}

#[derive(Clone, Debug)]
pub struct ExactDomain {
    base: PrimeBase,
}

impl ExactDomain {
    pub fn new(base: PrimeBase) -> Self {
        Self { base }
    }
}

impl ShareDomain for ExactDomain {
    type Elem = ExponentVector;

    fn base(&self) -> &PrimeBase {
        &self.base
    }

    fn one(&self) -> ExponentVector {
        ExponentVector::zeros(self.base.len())
    }

    fn element_of(&self, x: &ExponentVector) -> ExponentVector {
        x.clone()
    }

    fn mul(&self, a: &ExponentVector, b: &ExponentVector) -> ExponentVector {
        a.mul(b)
    }

    fn inv(&self, a: &ExponentVector) -> Result<ExponentVector, GodelError> {
        Ok(a.inverse())
    }

    fn random_unit<R: Rng + ?Sized>(&self, _rng: &mut R) -> Option<ExponentVector> {
        None
    }

    fn exponents(&self, a: &ExponentVector) -> Result<ExponentVector, GodelError> {
        Ok(a.clone())
    }

    fn render(&self, a: &ExponentVector) -> String {
        a.render(&self.base)
    }

    fn parse(&self, text: &str) -> Option<ExponentVector> {
        let (num, den) = text.split_once('/').unwrap_or((text, "1"));
        let num = BigUint::from_str(num).ok()?;
        let den = BigUint::from_str(den).ok()?;
        exponent_vector_of_ratio(&num, &den, &self.base).ok()
    }

    fn product<'a, I>(&self, items: I) -> ExponentVector
    where
        I: IntoIterator<Item = &'a ExponentVector>,
    {
        let mut acc = self.one();
        for x in items {
            acc.mul_assign(x);
        }
        acc
    }
}

#[derive(Clone, Debug)]
pub struct FieldDomain {
    base: PrimeBase,
    params: Arc<FieldParams>,
    primes: Vec<FieldElement>,
}

impl FieldDomain {
    pub fn new(base: PrimeBase, params: Arc<FieldParams>) -> Self {
        let primes = base.primes().iter().map(|&p| params.element(p)).collect();
        Self { base, params, primes }
    }

    pub fn params(&self) -> &Arc<FieldParams> {
        &self.params
    }

    pub fn element(&self, value: impl Into<BigUint>) -> FieldElement {
        self.params.element(value)
    }
}

impl ShareDomain for FieldDomain {
    type Elem = FieldElement;

    fn base(&self) -> &PrimeBase {
        &self.base
    }

    fn one(&self) -> FieldElement {
        self.params.one()
    }

    fn element_of(&self, x: &ExponentVector) -> FieldElement {
        let mut acc = self.one();
        for (prime, &e) in self.primes.iter().zip(x.as_slice()) {
            let factor = if e >= 0 {
                prime.clone()
            } else {
                prime.inv().expect("candidate primes are units")
            };
            for _ in 0..e.unsigned_abs() {
                acc = self.mul(&acc, &factor);
            }
        }
        acc
    }

    fn mul(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        a.mul(b).expect("elements of one field")
    }

    fn inv(&self, a: &FieldElement) -> Result<FieldElement, GodelError> {
        a.inv()
    }

    fn random_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<FieldElement> {
        let value = rng.gen_biguint_range(&BigUint::one(), self.params.modulus());
        Some(self.params.element(value))
    }

    fn exponents(&self, a: &FieldElement) -> Result<ExponentVector, GodelError> {
        godel_decode(a.value(), &self.base)
    }

    fn render(&self, a: &FieldElement) -> String {
        a.value().to_string()
    }

    fn parse(&self, text: &str) -> Option<FieldElement> {
        let value = BigUint::from_str(text).ok()?;
        (&value < self.params.modulus()).then(|| self.params.element(value))
    }

    fn unit_count(&self) -> Option<BigUint> {
        Some(self.params.modulus() - 1u32)
    }
}
