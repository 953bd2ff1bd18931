//! The multiplicative scheme. Candidate `j` is identified with the `j`-th
//! prime; a ballot is the product of the approved candidates' primes. Each
//! voter masks its ballot with a randomizer made of candidate primes, splits
//! the masked value multiplicatively across the `n` voters, multiplies the
//! column it receives, divides out its own randomizer and broadcasts the
//! result. The product of the broadcasts is `2^{x_1} 3^{x_2} ... p_m^{x_m}`,
//! where `x_j` is candidate `j`'s approval count.

mod domain;

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::godel_core::{ExponentVector, GodelError, PrimeBase};

pub use domain::{ExactDomain, FieldDomain, ShareDomain};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemeError {
    #[error("candidate {candidate} out of range for {m} candidates")]
    CandidateOutOfRange { candidate: usize, m: usize },
    #[error("voter {voter} approves {count} candidates, cap is {cap}")]
    TooManyApprovals { voter: usize, count: usize, cap: usize },
    #[error("{0} is not a candidate prime")]
    ForeignPrime(u64),
    #[error("randomizer must contain at least one prime")]
    EmptyRandomizer,
    #[error("uniform share splitting needs field arithmetic")]
    UniformNeedsField,
    #[error("share matrix incomplete: missing row from voter {missing}")]
    MissingRow { missing: usize },
    #[error("row from voter {owner} has {got} shares, expected {expected}")]
    RaggedRow { owner: usize, expected: usize, got: usize },
    #[error("tally is inconsistent: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Godel(#[from] GodelError),
}

/// A voter's approval set over 0-based candidate indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApprovalBallot {
    pub voter: usize,
    pub approvals: BTreeSet<usize>,
}

impl ApprovalBallot {
    pub fn new(voter: usize, approvals: impl IntoIterator<Item = usize>) -> Self {
        Self {
            voter,
            approvals: approvals.into_iter().collect(),
        }
    }

    pub fn validate(&self, m: usize, cap: Option<usize>) -> Result<(), SchemeError> {
        if let Some(&candidate) = self.approvals.iter().find(|&&c| c >= m) {
            return Err(SchemeError::CandidateOutOfRange { candidate, m });
        }
        match cap {
            Some(cap) if self.approvals.len() > cap => Err(SchemeError::TooManyApprovals {
                voter: self.voter,
                count: self.approvals.len(),
                cap,
            }),
            _ => Ok(()),
        }
    }

    pub fn exponents(&self, m: usize) -> ExponentVector {
        let mut x = ExponentVector::zeros(m);
        for &c in &self.approvals {
            x.bump(c);
        }
        x
    }
}

/// One prime per approved candidate; abstaining everywhere gives the empty product.
pub fn ballot_to_factors(ballot: &ApprovalBallot, base: &PrimeBase) -> Result<Vec<u64>, SchemeError> {
    ballot.validate(base.len(), None)?;
    Ok(ballot
        .approvals
        .iter()
        .map(|&c| base.prime(c).expect("validated index"))
        .collect())
}

/// A voter's private mask: a nonempty multiset of candidate primes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Randomizer {
    primes: Vec<u64>,
}

impl Randomizer {
    pub fn new(mut primes: Vec<u64>, base: &PrimeBase) -> Result<Self, SchemeError> {
        if primes.is_empty() {
            return Err(SchemeError::EmptyRandomizer);
        }
        if let Some(&p) = primes.iter().find(|&&p| base.index_of(p).is_none()) {
            return Err(SchemeError::ForeignPrime(p));
        }
        primes.sort_unstable();
        Ok(Self { primes })
    }

    /// The empty randomizer, for degenerate tests only; the protocol never draws it.
    pub fn trivial() -> Self {
        Self { primes: Vec::new() }
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn exponents(&self, base: &PrimeBase) -> ExponentVector {
        let mut x = ExponentVector::zeros(base.len());
        for &p in &self.primes {
            x.bump(base.index_of(p).expect("randomizer primes come from the base"));
        }
        x
    }
}

/// A uniformly random nonempty subset of the candidate primes.
pub fn draw_randomizer<R: Rng + ?Sized>(base: &PrimeBase, rng: &mut R) -> Randomizer {
    draw_randomizer_with_multiplicity(base, 1, rng)
}

/// Each prime's multiplicity is uniform on `0..=max_multiplicity`, redrawn
/// until at least one prime is present. `max_multiplicity = 1` is the uniform
/// nonempty subset.
pub fn draw_randomizer_with_multiplicity<R: Rng + ?Sized>(
    base: &PrimeBase,
    max_multiplicity: u32,
    rng: &mut R,
) -> Randomizer {
    let max_multiplicity = max_multiplicity.max(1);
    loop {
        let mut primes = Vec::new();
        for &p in base.primes() {
            for _ in 0..rng.gen_range(0..=max_multiplicity) {
                primes.push(p);
            }
        }
        if !primes.is_empty() {
            return Randomizer { primes };
        }
    }
}

/// How a masked ballot is spread over the `n` slots of its row.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Every prime factor lands in a uniformly random slot; empty slots hold 1.
    #[default]
    FactorScatter,
    /// The first `n - 1` slots are uniform nonzero field elements and the last
    /// one fixes the product.
    UniformField,
}

/// Row `i` of the transfer matrix: `shares[j]` goes to voter `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplicativeShareRow<E> {
    pub owner: usize,
    pub shares: Vec<E>,
}

/// Ballot times randomizer.
pub fn masked_ballot<D: ShareDomain>(domain: &D, factors: &[u64], randomizer: &Randomizer) -> D::Elem {
    let base = domain.base();
    let mut x = randomizer.exponents(base);
    for &p in factors {
        x.bump(base.index_of(p).expect("ballot factors come from the base"));
    }
    domain.element_of(&x)
}

pub fn split_factors<D: ShareDomain, R: Rng + ?Sized>(
    domain: &D,
    owner: usize,
    factors: &[u64],
    randomizer: &Randomizer,
    n: usize,
    mode: SplitMode,
    rng: &mut R,
) -> Result<MultiplicativeShareRow<D::Elem>, SchemeError> {
    assert!(n >= 1, "cannot split among zero voters");
    let base = domain.base();
    if let Some(&p) = factors.iter().find(|&&p| base.index_of(p).is_none()) {
        return Err(SchemeError::ForeignPrime(p));
    }
    match mode {
        SplitMode::FactorScatter => {
            let m = base.len();
            let mut slots = vec![ExponentVector::zeros(m); n];
            for &p in factors.iter().chain(randomizer.primes()) {
                let slot = rng.gen_range(0..n);
                slots[slot].bump(base.index_of(p).expect("checked above"));
            }
            Ok(MultiplicativeShareRow {
                owner,
                shares: slots.iter().map(|x| domain.element_of(x)).collect(),
            })
        }
        SplitMode::UniformField => {
            let free = (0..n - 1)
                .map(|_| domain.random_unit(rng).ok_or(SchemeError::UniformNeedsField))
                .collect::<Result<Vec<_>, _>>()?;
            let masked = masked_ballot(domain, factors, randomizer);
            complete_uniform_row(domain, owner, &masked, free)
        }
    }
}

/// Appends the slot that makes the row multiply to `masked`.
pub fn complete_uniform_row<D: ShareDomain>(
    domain: &D,
    owner: usize,
    masked: &D::Elem,
    mut free: Vec<D::Elem>,
) -> Result<MultiplicativeShareRow<D::Elem>, SchemeError> {
    let so_far = domain.product(free.iter());
    free.push(domain.mul(masked, &domain.inv(&so_far)?));
    Ok(MultiplicativeShareRow { owner, shares: free })
}

fn check_rows<E>(rows: &[MultiplicativeShareRow<E>], n: usize) -> Result<(), SchemeError> {
    let mut present = vec![false; n];
    for row in rows {
        if let Some(slot) = present.get_mut(row.owner) {
            *slot = true;
        }
    }
    if let Some(missing) = present.iter().position(|&p| !p) {
        return Err(SchemeError::MissingRow { missing });
    }
    for row in rows {
        if row.shares.len() != n {
            return Err(SchemeError::RaggedRow {
                owner: row.owner,
                expected: n,
                got: row.shares.len(),
            });
        }
    }
    Ok(())
}

/// `C_j`: the product of column `j` over all `n` rows.
pub fn column_product<D: ShareDomain>(
    domain: &D,
    rows: &[MultiplicativeShareRow<D::Elem>],
    n: usize,
    column: usize,
) -> Result<D::Elem, SchemeError> {
    check_rows(rows, n)?;
    Ok(domain.product(rows.iter().map(|r| &r.shares[column])))
}

/// A voter's column product with its own randomizer divided out.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialTally<E> {
    pub voter: usize,
    pub value: E,
}

pub fn derandomize<D: ShareDomain>(
    domain: &D,
    voter: usize,
    column: &D::Elem,
    randomizer: &Randomizer,
) -> Result<PartialTally<D::Elem>, SchemeError> {
    let mask = domain.element_of(&randomizer.exponents(domain.base()));
    Ok(PartialTally {
        voter,
        value: domain.mul(column, &domain.inv(&mask)?),
    })
}

/// The decoded election total.
#[derive(Clone, Debug, PartialEq)]
pub struct GodelTally<E> {
    /// Product of every partial tally.
    pub value: E,
    /// Its exponent vector; exponent `j` is candidate `j`'s count.
    pub exponents: ExponentVector,
    pub counts: Vec<u64>,
}

/// Multiplies the partial tallies and reads each candidate's count off its
/// prime's exponent. A negative exponent, a foreign factor or a count above
/// the number of partials means some partial was inconsistent.
pub fn tally<'a, D, I>(domain: &D, partials: I) -> Result<GodelTally<D::Elem>, SchemeError>
where
    D: ShareDomain,
    I: IntoIterator<Item = &'a D::Elem>,
    D::Elem: 'a,
{
    let mut voters = 0usize;
    let value = domain.product(partials.into_iter().inspect(|_| voters += 1));
    let exponents = domain
        .exponents(&value)
        .map_err(|e| SchemeError::Corrupt(e.to_string()))?;
    let counts = exponents
        .as_slice()
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            if x < 0 {
                Err(SchemeError::Corrupt(format!("candidate {j} has exponent {x}")))
            } else if x as usize > voters {
                Err(SchemeError::Corrupt(format!(
                    "candidate {j} has {x} approvals from {voters} voters"
                )))
            } else {
                Ok(x as u64)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GodelTally { value, exponents, counts })
}
