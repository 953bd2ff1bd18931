//! Adapters giving the simulator one interface over both schemes.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Pow};
use rand::Rng;

use crate::godel_core::{choose_field_prime, ExponentVector, FieldParams, PrimeBase};
use crate::goedel_scheme::{
    self, ballot_to_factors, draw_randomizer_with_multiplicity, ApprovalBallot, ExactDomain,
    FieldDomain, Randomizer, ShareDomain, SplitMode,
};
use crate::sun_liu::{self, AdditiveMode, AdditiveShareRow, BallotLayout};

use super::config::{Arithmetic, ConfigError, ElectionConfig, SchemeKind};
use super::SimError;

/// A decoded tally: per-candidate counts plus the aggregate value.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded<V> {
    pub counts: Vec<u64>,
    pub total: V,
}

pub trait Engine {
    /// Shares, column aggregates and partial tallies.
    type Value: Clone + fmt::Debug + PartialEq + Send + Sync;
    /// A voter's private randomizer.
    type Secret: Clone + fmt::Debug;

    fn candidates(&self) -> usize;

    /// The ballot's plain encoding: the packed integer or the prime product.
    fn encode(&self, ballot: &ApprovalBallot) -> Result<Self::Value, SimError>;

    /// Draws (or looks up) the voter's randomizer and produces its share row.
    fn cast<R: Rng + ?Sized>(
        &self,
        voter: usize,
        n: usize,
        ballot: &ApprovalBallot,
        rng: &mut R,
    ) -> Result<(Self::Secret, Vec<Self::Value>), SimError>;

    fn aggregate<'a, I>(&self, column: I) -> Self::Value
    where
        I: IntoIterator<Item = &'a Self::Value>,
        Self::Value: 'a;

    fn derandomize(&self, voter: usize, column: &Self::Value, secret: &Self::Secret) -> Result<Self::Value, SimError>;

    fn decode(&self, total: &Self::Value, voters: usize) -> Result<Vec<u64>, SimError>;

    fn combine<'a, I>(&self, partials: I, voters: usize) -> Result<Decoded<Self::Value>, SimError>
    where
        I: IntoIterator<Item = &'a Self::Value>,
        Self::Value: 'a,
    {
        let total = self.aggregate(partials);
        let counts = self.decode(&total, voters)?;
        Ok(Decoded { counts, total })
    }

    /// Decimal rendering used on the wire and in transcripts.
    fn render(&self, value: &Self::Value) -> String;

    fn parse(&self, text: &str) -> Result<Self::Value, SimError>;

    fn render_secret(&self, secret: &Self::Secret) -> String;

    /// Size of the share space when it is a finite group small enough to
    /// enumerate categories over.
    fn share_space(&self) -> Option<BigUint>;

    /// Whether a share visibly exposes candidate primes (a non-trivial
    /// product of base primes).
    fn exposes_factors(&self, share: &Self::Value) -> bool;
}

pub struct SunLiuEngine {
    layout: BallotLayout,
    mode: AdditiveMode,
    randomizers: Option<Vec<BigInt>>,
    matrix: Option<Vec<Vec<BigInt>>>,
}

impl SunLiuEngine {
    pub fn new(layout: BallotLayout, mode: AdditiveMode) -> Self {
        Self {
            layout,
            mode,
            randomizers: None,
            matrix: None,
        }
    }

    pub fn from_config(cfg: &ElectionConfig, n: usize) -> Result<Self, ConfigError> {
        let layout = sun_liu::make_layout(cfg.candidates, n)
            .map_err(|e| ConfigError::new("voters", e.to_string()))?;
        let mode = if cfg.sun_liu.modular {
            match cfg.sun_liu.modulus_bits {
                Some(bits) => AdditiveMode::Modular(BigUint::one() << bits),
                None => AdditiveMode::modular_for(&layout),
            }
        } else {
            AdditiveMode::Plain
        };
        let mut engine = Self::new(layout, mode);
        engine.randomizers = cfg
            .sun_liu
            .randomizers
            .as_ref()
            .map(|r| r.iter().map(|&x| BigInt::from(x)).collect());
        engine.matrix = cfg
            .sun_liu
            .transfer_matrix
            .as_ref()
            .map(|t| t.iter().map(|row| row.iter().map(|&x| BigInt::from(x)).collect()).collect());
        Ok(engine)
    }

    pub fn layout(&self) -> &BallotLayout {
        &self.layout
    }

    pub fn mode(&self) -> &AdditiveMode {
        &self.mode
    }

    pub(crate) fn check_tally_capacity(&self) -> Result<(), ConfigError> {
        self.mode
            .check_layout(&self.layout)
            .map_err(|e| ConfigError::new("sun_liu.modulus_bits", e.to_string()))
    }
}

impl Engine for SunLiuEngine {
    type Value = BigInt;
    type Secret = BigInt;

    fn candidates(&self) -> usize {
        self.layout.m
    }

    fn encode(&self, ballot: &ApprovalBallot) -> Result<BigInt, SimError> {
        Ok(BigInt::from(sun_liu::encode_ballot(&ballot.approvals, &self.layout)?.value))
    }

    fn cast<R: Rng + ?Sized>(
        &self,
        voter: usize,
        n: usize,
        ballot: &ApprovalBallot,
        rng: &mut R,
    ) -> Result<(BigInt, Vec<BigInt>), SimError> {
        let v = sun_liu::encode_ballot(&ballot.approvals, &self.layout)?;
        let randomizer = match &self.randomizers {
            Some(r) => r[voter].clone(),
            None => self.mode.draw_randomizer(&self.layout, rng),
        };
        let masked = self.mode.reduce(sun_liu::randomize(&BigInt::from(v.value), &randomizer));
        let row = match &self.matrix {
            Some(matrix) => {
                let row = AdditiveShareRow { owner: voter, shares: matrix[voter].clone() };
                if row.total(&self.mode) != masked {
                    return Err(ConfigError::new(
                        format!("sun_liu.transfer_matrix[{voter}]"),
                        format!("row sums to {}, voter's randomized ballot is {masked}", row.total(&self.mode)),
                    )
                    .into());
                }
                row
            }
            None => sun_liu::split_additive(voter, &masked, n, &self.mode, rng),
        };
        Ok((randomizer, row.shares))
    }

    fn aggregate<'a, I>(&self, column: I) -> BigInt
    where
        I: IntoIterator<Item = &'a BigInt>,
    {
        self.mode.reduce(column.into_iter().sum())
    }

    fn derandomize(&self, _voter: usize, column: &BigInt, secret: &BigInt) -> Result<BigInt, SimError> {
        Ok(sun_liu::derandomize(column, secret, &self.mode))
    }

    fn decode(&self, total: &BigInt, _voters: usize) -> Result<Vec<u64>, SimError> {
        Ok(sun_liu::decode_tally(total, &self.layout)?)
    }

    fn render(&self, value: &BigInt) -> String {
        value.to_string()
    }

    fn parse(&self, text: &str) -> Result<BigInt, SimError> {
        BigInt::from_str(text).map_err(|_| SimError::Transcript(format!("bad integer payload {text:?}")))
    }

    fn render_secret(&self, secret: &BigInt) -> String {
        secret.to_string()
    }

    fn share_space(&self) -> Option<BigUint> {
        match &self.mode {
            AdditiveMode::Plain => None,
            AdditiveMode::Modular(q) => Some(q.clone()),
        }
    }

    fn exposes_factors(&self, _share: &BigInt) -> bool {
        false
    }
}

pub struct GoedelEngine<D: ShareDomain> {
    domain: D,
    split: SplitMode,
    multiplicity: u32,
    randomizers: Option<Vec<Randomizer>>,
    matrix: Option<Vec<Vec<ExponentVector>>>,
}

impl<D: ShareDomain> GoedelEngine<D> {
    pub fn new(domain: D, split: SplitMode) -> Self {
        Self {
            domain,
            split,
            multiplicity: 1,
            randomizers: None,
            matrix: None,
        }
    }

    pub fn domain(&self) -> &D {
        &self.domain
    }

    fn configure(mut self, cfg: &ElectionConfig) -> Result<Self, ConfigError> {
        let base = self.domain.base().clone();
        self.multiplicity = cfg.goedel.randomizer_multiplicity;
        if let Some(rs) = &cfg.goedel.randomizers {
            self.randomizers = Some(
                rs.iter()
                    .enumerate()
                    .map(|(i, primes)| {
                        Randomizer::new(primes.clone(), &base)
                            .map_err(|e| ConfigError::new(format!("goedel.randomizers[{i}]"), e.to_string()))
                    })
                    .collect::<Result<_, _>>()?,
            );
        }
        if let Some(t) = &cfg.goedel.transfer_matrix {
            let mut matrix = Vec::with_capacity(t.len());
            for (i, row) in t.iter().enumerate() {
                let mut cells = Vec::with_capacity(row.len());
                for (j, primes) in row.iter().enumerate() {
                    let mut x = ExponentVector::zeros(base.len());
                    for &p in primes {
                        let c = base.index_of(p).ok_or_else(|| {
                            ConfigError::new(
                                format!("goedel.transfer_matrix[{i}][{j}]"),
                                format!("{p} is not a candidate prime"),
                            )
                        })?;
                        x.bump(c);
                    }
                    cells.push(x);
                }
                matrix.push(cells);
            }
            self.matrix = Some(matrix);
        }
        Ok(self)
    }
}

pub fn exact_engine(cfg: &ElectionConfig) -> Result<GoedelEngine<ExactDomain>, ConfigError> {
    let base = prime_base(cfg)?;
    GoedelEngine::new(ExactDomain::new(base), cfg.goedel.split).configure(cfg)
}

/// Field engine over `cfg`'s modulus override or the sized prime for `n` voters.
pub fn field_engine(cfg: &ElectionConfig, n: usize) -> Result<GoedelEngine<FieldDomain>, ConfigError> {
    let base = prime_base(cfg)?;
    let params = match cfg.field_prime()? {
        Some(p) => Arc::new(
            FieldParams::new(p).map_err(|e| ConfigError::new("goedel.field_prime", e.to_string()))?,
        ),
        None => choose_field_prime(cfg.candidates, n).map_err(|e| ConfigError::new("voters", e.to_string()))?,
    };
    GoedelEngine::new(FieldDomain::new(base, params), cfg.goedel.split).configure(cfg)
}

fn prime_base(cfg: &ElectionConfig) -> Result<PrimeBase, ConfigError> {
    PrimeBase::first(cfg.candidates).map_err(|e| ConfigError::new("candidates", e.to_string()))
}

impl GoedelEngine<FieldDomain> {
    pub(crate) fn check_tally_capacity(&self, n: usize) -> Result<(), ConfigError> {
        if self.domain.params().admits(self.domain.base(), n) {
            Ok(())
        } else {
            Err(ConfigError::new(
                "goedel.field_prime",
                format!(
                    "modulus {} does not exceed the largest possible tally for {n} voters",
                    self.domain.params().modulus()
                ),
            ))
        }
    }
}

impl<D: ShareDomain> Engine for GoedelEngine<D> {
    type Value = D::Elem;
    type Secret = Randomizer;

    fn candidates(&self) -> usize {
        self.domain.base().len()
    }

    fn encode(&self, ballot: &ApprovalBallot) -> Result<D::Elem, SimError> {
        ballot.validate(self.candidates(), None)?;
        Ok(self.domain.element_of(&ballot.exponents(self.candidates())))
    }

    fn cast<R: Rng + ?Sized>(
        &self,
        voter: usize,
        n: usize,
        ballot: &ApprovalBallot,
        rng: &mut R,
    ) -> Result<(Randomizer, Vec<D::Elem>), SimError> {
        let base = self.domain.base();
        let factors = ballot_to_factors(ballot, base)?;
        let randomizer = match &self.randomizers {
            Some(r) => r[voter].clone(),
            None => draw_randomizer_with_multiplicity(base, self.multiplicity, rng),
        };
        let shares = match &self.matrix {
            Some(matrix) => {
                let row = &matrix[voter];
                let total = row.iter().fold(ExponentVector::zeros(base.len()), |acc, x| acc.mul(x));
                let expected = ballot.exponents(base.len()).mul(&randomizer.exponents(base));
                if total != expected {
                    return Err(ConfigError::new(
                        format!("goedel.transfer_matrix[{voter}]"),
                        format!(
                            "row multiplies to {}, voter's masked ballot is {}",
                            total.factored(base),
                            expected.factored(base)
                        ),
                    )
                    .into());
                }
                row.iter().map(|x| self.domain.element_of(x)).collect()
            }
            None => goedel_scheme::split_factors(&self.domain, voter, &factors, &randomizer, n, self.split, rng)?.shares,
        };
        Ok((randomizer, shares))
    }

    fn aggregate<'a, I>(&self, column: I) -> D::Elem
    where
        I: IntoIterator<Item = &'a D::Elem>,
        D::Elem: 'a,
    {
        self.domain.product(column)
    }

    fn derandomize(&self, voter: usize, column: &D::Elem, secret: &Randomizer) -> Result<D::Elem, SimError> {
        Ok(goedel_scheme::derandomize(&self.domain, voter, column, secret)?.value)
    }

    fn decode(&self, total: &D::Elem, voters: usize) -> Result<Vec<u64>, SimError> {
        let exponents = self
            .domain
            .exponents(total)
            .map_err(|e| SimError::Scheme(goedel_scheme::SchemeError::Corrupt(e.to_string())))?;
        let counts = exponents
            .as_slice()
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                if x < 0 || x as usize > voters {
                    Err(SimError::Scheme(goedel_scheme::SchemeError::Corrupt(format!(
                        "candidate {j} has exponent {x} with {voters} voters"
                    ))))
                } else {
                    Ok(x as u64)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(counts)
    }

    fn render(&self, value: &D::Elem) -> String {
        self.domain.render(value)
    }

    fn parse(&self, text: &str) -> Result<D::Elem, SimError> {
        self.domain
            .parse(text)
            .ok_or_else(|| SimError::Transcript(format!("bad payload {text:?}")))
    }

    fn render_secret(&self, secret: &Randomizer) -> String {
        let product: BigUint = secret.primes().iter().map(|&p| BigUint::from(p)).product();
        product.to_string()
    }

    fn share_space(&self) -> Option<BigUint> {
        self.domain.unit_count()
    }

    fn exposes_factors(&self, share: &D::Elem) -> bool {
        match self.domain.exponents(share) {
            Ok(x) => x.is_non_negative() && !x.is_identity(),
            Err(_) => false,
        }
    }
}

/// `(prod p_j)^n` in bits: the Gödel tally magnitude bound.
pub fn goedel_tally_bits(m: usize, n: usize) -> u64 {
    let base = PrimeBase::first(m.max(1)).expect("nonempty base");
    Pow::pow(base.primorial(), n).bits()
}

/// Engine choice resolved from a config.
pub enum AnyEngine {
    SunLiu(SunLiuEngine),
    Exact(GoedelEngine<ExactDomain>),
    Field(GoedelEngine<FieldDomain>),
}

impl AnyEngine {
    pub fn from_config(cfg: &ElectionConfig, n: usize) -> Result<Self, ConfigError> {
        Ok(match cfg.scheme {
            SchemeKind::SunLiu => AnyEngine::SunLiu(SunLiuEngine::from_config(cfg, n)?),
            SchemeKind::Goedel => match cfg.goedel.arithmetic {
                Arithmetic::Exact => AnyEngine::Exact(exact_engine(cfg)?),
                Arithmetic::Field => AnyEngine::Field(field_engine(cfg, n)?),
            },
        })
    }
}
