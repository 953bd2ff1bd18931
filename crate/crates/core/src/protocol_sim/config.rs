use std::collections::BTreeSet;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::goedel_scheme::{ApprovalBallot, SplitMode};

use super::Phase;

/// A configuration problem, named by the offending field.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{field}: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    SunLiu,
    Goedel,
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SchemeKind::SunLiu => "sun-liu",
            SchemeKind::Goedel => "goedel",
        })
    }
}

/// Whether multiplicative shares are exponent vectors or field residues.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arithmetic {
    #[default]
    Exact,
    Field,
}

/// Explicit approval sets (0-based candidate indices), one per voter, or a
/// seeded random draw approving each candidate independently.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BallotSource {
    Explicit(Vec<Vec<usize>>),
    Random { approval_rate: f64 },
}

impl Default for BallotSource {
    fn default() -> Self {
        BallotSource::Random { approval_rate: 0.5 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SunLiuOptions {
    /// Shares and randomizers modulo `q` instead of plain integers.
    pub modular: bool,
    /// `q = 2^modulus_bits`; defaults to `2^max(64, mk)`.
    pub modulus_bits: Option<u32>,
    /// Fixed per-voter randomizers `R_i`.
    pub randomizers: Option<Vec<u64>>,
    /// Fixed transfer matrix; row `i` must sum to voter `i`'s `v_i + R_i`.
    pub transfer_matrix: Option<Vec<Vec<i64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoedelOptions {
    pub split: SplitMode,
    pub arithmetic: Arithmetic,
    /// Overrides the field modulus (decimal). Must be prime.
    pub field_prime: Option<String>,
    /// Upper bound on each prime's multiplicity in a drawn randomizer.
    pub randomizer_multiplicity: u32,
    /// Fixed per-voter randomizers, as lists of candidate primes.
    pub randomizers: Option<Vec<Vec<u64>>>,
    /// Fixed transfer matrix; each cell lists the primes in that share.
    pub transfer_matrix: Option<Vec<Vec<Vec<u64>>>>,
}

impl Default for GoedelOptions {
    fn default() -> Self {
        Self {
            split: SplitMode::FactorScatter,
            arithmetic: Arithmetic::Exact,
            field_prime: None,
            randomizer_multiplicity: 1,
            randomizers: None,
            transfer_matrix: None,
        }
    }
}

/// A voter who leaves at the start of `phase`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dropout {
    pub voter: usize,
    pub phase: Phase,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Faults {
    /// Voters whose announced tally is perturbed after honest computation.
    pub corrupt_tallies: Vec<usize>,
    pub dropout: Option<Dropout>,
}

impl Faults {
    pub fn is_empty(&self) -> bool {
        self.corrupt_tallies.is_empty() && self.dropout.is_none()
    }
}

/// Everything that determines an election run. Two runs of the same config
/// produce byte-identical transcripts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectionConfig {
    pub scheme: SchemeKind,
    pub candidates: usize,
    pub voters: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ballots: BallotSource,
    #[serde(default)]
    pub max_approvals: Option<usize>,
    #[serde(default)]
    pub sun_liu: SunLiuOptions,
    #[serde(default)]
    pub goedel: GoedelOptions,
    #[serde(default, skip_serializing_if = "Faults::is_empty")]
    pub faults: Faults,
}

impl ElectionConfig {
    pub fn new(scheme: SchemeKind, candidates: usize, voters: usize) -> Self {
        Self {
            scheme,
            candidates,
            voters,
            seed: 0,
            ballots: BallotSource::default(),
            max_approvals: None,
            sun_liu: SunLiuOptions::default(),
            goedel: GoedelOptions::default(),
            faults: Faults::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .and_then(|s| key_at(text, s.start))
                .unwrap_or_else(|| "config".to_string());
            ConfigError::new(field, e.message().to_string())
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub(crate) fn field_prime(&self) -> Result<Option<BigUint>, ConfigError> {
        self.goedel
            .field_prime
            .as_deref()
            .map(|s| {
                BigUint::from_str(s.trim())
                    .map_err(|_| ConfigError::new("goedel.field_prime", "not a decimal integer"))
            })
            .transpose()
    }

    /// Checks everything that can be checked without running the protocol.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.voters;
        let m = self.candidates;
        if n == 0 {
            return Err(ConfigError::new("voters", "need at least one voter"));
        }
        if m == 0 {
            return Err(ConfigError::new("candidates", "need at least one candidate"));
        }
        match &self.ballots {
            BallotSource::Explicit(ballots) => {
                if ballots.len() != n {
                    return Err(ConfigError::new(
                        "ballots",
                        format!("{} ballots for {n} voters", ballots.len()),
                    ));
                }
                for (i, b) in ballots.iter().enumerate() {
                    if let Some(c) = b.iter().find(|&&c| c >= m) {
                        return Err(ConfigError::new(
                            format!("ballots[{i}]"),
                            format!("candidate {c} out of range for {m} candidates"),
                        ));
                    }
                    let distinct: BTreeSet<_> = b.iter().collect();
                    if distinct.len() != b.len() {
                        return Err(ConfigError::new(
                            format!("ballots[{i}]"),
                            "a candidate is approved more than once",
                        ));
                    }
                    if let Some(cap) = self.max_approvals {
                        if b.len() > cap {
                            return Err(ConfigError::new(
                                format!("ballots[{i}]"),
                                format!("{} approvals exceed max_approvals = {cap}", b.len()),
                            ));
                        }
                    }
                }
            }
            BallotSource::Random { approval_rate } => {
                if !(0.0..=1.0).contains(approval_rate) {
                    return Err(ConfigError::new("ballots.approval_rate", "must lie in [0, 1]"));
                }
            }
        }
        let check_index = |field: &str, voter: usize| {
            if voter >= n {
                Err(ConfigError::new(field, format!("voter {voter} out of range for {n} voters")))
            } else {
                Ok(())
            }
        };
        for &v in &self.faults.corrupt_tallies {
            check_index("faults.corrupt_tallies", v)?;
        }
        if let Some(d) = self.faults.dropout {
            check_index("faults.dropout.voter", d.voter)?;
        }
        match self.scheme {
            SchemeKind::SunLiu => {
                if let Some(r) = &self.sun_liu.randomizers {
                    if r.len() != n {
                        return Err(ConfigError::new(
                            "sun_liu.randomizers",
                            format!("{} randomizers for {n} voters", r.len()),
                        ));
                    }
                }
                if let Some(t) = &self.sun_liu.transfer_matrix {
                    if self.sun_liu.randomizers.is_none() {
                        return Err(ConfigError::new(
                            "sun_liu.transfer_matrix",
                            "a fixed matrix needs fixed randomizers",
                        ));
                    }
                    check_square("sun_liu.transfer_matrix", t, n)?;
                }
            }
            SchemeKind::Goedel => {
                let g = &self.goedel;
                if g.split == SplitMode::UniformField && g.arithmetic == Arithmetic::Exact {
                    return Err(ConfigError::new(
                        "goedel.split",
                        "uniform-field splitting needs arithmetic = \"field\"",
                    ));
                }
                if g.randomizer_multiplicity == 0 {
                    return Err(ConfigError::new("goedel.randomizer_multiplicity", "must be at least 1"));
                }
                if let Some(r) = &g.randomizers {
                    if r.len() != n {
                        return Err(ConfigError::new(
                            "goedel.randomizers",
                            format!("{} randomizers for {n} voters", r.len()),
                        ));
                    }
                }
                if let Some(t) = &g.transfer_matrix {
                    if g.randomizers.is_none() {
                        return Err(ConfigError::new(
                            "goedel.transfer_matrix",
                            "a fixed matrix needs fixed randomizers",
                        ));
                    }
                    check_square("goedel.transfer_matrix", t, n)?;
                }
                self.field_prime()?;
            }
        }
        Ok(())
    }

    /// The plaintext ballots this config describes. Random ballots come from
    /// a dedicated stream of the seed, independent of the voters' own draws.
    pub fn resolve_ballots(&self) -> Vec<ApprovalBallot> {
        match &self.ballots {
            BallotSource::Explicit(ballots) => ballots
                .iter()
                .enumerate()
                .map(|(i, b)| ApprovalBallot::new(i, b.iter().copied()))
                .collect(),
            BallotSource::Random { approval_rate } => {
                let mut rng = super::stream_rng(self.seed, 0);
                (0..self.voters)
                    .map(|i| random_ballot(i, self.candidates, *approval_rate, self.max_approvals, &mut rng))
                    .collect()
            }
        }
    }
}

/// Dotted key of the `key = value` line containing byte `offset`.
fn key_at(text: &str, offset: usize) -> Option<String> {
    let before = &text[..offset.min(text.len())];
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let line = text[line_start..].lines().next()?;
    let key = line.split_once('=').map(|(k, _)| k.trim()).filter(|k| !k.is_empty());
    let table = before[..line_start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && l.ends_with(']'))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    match (table, key) {
        (Some(t), Some(k)) => Some(format!("{t}.{k}")),
        (None, Some(k)) => Some(k.to_string()),
        (t, None) => t,
    }
}

fn random_ballot(
    voter: usize,
    m: usize,
    rate: f64,
    cap: Option<usize>,
    rng: &mut ChaCha20Rng,
) -> ApprovalBallot {
    let mut approvals: Vec<usize> = (0..m).filter(|_| rng.gen_bool(rate)).collect();
    if let Some(cap) = cap {
        if approvals.len() > cap {
            let keep = sample(rng, approvals.len(), cap);
            approvals = keep.iter().map(|k| approvals[k]).collect();
        }
    }
    ApprovalBallot::new(voter, approvals)
}

fn check_square<T>(field: &str, rows: &[Vec<T>], n: usize) -> Result<(), ConfigError> {
    if rows.len() != n {
        return Err(ConfigError::new(field, format!("{} rows for {n} voters", rows.len())));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(ConfigError::new(
            format!("{field}[{i}]"),
            format!("{} shares for {n} voters", row.len()),
        ));
    }
    Ok(())
}
