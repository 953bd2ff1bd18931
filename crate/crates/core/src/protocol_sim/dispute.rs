use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DisputeError {
    #[error("no tally is announced by a strict majority of {voters} voters")]
    NoMajority {
        voters: usize,
        /// Each distinct announced tally with the voters announcing it.
        groups: Vec<(Vec<u64>, Vec<usize>)>,
    },
}

/// Majority verdict over the announced tallies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisputeVerdict {
    pub majority: Vec<u64>,
    /// Voters whose announcement differs from the majority.
    pub flagged: BTreeSet<usize>,
}

/// Flags every voter whose announced tally disagrees with the tally announced
/// by a strict majority.
pub fn detect_disputes(announced: &BTreeMap<usize, Vec<u64>>) -> Result<DisputeVerdict, DisputeError> {
    let mut groups: BTreeMap<&Vec<u64>, Vec<usize>> = BTreeMap::new();
    for (&voter, counts) in announced {
        groups.entry(counts).or_default().push(voter);
    }
    let voters = announced.len();
    let majority = groups
        .iter()
        .find(|(_, members)| members.len() * 2 > voters)
        .map(|(counts, _)| (*counts).clone());
    match majority {
        Some(majority) => Ok(DisputeVerdict {
            flagged: announced
                .iter()
                .filter(|(_, c)| **c != majority)
                .map(|(&v, _)| v)
                .collect(),
            majority,
        }),
        None => Err(DisputeError::NoMajority {
            voters,
            groups: groups.into_iter().map(|(c, m)| (c.clone(), m)).collect(),
        }),
    }
}
