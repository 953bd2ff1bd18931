use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::SchemeKind;
use super::engine::Engine;
use super::{Phase, SimError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    Share,
    Partial,
}

/// One point-to-point delivery. Payloads are rendered in decimal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub phase: Phase,
    pub kind: MessageKind,
    pub sender: usize,
    pub receiver: usize,
    pub payload: Arc<str>,
}

/// Everything observable on the simulated network, plus each voter's
/// announced tally and the disputes raised against them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    pub scheme: Option<SchemeKind>,
    pub candidates: usize,
    /// Original index of each participating voter; identity unless someone
    /// left before casting.
    pub roster: Vec<usize>,
    /// Original indices of voters who left, with the phase they left in.
    pub dropped: Vec<(usize, Phase)>,
    pub messages: Vec<MessageRecord>,
    pub announcements: BTreeMap<usize, Vec<u64>>,
    pub disputes: BTreeSet<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
enum Line {
    Header {
        scheme: Option<SchemeKind>,
        candidates: usize,
        roster: Vec<usize>,
        dropped: Vec<(usize, Phase)>,
    },
    Message(MessageRecord),
    Tally {
        voter: usize,
        counts: Vec<u64>,
    },
    Dispute {
        voter: usize,
    },
}

impl Transcript {
    pub fn voters(&self) -> usize {
        self.roster.len()
    }

    /// Line-delimited JSON: a header, one line per message, then the
    /// announced tallies and disputes.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: &Line| {
            out.push_str(&serde_json::to_string(line).expect("transcript lines serialize"));
            out.push('\n');
        };
        push(&Line::Header {
            scheme: self.scheme,
            candidates: self.candidates,
            roster: self.roster.clone(),
            dropped: self.dropped.clone(),
        });
        for m in &self.messages {
            push(&Line::Message(m.clone()));
        }
        for (&voter, counts) in &self.announcements {
            push(&Line::Tally { voter, counts: counts.clone() });
        }
        for &voter in &self.disputes {
            push(&Line::Dispute { voter });
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, SimError> {
        let mut t = Transcript::default();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: Line = serde_json::from_str(line)
                .map_err(|e| SimError::Transcript(format!("line {}: {e}", i + 1)))?;
            match parsed {
                Line::Header { scheme, candidates, roster, dropped } => {
                    t.scheme = scheme;
                    t.candidates = candidates;
                    t.roster = roster;
                    t.dropped = dropped;
                }
                Line::Message(m) => t.messages.push(m),
                Line::Tally { voter, counts } => {
                    t.announcements.insert(voter, counts);
                }
                Line::Dispute { voter } => {
                    t.disputes.insert(voter);
                }
            }
        }
        Ok(t)
    }

    /// Each voter's broadcast partial tally, as seen by everyone else. A
    /// voter who sent different partials to different recipients is
    /// reported as equivocating.
    pub fn public_partials(&self) -> Result<BTreeMap<usize, Arc<str>>, SimError> {
        let mut partials: BTreeMap<usize, Arc<str>> = BTreeMap::new();
        for m in self.messages.iter().filter(|m| m.kind == MessageKind::Partial) {
            match partials.get(&m.sender) {
                Some(seen) if seen != &m.payload => return Err(SimError::Equivocation { voter: m.sender }),
                Some(_) => {}
                None => {
                    partials.insert(m.sender, Arc::clone(&m.payload));
                }
            }
        }
        Ok(partials)
    }

    /// Recomputes the tally from the public partials alone.
    pub fn recount<E: Engine>(&self, engine: &E) -> Result<Vec<u64>, SimError> {
        let partials = self.public_partials()?;
        let n = self.voters();
        if let Some(missing) = (0..n).find(|v| !partials.contains_key(v)) {
            return Err(SimError::PrematureTally { voter: None, missing: vec![missing] });
        }
        let values = partials
            .values()
            .map(|p| engine.parse(p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(engine.combine(values.iter(), n)?.counts)
    }

    /// Messages delivered to `voter`.
    pub fn inbox(&self, voter: usize) -> impl Iterator<Item = &MessageRecord> {
        self.messages.iter().filter(move |m| m.receiver == voter)
    }
}
