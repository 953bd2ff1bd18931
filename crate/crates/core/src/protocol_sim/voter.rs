use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::goedel_scheme::ApprovalBallot;

use super::engine::{Decoded, Engine};
use super::SimError;

/// Voter lifecycle. Phases only move forward; `DroppedOut` is terminal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VoterPhase {
    Init,
    Voted,
    SharesSent,
    SharesReceived,
    PartialBroadcast,
    Tallied,
    DroppedOut,
}

pub(crate) struct Voter<E: Engine> {
    index: usize,
    phase: VoterPhase,
    ballot: Option<ApprovalBallot>,
    randomizer: Option<E::Secret>,
    kept_share: Option<E::Value>,
    /// Rendered shares received, by sender.
    inbox: Vec<Option<Arc<str>>>,
    shares_received: usize,
    column: Option<E::Value>,
    partials: Vec<Option<Arc<E::Value>>>,
    tally: Option<Vec<u64>>,
}

impl<E: Engine> Voter<E> {
    pub(crate) fn new(index: usize, n: usize) -> Self {
        Self {
            index,
            phase: VoterPhase::Init,
            ballot: None,
            randomizer: None,
            kept_share: None,
            inbox: vec![None; n],
            shares_received: 0,
            column: None,
            partials: vec![None; n],
            tally: None,
        }
    }

    pub(crate) fn phase(&self) -> VoterPhase {
        self.phase
    }

    pub(crate) fn is_active(&self) -> bool {
        self.phase != VoterPhase::DroppedOut
    }

    fn advance(&mut self, to: VoterPhase) -> Result<(), SimError> {
        if self.phase == VoterPhase::DroppedOut || to <= self.phase {
            return Err(SimError::PhaseOrder {
                voter: self.index,
                from: self.phase,
                to,
            });
        }
        self.phase = to;
        Ok(())
    }

    fn expect_phase(&self, expected: VoterPhase, to: VoterPhase) -> Result<(), SimError> {
        if self.phase == expected {
            Ok(())
        } else {
            Err(SimError::PhaseOrder {
                voter: self.index,
                from: self.phase,
                to,
            })
        }
    }

    pub(crate) fn drop_out(&mut self) {
        self.phase = VoterPhase::DroppedOut;
    }

    pub(crate) fn vote(&mut self, ballot: ApprovalBallot) -> Result<(), SimError> {
        self.expect_phase(VoterPhase::Init, VoterPhase::Voted)?;
        self.ballot = Some(ballot);
        self.advance(VoterPhase::Voted)
    }

    /// Masks and splits the ballot; keeps its own slot and returns the
    /// shares destined for everyone else, in recipient order.
    pub(crate) fn cast<R: Rng + ?Sized>(
        &mut self,
        engine: &E,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<(usize, E::Value)>, SimError> {
        self.expect_phase(VoterPhase::Voted, VoterPhase::SharesSent)?;
        let ballot = self.ballot.as_ref().expect("voted voters hold a ballot");
        let (randomizer, row) = engine.cast(self.index, n, ballot, rng)?;
        self.randomizer = Some(randomizer);
        let mut outgoing = Vec::with_capacity(n.saturating_sub(1));
        for (j, share) in row.into_iter().enumerate() {
            if j == self.index {
                self.kept_share = Some(share);
            } else {
                outgoing.push((j, share));
            }
        }
        self.column = self.kept_share.clone();
        self.advance(VoterPhase::SharesSent)?;
        if n == 1 {
            self.advance(VoterPhase::SharesReceived)?;
        }
        Ok(outgoing)
    }

    pub(crate) fn receive_share(
        &mut self,
        engine: &E,
        n: usize,
        from: usize,
        share: &E::Value,
        rendered: Arc<str>,
    ) -> Result<(), SimError> {
        if !self.is_active() {
            return Ok(());
        }
        self.expect_phase(VoterPhase::SharesSent, VoterPhase::SharesReceived)?;
        if self.inbox[from].replace(rendered).is_none() {
            self.shares_received += 1;
        }
        let column = self.column.take().expect("cast voters hold their kept share");
        self.column = Some(engine.aggregate([&column, share]));
        if self.shares_received == n - 1 {
            self.advance(VoterPhase::SharesReceived)?;
        }
        Ok(())
    }

    /// Removes its own randomizer from the column product.
    pub(crate) fn broadcast(&mut self, engine: &E) -> Result<Arc<E::Value>, SimError> {
        self.expect_phase(VoterPhase::SharesReceived, VoterPhase::PartialBroadcast)?;
        let column = self.column.as_ref().expect("column complete");
        let randomizer = self.randomizer.as_ref().expect("cast voters hold a randomizer");
        let partial = Arc::new(engine.derandomize(self.index, column, randomizer)?);
        self.partials[self.index] = Some(Arc::clone(&partial));
        self.advance(VoterPhase::PartialBroadcast)?;
        Ok(partial)
    }

    pub(crate) fn receive_partial(&mut self, from: usize, partial: Arc<E::Value>) {
        if self.is_active() {
            self.partials[from] = Some(partial);
        }
    }

    /// Refuses to tally until every partial is in.
    pub(crate) fn tally(&mut self, engine: &E) -> Result<Decoded<E::Value>, SimError> {
        self.expect_phase(VoterPhase::PartialBroadcast, VoterPhase::Tallied)?;
        let missing: Vec<usize> = self
            .partials
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_none())
            .map(|(j, _)| j)
            .collect();
        if !missing.is_empty() {
            return Err(SimError::PrematureTally {
                voter: Some(self.index),
                missing,
            });
        }
        let n = self.partials.len();
        let decoded = engine.combine(self.partials.iter().flatten().map(|p| p.as_ref()), n)?;
        self.tally = Some(decoded.counts.clone());
        self.advance(VoterPhase::Tallied)?;
        Ok(decoded)
    }

    pub(crate) fn present_partials(&self) -> Vec<&E::Value> {
        self.partials.iter().flatten().map(|p| p.as_ref()).collect()
    }

    /// Product (or sum) of whatever partials have arrived.
    pub(crate) fn partial_aggregate(&self, engine: &E) -> (usize, String) {
        let present = self.present_partials();
        (present.len(), engine.render(&engine.aggregate(present)))
    }

    pub(crate) fn column_value(&self) -> Option<&E::Value> {
        self.column.as_ref()
    }

    pub(crate) fn snapshot(&self, engine: &E) -> VoterSnapshot {
        VoterSnapshot {
            index: self.index,
            phase: self.phase,
            approvals: self
                .ballot
                .as_ref()
                .map(|b| b.approvals.iter().copied().collect())
                .unwrap_or_default(),
            randomizer: self.randomizer.as_ref().map(|r| engine.render_secret(r)),
            kept_share: self.kept_share.as_ref().map(|s| engine.render(s)),
            inbox: self.inbox.clone(),
            column: self.column.as_ref().map(|c| engine.render(c)),
            partial: self.partials[self.index].as_ref().map(|p| engine.render(p)),
            tally: self.tally.clone(),
        }
    }
}

/// A voter's full private and public state at the end of a run, rendered in
/// decimal. This is the simulator's omniscient view, used by analyses and
/// tests; no voter sees another's snapshot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoterSnapshot {
    pub index: usize,
    pub phase: VoterPhase,
    pub approvals: Vec<usize>,
    pub randomizer: Option<String>,
    pub kept_share: Option<String>,
    pub inbox: Vec<Option<Arc<str>>>,
    pub column: Option<String>,
    pub partial: Option<String>,
    pub tally: Option<Vec<u64>>,
}
