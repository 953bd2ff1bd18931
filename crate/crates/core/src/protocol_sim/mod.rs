//! Deterministic multi-party simulation of both schemes.
//!
//! Voters are isolated state machines that talk only through an ordered,
//! private message queue. Phases are separated by global barriers: nobody
//! casts before everyone has voted, and nobody tallies before every partial
//! is in. The seed fixes every random draw, so a config maps to exactly one
//! transcript.

mod collusion;
mod config;
mod dispute;
mod engine;
mod transcript;
mod voter;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::goedel_scheme::{ApprovalBallot, SchemeError};
use crate::sun_liu::SunLiuError;

pub use collusion::{collusion_experiment, CollusionReport, TargetReport, TwoSampleTest};
pub use config::{
    Arithmetic, BallotSource, ConfigError, Dropout, ElectionConfig, Faults, GoedelOptions, SchemeKind, SunLiuOptions,
};
pub use dispute::{detect_disputes, DisputeError, DisputeVerdict};
pub use engine::{
    exact_engine, field_engine, goedel_tally_bits, AnyEngine, Decoded, Engine, GoedelEngine, SunLiuEngine,
};
pub use transcript::{MessageKind, MessageRecord, Transcript};
pub use voter::{VoterPhase, VoterSnapshot};

use voter::Voter;

/// Protocol stage. A dropout names the stage the voter fails to start.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Voting,
    Casting,
    Tallying,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Voting => "voting",
            Phase::Casting => "casting",
            Phase::Tallying => "tallying",
        })
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    SunLiu(#[from] SunLiuError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("voter {voter} cannot move from {from:?} to {to:?}")]
    PhaseOrder { voter: usize, from: VoterPhase, to: VoterPhase },
    #[error("tally attempted without partials from voters {missing:?}")]
    PrematureTally { voter: Option<usize>, missing: Vec<usize> },
    #[error("voter {voter} broadcast different partials to different voters")]
    Equivocation { voter: usize },
    #[error("transcript: {0}")]
    Transcript(String),
    #[error("analysis: {0}")]
    Analysis(String),
}

/// Independent ChaCha20 stream `stream` of `seed`. Stream 0 generates
/// ballots; voter `i` draws from stream `i + 1`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The agreed result of a completed run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyResult {
    pub scheme: SchemeKind,
    pub candidates: usize,
    /// Voters who took part in casting.
    pub voters: usize,
    pub counts: Vec<u64>,
    /// Decimal rendering of the aggregate tally value.
    pub tally: String,
    /// Voters whose announced tally disagreed with the majority.
    pub disputes: BTreeSet<usize>,
}

#[derive(Clone, Debug)]
pub struct ElectionRun {
    pub transcript: Transcript,
    pub result: TallyResult,
    pub voters: Vec<VoterSnapshot>,
    /// Ballots of the participating voters, reindexed.
    pub ballots: Vec<ApprovalBallot>,
}

/// Why a run stopped after shares were distributed.
#[derive(Clone, Debug)]
pub struct AbortReport {
    /// Participant index of the voter whose partial never arrived.
    pub blocking_voter: usize,
    /// The same voter's index in the original config.
    pub original_index: usize,
    pub phase: Phase,
    pub partials_received: usize,
    /// What the remaining voters can compute: the aggregate of the partials
    /// they hold.
    pub incomplete_product: String,
    /// The tally with the blocking voter's column folded in but its
    /// randomizer never removed. Computed from the blocking voter's private
    /// state; equals the true tally masked by that randomizer.
    pub uncancelled: String,
    pub transcript: Transcript,
    pub voters: Vec<VoterSnapshot>,
}

#[derive(Clone, Debug)]
pub struct UnresolvedDispute {
    pub error: DisputeError,
    pub transcript: Transcript,
}

#[derive(Clone, Debug)]
pub enum ElectionOutcome {
    Completed(Box<ElectionRun>),
    Aborted(Box<AbortReport>),
    Unresolved(Box<UnresolvedDispute>),
}

impl ElectionOutcome {
    pub fn transcript(&self) -> &Transcript {
        match self {
            ElectionOutcome::Completed(r) => &r.transcript,
            ElectionOutcome::Aborted(a) => &a.transcript,
            ElectionOutcome::Unresolved(u) => &u.transcript,
        }
    }

    pub fn completed(self) -> Option<ElectionRun> {
        match self {
            ElectionOutcome::Completed(r) => Some(*r),
            _ => None,
        }
    }
}

/// Runs the whole protocol, honouring any faults in `cfg`.
pub fn run_election(cfg: &ElectionConfig) -> Result<ElectionOutcome, SimError> {
    cfg.validate()?;
    let ballots = cfg.resolve_ballots();
    match cfg.faults.dropout {
        Some(d) if d.phase != Phase::Tallying => {
            let reduced = without_voter(cfg, &ballots, d.voter)?;
            let ballots = reduced.resolve_ballots();
            let roster = (0..cfg.voters).filter(|&v| v != d.voter).collect();
            dispatch(&reduced, ballots, roster, vec![(d.voter, d.phase)], None)
        }
        Some(d) => dispatch(cfg, ballots, (0..cfg.voters).collect(), vec![(d.voter, d.phase)], Some(d.voter)),
        None => dispatch(cfg, ballots, (0..cfg.voters).collect(), Vec::new(), None),
    }
}

/// `run_election` with voter `voter` failing to start `phase`.
pub fn drop_voter(cfg: &ElectionConfig, voter: usize, phase: Phase) -> Result<ElectionOutcome, SimError> {
    let mut cfg = cfg.clone();
    cfg.faults.dropout = Some(Dropout { voter, phase });
    run_election(&cfg)
}

/// The config the remaining voters run after `gone` leaves before casting.
fn without_voter(cfg: &ElectionConfig, ballots: &[ApprovalBallot], gone: usize) -> Result<ElectionConfig, ConfigError> {
    if cfg.voters == 1 {
        return Err(ConfigError::new("faults.dropout.voter", "no voters would remain"));
    }
    let keep = |i: &usize| *i != gone;
    let mut reduced = cfg.clone();
    reduced.voters = cfg.voters - 1;
    reduced.ballots = BallotSource::Explicit(
        ballots
            .iter()
            .filter(|b| b.voter != gone)
            .map(|b| b.approvals.iter().copied().collect())
            .collect(),
    );
    reduced.sun_liu.randomizers = cfg.sun_liu.randomizers.as_ref().map(|r| {
        r.iter()
            .enumerate()
            .filter(|(i, _)| keep(i))
            .map(|(_, x)| *x)
            .collect()
    });
    reduced.goedel.randomizers = cfg.goedel.randomizers.as_ref().map(|r| {
        r.iter()
            .enumerate()
            .filter(|(i, _)| keep(i))
            .map(|(_, x)| x.clone())
            .collect()
    });
    // A fixed matrix cannot survive a change in the number of columns.
    reduced.sun_liu.transfer_matrix = None;
    reduced.goedel.transfer_matrix = None;
    reduced.faults.dropout = None;
    reduced.faults.corrupt_tallies = cfg
        .faults
        .corrupt_tallies
        .iter()
        .filter(|v| keep(v))
        .map(|&v| if v > gone { v - 1 } else { v })
        .collect();
    Ok(reduced)
}

fn dispatch(
    cfg: &ElectionConfig,
    ballots: Vec<ApprovalBallot>,
    roster: Vec<usize>,
    dropped: Vec<(usize, Phase)>,
    tally_dropout: Option<usize>,
) -> Result<ElectionOutcome, SimError> {
    let n = cfg.voters;
    let run = Run {
        cfg,
        ballots,
        roster,
        dropped,
        tally_dropout,
    };
    match AnyEngine::from_config(cfg, n)? {
        AnyEngine::SunLiu(e) => {
            e.check_tally_capacity()?;
            run.simulate(&e)
        }
        AnyEngine::Exact(e) => run.simulate(&e),
        AnyEngine::Field(e) => {
            e.check_tally_capacity(n)?;
            run.simulate(&e)
        }
    }
}

struct Run<'c> {
    cfg: &'c ElectionConfig,
    ballots: Vec<ApprovalBallot>,
    roster: Vec<usize>,
    dropped: Vec<(usize, Phase)>,
    /// Participant who sends shares but never broadcasts a partial.
    tally_dropout: Option<usize>,
}

enum Envelope<V> {
    Share { from: usize, to: usize, value: V },
    Partial { from: usize, to: usize, value: Arc<V> },
}

/// Message log with payload strings shared between identical renderings.
struct Log {
    interned: HashMap<String, Arc<str>>,
    messages: Vec<MessageRecord>,
}

impl Log {
    fn intern(&mut self, text: String) -> Arc<str> {
        if let Some(s) = self.interned.get(&text) {
            return Arc::clone(s);
        }
        let s: Arc<str> = Arc::from(text.as_str());
        self.interned.insert(text, Arc::clone(&s));
        s
    }

    fn record(&mut self, phase: Phase, kind: MessageKind, sender: usize, receiver: usize, payload: Arc<str>) {
        self.messages.push(MessageRecord {
            phase,
            kind,
            sender,
            receiver,
            payload,
        });
    }
}

impl Run<'_> {
    fn simulate<E: Engine>(self, engine: &E) -> Result<ElectionOutcome, SimError> {
        let n = self.cfg.voters;
        let mut voters: Vec<Voter<E>> = (0..n).map(|i| Voter::new(i, n)).collect();
        let mut log = Log {
            interned: HashMap::new(),
            messages: Vec::new(),
        };
        let mut queue: VecDeque<Envelope<E::Value>> = VecDeque::new();

        for (voter, ballot) in voters.iter_mut().zip(&self.ballots) {
            voter.vote(ballot.clone())?;
        }
        barrier(&voters, VoterPhase::Voted)?;

        for (i, voter) in voters.iter_mut().enumerate() {
            let mut rng = stream_rng(self.cfg.seed, i as u64 + 1);
            for (to, value) in voter.cast(engine, n, &mut rng)? {
                queue.push_back(Envelope::Share { from: i, to, value });
            }
        }
        barrier(&voters, VoterPhase::SharesSent)?;
        self.deliver(engine, &mut voters, &mut queue, &mut log)?;
        barrier(&voters, VoterPhase::SharesReceived)?;

        if let Some(d) = self.tally_dropout {
            voters[d].drop_out();
        }
        for i in 0..n {
            if !voters[i].is_active() {
                continue;
            }
            let partial = voters[i].broadcast(engine)?;
            for to in (0..n).filter(|&j| j != i && voters[j].is_active()) {
                queue.push_back(Envelope::Partial {
                    from: i,
                    to,
                    value: Arc::clone(&partial),
                });
            }
        }
        self.deliver(engine, &mut voters, &mut queue, &mut log)?;

        let mut transcript = Transcript {
            scheme: Some(self.cfg.scheme),
            candidates: self.cfg.candidates,
            roster: self.roster.clone(),
            dropped: self.dropped.clone(),
            messages: log.messages,
            ..Transcript::default()
        };

        let mut announced = BTreeMap::new();
        let mut agreed: Option<Decoded<E::Value>> = None;
        for i in 0..n {
            if !voters[i].is_active() {
                continue;
            }
            match voters[i].tally(engine) {
                Ok(decoded) => {
                    announced.insert(i, decoded.counts.clone());
                    agreed.get_or_insert(decoded);
                }
                Err(SimError::PrematureTally { missing, .. }) => {
                    return Ok(self.abort(engine, &voters, i, missing, transcript));
                }
                Err(e) => return Err(e),
            }
        }
        let agreed = agreed.expect("at least one voter tallies");

        for &v in &self.cfg.faults.corrupt_tallies {
            if let Some(counts) = announced.get_mut(&v) {
                counts[0] += 1;
            }
        }
        transcript.announcements = announced.clone();
        let verdict = match detect_disputes(&announced) {
            Ok(v) => v,
            Err(error) => return Ok(ElectionOutcome::Unresolved(Box::new(UnresolvedDispute { error, transcript }))),
        };
        transcript.disputes = verdict.flagged.clone();

        let result = TallyResult {
            scheme: self.cfg.scheme,
            candidates: self.cfg.candidates,
            voters: n,
            counts: verdict.majority,
            tally: engine.render(&agreed.total),
            disputes: verdict.flagged,
        };
        Ok(ElectionOutcome::Completed(Box::new(ElectionRun {
            transcript,
            result,
            voters: voters.iter().map(|v| v.snapshot(engine)).collect(),
            ballots: self.ballots,
        })))
    }

    fn deliver<E: Engine>(
        &self,
        engine: &E,
        voters: &mut [Voter<E>],
        queue: &mut VecDeque<Envelope<E::Value>>,
        log: &mut Log,
    ) -> Result<(), SimError> {
        let n = voters.len();
        while let Some(envelope) = queue.pop_front() {
            match envelope {
                Envelope::Share { from, to, value } => {
                    let payload = log.intern(engine.render(&value));
                    log.record(Phase::Casting, MessageKind::Share, from, to, Arc::clone(&payload));
                    voters[to].receive_share(engine, n, from, &value, payload)?;
                }
                Envelope::Partial { from, to, value } => {
                    let payload = log.intern(engine.render(&value));
                    log.record(Phase::Tallying, MessageKind::Partial, from, to, payload);
                    voters[to].receive_partial(from, value);
                }
            }
        }
        Ok(())
    }

    fn abort<E: Engine>(
        &self,
        engine: &E,
        voters: &[Voter<E>],
        reporter: usize,
        missing: Vec<usize>,
        transcript: Transcript,
    ) -> ElectionOutcome {
        let blocking = missing[0];
        let (partials_received, incomplete_product) = voters[reporter].partial_aggregate(engine);
        let uncancelled = {
            let present = voters[reporter].present_partials();
            let column = voters[blocking].column_value().expect("blocking voter received its column");
            engine.render(&engine.aggregate(present.into_iter().chain([column])))
        };
        ElectionOutcome::Aborted(Box::new(AbortReport {
            blocking_voter: blocking,
            original_index: self.roster[blocking],
            phase: Phase::Tallying,
            partials_received,
            incomplete_product,
            uncancelled,
            transcript,
            voters: voters.iter().map(|v| v.snapshot(engine)).collect(),
        }))
    }
}

fn barrier<E: Engine>(voters: &[Voter<E>], reached: VoterPhase) -> Result<(), SimError> {
    match voters.iter().enumerate().find(|(_, v)| v.is_active() && v.phase() < reached) {
        Some((i, v)) => Err(SimError::PhaseOrder {
            voter: i,
            from: v.phase(),
            to: reached,
        }),
        None => Ok(()),
    }
}

/// Recomputes the tally a transcript's public partials determine, using the
/// engine `cfg` describes.
pub fn replay_tally(cfg: &ElectionConfig, transcript: &Transcript) -> Result<Vec<u64>, SimError> {
    let n = transcript.voters();
    let mut cfg = cfg.clone();
    cfg.voters = n;
    match AnyEngine::from_config(&cfg, n)? {
        AnyEngine::SunLiu(e) => transcript.recount(&e),
        AnyEngine::Exact(e) => transcript.recount(&e),
        AnyEngine::Field(e) => transcript.recount(&e),
    }
}

/// Per-candidate approval counts straight from the plaintext ballots.
pub fn brute_force_counts(ballots: &[ApprovalBallot], m: usize) -> Vec<u64> {
    let mut counts = vec![0u64; m];
    for b in ballots {
        for &c in &b.approvals {
            counts[c] += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests;
