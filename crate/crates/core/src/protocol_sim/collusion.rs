//! Semi-honest collusion analysis.
//!
//! For each honest target the colluders' view is the tuple of the target's
//! shares addressed to them. The experiment samples that view under the
//! target's configured ballot and under its complement, then runs a
//! two-sample chi-square test of homogeneity. Secrecy holds when the test
//! cannot tell the two settings apart.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::goedel_scheme::{ApprovalBallot, SplitMode};

use super::config::{ElectionConfig, SchemeKind};
use super::engine::{AnyEngine, Engine};
use super::{stream_rng, SimError};

/// Significance level of every test in the report.
pub const ALPHA: f64 = 0.01;
/// Views are hashed into this many bins when exact categories are too sparse.
const HASH_BINS: u64 = 256;
/// Expected count below which categories are pooled.
const MIN_EXPECTED: f64 = 5.0;
/// Largest view space for which a goodness-of-fit against uniform is run.
const UNIFORMITY_LIMIT: u64 = 10_000_000;
const STREAM_BASE: u64 = 1 << 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub voter: usize,
    pub ballot_a: Vec<usize>,
    pub ballot_b: Vec<usize>,
    /// Distinct views observed across both settings.
    pub categories: usize,
    pub hashed: bool,
    /// Empirical view counts per setting, keyed by the rendered view; only
    /// kept when there are at most 64 categories.
    pub distribution: Option<BTreeMap<String, [u64; 2]>>,
    /// Homogeneity of the two settings' view distributions.
    pub homogeneity: TwoSampleTest,
    /// Goodness of fit of setting A's views to the uniform distribution over
    /// the whole view space, when that space is small enough.
    pub uniformity: Option<TwoSampleTest>,
    /// Shares in the colluders' view that factor as a nonempty product of
    /// candidate primes, per setting.
    pub factor_exposing: [u64; 2],
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollusionReport {
    pub scheme: SchemeKind,
    pub split: Option<SplitMode>,
    pub candidates: usize,
    pub voters: usize,
    pub colluders: Vec<usize>,
    pub trials: usize,
    /// Each target passes when its homogeneity p-value is at least this.
    pub threshold: f64,
    pub targets: Vec<TargetReport>,
    pub passed: bool,
    pub notes: Vec<String>,
}

/// Samples the colluders' view of every honest voter's shares `trials` times
/// under two ballot settings and tests whether the settings are
/// distinguishable. The field modulus is taken from the config as given; no
/// tally-capacity check applies since nothing is tallied.
pub fn collusion_experiment(
    cfg: &ElectionConfig,
    colluders: &BTreeSet<usize>,
    trials: usize,
) -> Result<CollusionReport, SimError> {
    cfg.validate()?;
    let n = cfg.voters;
    if let Some(&c) = colluders.iter().find(|&&c| c >= n) {
        return Err(SimError::Analysis(format!("colluder {c} out of range for {n} voters")));
    }
    if colluders.len() >= n {
        return Err(SimError::Analysis(format!(
            "{} colluders leave no honest voter among {n}",
            colluders.len()
        )));
    }
    if trials == 0 {
        return Err(SimError::Analysis("need at least one trial".into()));
    }
    let ballots = cfg.resolve_ballots();
    match AnyEngine::from_config(cfg, n)? {
        AnyEngine::SunLiu(e) => analyze(&e, cfg, &ballots, colluders, trials),
        AnyEngine::Exact(e) => analyze(&e, cfg, &ballots, colluders, trials),
        AnyEngine::Field(e) => analyze(&e, cfg, &ballots, colluders, trials),
    }
}

fn analyze<E: Engine>(
    engine: &E,
    cfg: &ElectionConfig,
    ballots: &[ApprovalBallot],
    colluders: &BTreeSet<usize>,
    trials: usize,
) -> Result<CollusionReport, SimError> {
    let n = cfg.voters;
    let m = cfg.candidates;
    let honest: Vec<usize> = (0..n).filter(|v| !colluders.contains(v)).collect();
    let threshold = ALPHA;
    let mut notes = Vec::new();
    if colluders.is_empty() {
        notes.push("no colluders: the view is empty and carries no information".to_string());
    }
    if colluders.len() == n - 1 {
        notes.push(
            "with n-1 colluders the public tally minus the colluders' own ballots equals the honest ballot; \
             this follows from the published aggregate, not from the shares, which are tested below"
                .to_string(),
        );
    }

    let mut targets = Vec::with_capacity(honest.len());
    for &target in &honest {
        let ballot_a = ballots[target].clone();
        let ballot_b = ApprovalBallot::new(target, (0..m).filter(|c| !ballot_a.approvals.contains(c)));
        let mut views: [Vec<String>; 2] = [Vec::with_capacity(trials), Vec::with_capacity(trials)];
        let mut factor_exposing = [0u64; 2];
        for (s, ballot) in [&ballot_a, &ballot_b].into_iter().enumerate() {
            let mut rng = stream_rng(cfg.seed, STREAM_BASE + 2 * target as u64 + s as u64);
            for _ in 0..trials {
                let (_, row) = engine.cast(target, n, ballot, &mut rng)?;
                let view: Vec<String> = colluders.iter().map(|&c| engine.render(&row[c])).collect();
                factor_exposing[s] += colluders.iter().filter(|&&c| engine.exposes_factors(&row[c])).count() as u64;
                views[s].push(view.join(","));
            }
        }
        targets.push(target_report(
            engine, target, &ballot_a, &ballot_b, views, factor_exposing, colluders.len(), trials, threshold,
        ));
    }

    if targets.iter().any(|t| t.hashed) {
        notes.push(format!(
            "views too sparse for exact categories were hashed into {HASH_BINS} bins"
        ));
    }
    let split = (cfg.scheme == SchemeKind::Goedel).then_some(cfg.goedel.split);
    Ok(CollusionReport {
        scheme: cfg.scheme,
        split,
        candidates: m,
        voters: n,
        colluders: colluders.iter().copied().collect(),
        trials,
        threshold,
        passed: targets.iter().all(|t| t.passed),
        targets,
        notes,
    })
}

#[allow(clippy::too_many_arguments)]
fn target_report<E: Engine>(
    engine: &E,
    voter: usize,
    ballot_a: &ApprovalBallot,
    ballot_b: &ApprovalBallot,
    views: [Vec<String>; 2],
    factor_exposing: [u64; 2],
    t: usize,
    trials: usize,
    threshold: f64,
) -> TargetReport {
    let mut table: BTreeMap<String, [u64; 2]> = BTreeMap::new();
    for (s, vs) in views.iter().enumerate() {
        for v in vs {
            table.entry(v.clone()).or_default()[s] += 1;
        }
    }
    let categories = table.len();
    let hashed = categories as f64 > trials as f64 / (2.0 * MIN_EXPECTED);
    let counts: Vec<[u64; 2]> = if hashed {
        let mut bins = vec![[0u64; 2]; HASH_BINS as usize];
        for (view, c) in &table {
            let mut h = DefaultHasher::new();
            view.hash(&mut h);
            let b = (h.finish() % HASH_BINS) as usize;
            bins[b][0] += c[0];
            bins[b][1] += c[1];
        }
        bins
    } else {
        table.values().copied().collect()
    };
    let homogeneity = two_sample_chi_square(&counts);
    let uniformity = engine
        .share_space()
        .and_then(|q| view_space(&q, t))
        .filter(|&cells| cells > 1 && !hashed)
        .map(|cells| uniform_fit(table.values().map(|c| c[0]), cells, trials as u64));
    TargetReport {
        voter,
        ballot_a: ballot_a.approvals.iter().copied().collect(),
        ballot_b: ballot_b.approvals.iter().copied().collect(),
        categories,
        hashed,
        distribution: (categories <= 64).then_some(table),
        passed: homogeneity.p_value >= threshold,
        homogeneity,
        uniformity,
        factor_exposing,
    }
}

fn view_space(units: &BigUint, t: usize) -> Option<u64> {
    let cells = units.pow(t as u32);
    cells.to_u64().filter(|&c| c <= UNIFORMITY_LIMIT)
}

fn chi_square_p(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    dist.sf(statistic)
}

/// Pearson test of homogeneity on a 2 x K table. Categories with a small
/// expected count are pooled into one.
pub(crate) fn two_sample_chi_square(counts: &[[u64; 2]]) -> TwoSampleTest {
    let totals = [
        counts.iter().map(|c| c[0]).sum::<u64>() as f64,
        counts.iter().map(|c| c[1]).sum::<u64>() as f64,
    ];
    let grand = totals[0] + totals[1];
    let min_share = totals[0].min(totals[1]) / grand;
    let mut pooled: Vec<[u64; 2]> = Vec::new();
    let mut rare = [0u64; 2];
    for c in counts {
        let both = (c[0] + c[1]) as f64;
        if both * min_share < MIN_EXPECTED {
            rare[0] += c[0];
            rare[1] += c[1];
        } else {
            pooled.push(*c);
        }
    }
    if rare[0] + rare[1] > 0 {
        pooled.push(rare);
    }
    let mut statistic = 0.0;
    for c in &pooled {
        let col = (c[0] + c[1]) as f64;
        for s in 0..2 {
            let expected = totals[s] * col / grand;
            if expected > 0.0 {
                let d = c[s] as f64 - expected;
                statistic += d * d / expected;
            }
        }
    }
    let dof = pooled.len().saturating_sub(1);
    TwoSampleTest {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
    }
}

/// Pearson goodness of fit to the uniform distribution over `cells` cells,
/// given the counts of the observed cells.
fn uniform_fit(observed: impl Iterator<Item = u64>, cells: u64, total: u64) -> TwoSampleTest {
    let expected = total as f64 / cells as f64;
    let mut seen = 0u64;
    let mut statistic = 0.0;
    for o in observed {
        seen += 1;
        let d = o as f64 - expected;
        statistic += d * d / expected;
    }
    statistic += (cells - seen) as f64 * expected;
    let dof = (cells - 1) as usize;
    TwoSampleTest {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
    }
}
