use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::godel_core::PrimeBase;
use crate::protocol_sim::{goedel_tally_bits, run_election, ConfigError, ElectionConfig, SchemeKind, SimError};
use crate::sun_liu::overflow_report;

/// Size and timing figures for one (m, n) grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub m: usize,
    pub n: usize,
    /// Bit length of one packed binary ballot.
    pub mk: usize,
    pub exceeds_64: bool,
    /// Bit length of the largest single Gödel ballot; independent of `n`.
    pub goedel_ballot_bits: u64,
    /// Bit length of the largest possible Gödel tally.
    pub goedel_tally_bits: u64,
    /// Mean wall time of a full simulated election, when timed.
    pub sun_liu_ms: Option<f64>,
    pub goedel_ms: Option<f64>,
}

pub const DEFAULT_GRID: [(usize, usize); 6] = [(1, 1), (3, 7), (5, 50), (7, 100), (7, 1000), (9, 1000)];

/// Sizes for every grid point, plus mean run times over `reps` seeded
/// elections per scheme when `reps > 0`.
pub fn bench(grid: &[(usize, usize)], reps: usize, seed: u64) -> Result<Vec<BenchRow>, SimError> {
    grid.iter()
        .map(|&(m, n)| {
            let overflow = overflow_report(m, n);
            let base = PrimeBase::first(m.max(1)).map_err(|e| ConfigError::new("candidates", e.to_string()))?;
            let time = |scheme| -> Result<Option<f64>, SimError> {
                if reps == 0 {
                    return Ok(None);
                }
                let start = Instant::now();
                for r in 0..reps {
                    let mut cfg = ElectionConfig::new(scheme, m, n);
                    cfg.seed = seed.wrapping_add(r as u64);
                    run_election(&cfg)?;
                }
                Ok(Some(start.elapsed().as_secs_f64() * 1000.0 / reps as f64))
            };
            Ok(BenchRow {
                m,
                n,
                mk: overflow.bits,
                exceeds_64: overflow.exceeds_64,
                goedel_ballot_bits: base.primorial().bits(),
                goedel_tally_bits: goedel_tally_bits(m, n),
                sun_liu_ms: time(SchemeKind::SunLiu)?,
                goedel_ms: time(SchemeKind::Goedel)?,
            })
        })
        .collect()
}

pub fn bench_table(rows: &[BenchRow]) -> String {
    let ms = |t: Option<f64>| t.map_or_else(|| "-".to_string(), |t| format!("{t:.2}"));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>3} {:>6} {:>5} {:>10} {:>12} {:>12} {:>12} {:>12}",
        "m", "n", "mk", "exceeds_64", "ballot_bits", "tally_bits", "sun_liu_ms", "goedel_ms"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>3} {:>6} {:>5} {:>10} {:>12} {:>12} {:>12} {:>12}",
            r.m,
            r.n,
            r.mk,
            r.exceeds_64,
            r.goedel_ballot_bits,
            r.goedel_tally_bits,
            ms(r.sun_liu_ms),
            ms(r.goedel_ms)
        );
    }
    out
}

/// Parses `m:n,m:n,...`.
pub fn parse_grid(text: &str) -> Result<Vec<(usize, usize)>, String> {
    text.split(',')
        .map(|pair| {
            let (m, n) = pair
                .trim()
                .split_once(':')
                .ok_or_else(|| format!("grid entry {pair:?} is not m:n"))?;
            let parse = |s: &str| s.trim().parse::<usize>().map_err(|e| format!("grid entry {pair:?}: {e}"));
            let (m, n) = (parse(m)?, parse(n)?);
            if m == 0 || n == 0 {
                return Err(format!("grid entry {pair:?} needs m, n >= 1"));
            }
            Ok((m, n))
        })
        .collect()
}
