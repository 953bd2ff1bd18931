//! Built-in scenarios: the seven-voter, three-candidate election run through
//! both schemes with fixed randomizers and transfer matrices, and a seeded
//! thousand-voter election.
//!
//! Only the row and column totals of the transfer matrices are published, so
//! each matrix is rebuilt from its margins with the northwest-corner rule.
//! Any nonnegative matrix with those margins yields the same column
//! aggregates and hence the same partial tallies.

use crate::goedel_scheme::SplitMode;
use crate::protocol_sim::{Arithmetic, BallotSource, ElectionConfig, SchemeKind};

/// Approval sets of the seven voters over candidates 0..3.
pub const BALLOTS_7X3: [&[usize]; 7] = [&[0, 2], &[2], &[0], &[1, 2], &[0, 1, 2], &[1], &[1]];

pub const COUNTS_7X3: [u64; 3] = [3, 4, 4];

/// Additive randomizers `R_i`.
pub const SUN_LIU_RANDOMIZERS: [u64; 7] = [10, 12, 2, 6, 11, 25, 6];
/// Randomized ballots `S_i = v_i + R_i`, the row sums of the transfer matrix.
pub const SUN_LIU_ROW_SUMS: [u64; 7] = [75, 13, 66, 15, 84, 33, 14];
/// Column sums `S'_j` of the transfer matrix.
pub const SUN_LIU_COLUMN_SUMS: [u64; 7] = [42, 46, 42, 40, 45, 42, 43];
/// Derandomized column sums `v'_j = S'_j - R_j`.
pub const SUN_LIU_PARTIALS: [i64; 7] = [32, 34, 40, 34, 34, 17, 37];
pub const SUN_LIU_TALLY: u64 = 228;

/// Multiplicative randomizers, as prime lists.
pub const GOEDEL_RANDOMIZERS: [&[u64]; 7] = [&[2, 3], &[3, 5], &[5], &[3], &[2, 5], &[2, 3], &[2, 3]];
/// Exponents of the column products `C_j` over (2, 3, 5).
pub const GOEDEL_COLUMN_EXPONENTS: [[i64; 3]; 7] = [
    [5, 0, 1],
    [0, 5, 2],
    [0, 1, 2],
    [0, 1, 0],
    [1, 0, 0],
    [1, 1, 1],
    [0, 1, 1],
];
/// Exponents of the broadcast partial tallies `C_j / R_j`.
pub const GOEDEL_PARTIALS: [[i64; 3]; 7] = [
    [4, -1, 1],
    [0, 4, 1],
    [0, 1, 1],
    [0, 0, 0],
    [0, 0, -1],
    [0, 0, 1],
    [-1, 0, 1],
];
/// `2^3 * 3^4 * 5^4`.
pub const GOEDEL_TALLY: u64 = 405_000;

/// A nonnegative matrix with the given row and column sums, filled greedily
/// from the top-left cell. `None` when the margins disagree.
pub fn northwest_corner(rows: &[u64], cols: &[u64]) -> Option<Vec<Vec<u64>>> {
    if rows.iter().sum::<u64>() != cols.iter().sum::<u64>() {
        return None;
    }
    let mut matrix = vec![vec![0u64; cols.len()]; rows.len()];
    let mut row_left = rows.to_vec();
    let mut col_left = cols.to_vec();
    let (mut i, mut j) = (0, 0);
    while i < rows.len() && j < cols.len() {
        let x = row_left[i].min(col_left[j]);
        matrix[i][j] = x;
        row_left[i] -= x;
        col_left[j] -= x;
        if row_left[i] == 0 {
            i += 1;
        } else {
            j += 1;
        }
    }
    Some(matrix)
}

fn explicit_ballots() -> BallotSource {
    BallotSource::Explicit(BALLOTS_7X3.iter().map(|b| b.to_vec()).collect())
}

/// The additive scheme on the seven-voter election.
pub fn sun_liu_7x3() -> ElectionConfig {
    let mut cfg = ElectionConfig::new(SchemeKind::SunLiu, 3, 7);
    cfg.ballots = explicit_ballots();
    cfg.sun_liu.randomizers = Some(SUN_LIU_RANDOMIZERS.to_vec());
    let matrix = northwest_corner(&SUN_LIU_ROW_SUMS, &SUN_LIU_COLUMN_SUMS).expect("margins agree");
    cfg.sun_liu.transfer_matrix = Some(
        matrix
            .into_iter()
            .map(|row| row.into_iter().map(|x| x as i64).collect())
            .collect(),
    );
    cfg
}

/// The multiplicative scheme on the seven-voter election with the published
/// randomizers and a transfer matrix reproducing the published partials.
pub fn goedel_7x3() -> ElectionConfig {
    let mut cfg = goedel_7x3_free(SplitMode::FactorScatter, 0);
    cfg.goedel.transfer_matrix = Some(goedel_matrix());
    cfg
}

/// Same ballots and randomizers, shares drawn by `split` from `seed`.
pub fn goedel_7x3_free(split: SplitMode, seed: u64) -> ElectionConfig {
    let mut cfg = ElectionConfig::new(SchemeKind::Goedel, 3, 7);
    cfg.seed = seed;
    cfg.ballots = explicit_ballots();
    cfg.goedel.randomizers = Some(GOEDEL_RANDOMIZERS.iter().map(|r| r.to_vec()).collect());
    cfg.goedel.split = split;
    if split == SplitMode::UniformField {
        cfg.goedel.arithmetic = Arithmetic::Field;
    }
    cfg
}

fn goedel_matrix() -> Vec<Vec<Vec<u64>>> {
    const PRIMES: [u64; 3] = [2, 3, 5];
    let mut cells = vec![vec![Vec::new(); 7]; 7];
    for (c, &p) in PRIMES.iter().enumerate() {
        let rows: Vec<u64> = (0..7)
            .map(|i| {
                let approved = BALLOTS_7X3[i].contains(&c) as u64;
                approved + GOEDEL_RANDOMIZERS[i].iter().filter(|&&q| q == p).count() as u64
            })
            .collect();
        let cols: Vec<u64> = GOEDEL_COLUMN_EXPONENTS.iter().map(|e| e[c] as u64).collect();
        let matrix = northwest_corner(&rows, &cols).expect("margins agree");
        for (i, row) in matrix.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                cells[i][j].extend(std::iter::repeat_n(p, e as usize));
            }
        }
    }
    cells
}

/// A thousand voters, seven candidates, seeded random ballots, exact
/// arithmetic with factor scattering.
pub fn goedel_1000x7(seed: u64) -> ElectionConfig {
    let mut cfg = ElectionConfig::new(SchemeKind::Goedel, 7, 1000);
    cfg.seed = seed;
    cfg.ballots = BallotSource::Random { approval_rate: 0.5 };
    cfg
}
