//! The additive multi-candidate scheme: each ballot is `m` segments of `k`
//! bits, segment `j` holding `00..0a_j`. Voters blind their ballot value with
//! a private randomizer, split it into `n` additive shares, sum the column
//! they receive, subtract their own randomizer and broadcast the result. The
//! broadcast values sum to the sum of the ballots, which is read back `k` bits
//! at a time.
//!
//! Candidate 0 occupies the most significant segment.
//!
//! A voter can put any value in a segment; nothing here detects a segment
//! outside `{0, 1}`.

use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SunLiuError {
    #[error("layout needs m >= 1 and n >= 1 (got m={m}, n={n})")]
    EmptyLayout { m: usize, n: usize },
    #[error("candidate {candidate} out of range for {m} candidates")]
    CandidateOutOfRange { candidate: usize, m: usize },
    #[error("share matrix incomplete: missing row from voter {missing}")]
    MissingRow { missing: usize },
    #[error("row from voter {owner} has {got} shares, expected {expected}")]
    RaggedRow { owner: usize, expected: usize, got: usize },
    #[error("tally {tally} does not fit a {bits}-bit ballot layout")]
    TallyOutOfRange { tally: BigInt, bits: usize },
    #[error("segment {candidate} decodes to {count}, more than the {n} voters")]
    CountExceedsVoters { candidate: usize, count: u64, n: usize },
    #[error("modulus {modulus} is too small for a {bits}-bit tally")]
    ModulusTooSmall { modulus: BigUint, bits: usize },
}

/// Segment geometry: `k = floor(log2 n) + 1` bits per candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallotLayout {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub total_bits: usize,
}

pub fn make_layout(m: usize, n: usize) -> Result<BallotLayout, SunLiuError> {
    if m == 0 || n == 0 {
        return Err(SunLiuError::EmptyLayout { m, n });
    }
    let k = (usize::BITS - n.leading_zeros()) as usize;
    Ok(BallotLayout {
        m,
        n,
        k,
        total_bits: m * k,
    })
}

impl BallotLayout {
    fn segment_shift(&self, candidate: usize) -> usize {
        (self.m - 1 - candidate) * self.k
    }
}

/// A ballot's decimal value `v_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryBallot {
    pub value: BigUint,
    pub layout: BallotLayout,
}

impl BinaryBallot {
    /// The ballot as a bit string, segments left to right.
    pub fn bits(&self) -> String {
        format!("{:0width$b}", self.value, width = self.layout.total_bits)
    }
}

pub fn encode_ballot(
    approvals: &BTreeSet<usize>,
    layout: &BallotLayout,
) -> Result<BinaryBallot, SunLiuError> {
    let mut value = BigUint::zero();
    for &candidate in approvals {
        if candidate >= layout.m {
            return Err(SunLiuError::CandidateOutOfRange { candidate, m: layout.m });
        }
        value.set_bit(layout.segment_shift(candidate) as u64, true);
    }
    Ok(BinaryBallot { value, layout: *layout })
}

/// `S = v + R`.
pub fn randomize(v: &BigInt, randomizer: &BigInt) -> BigInt {
    v + randomizer
}

/// Share arithmetic: exact integers, or residues modulo `q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AdditiveMode {
    Plain,
    Modular(BigUint),
}

impl AdditiveMode {
    /// Default modulus: `2^max(64, mk)`, large enough for any tally of the layout.
    pub fn modular_for(layout: &BallotLayout) -> Self {
        AdditiveMode::Modular(BigUint::one() << layout.total_bits.max(64))
    }

    pub fn check_layout(&self, layout: &BallotLayout) -> Result<(), SunLiuError> {
        match self {
            AdditiveMode::Plain => Ok(()),
            AdditiveMode::Modular(q) => {
                if q.bits() as usize > layout.total_bits {
                    Ok(())
                } else {
                    Err(SunLiuError::ModulusTooSmall {
                        modulus: q.clone(),
                        bits: layout.total_bits,
                    })
                }
            }
        }
    }

    pub fn reduce(&self, x: BigInt) -> BigInt {
        match self {
            AdditiveMode::Plain => x,
            AdditiveMode::Modular(q) => x.mod_floor(&BigInt::from(q.clone())),
        }
    }

    /// Draws a private randomizer: uniform on `[0, 2 * 2^mk)` in plain mode,
    /// uniform on `Z_q` in modular mode.
    pub fn draw_randomizer<R: Rng + ?Sized>(&self, layout: &BallotLayout, rng: &mut R) -> BigInt {
        let bound = match self {
            AdditiveMode::Plain => BigUint::one() << (layout.total_bits + 1),
            AdditiveMode::Modular(q) => q.clone(),
        };
        BigInt::from(rng.gen_biguint_below(&bound))
    }
}

/// Row `i` of the transfer matrix: `shares[j]` goes to voter `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdditiveShareRow {
    pub owner: usize,
    pub shares: Vec<BigInt>,
}

impl AdditiveShareRow {
    pub fn total(&self, mode: &AdditiveMode) -> BigInt {
        mode.reduce(self.shares.iter().sum())
    }
}

/// Splits `secret` into `n` shares that sum to it.
///
/// Plain mode cuts `[0, S]` at `n - 1` uniform points, so every share is a
/// non-negative integer no larger than `S`. Modular mode draws the first
/// `n - 1` shares uniformly from `Z_q` and fixes the last.
pub fn split_additive<R: Rng + ?Sized>(
    owner: usize,
    secret: &BigInt,
    n: usize,
    mode: &AdditiveMode,
    rng: &mut R,
) -> AdditiveShareRow {
    assert!(n >= 1, "cannot split among zero voters");
    let shares = match mode {
        AdditiveMode::Plain => {
            let magnitude = secret.magnitude();
            let upper = magnitude + 1u32;
            let mut cuts: Vec<BigUint> = (0..n - 1).map(|_| rng.gen_biguint_below(&upper)).collect();
            cuts.sort();
            let mut previous = BigUint::zero();
            let mut shares = Vec::with_capacity(n);
            for cut in cuts.into_iter().chain(std::iter::once(magnitude.clone())) {
                let piece = BigInt::from_biguint(Sign::Plus, &cut - &previous);
                shares.push(if secret.is_negative() { -piece } else { piece });
                previous = cut;
            }
            shares
        }
        AdditiveMode::Modular(q) => {
            let mut shares: Vec<BigInt> = (0..n - 1)
                .map(|_| BigInt::from(rng.gen_biguint_below(q)))
                .collect();
            let partial: BigInt = shares.iter().sum();
            shares.push(mode.reduce(secret - partial));
            shares
        }
    };
    AdditiveShareRow { owner, shares }
}

fn check_rows(rows: &[AdditiveShareRow], n: usize) -> Result<(), SunLiuError> {
    let mut present = vec![false; n];
    for row in rows {
        if let Some(slot) = present.get_mut(row.owner) {
            *slot = true;
        }
    }
    if let Some(missing) = present.iter().position(|&p| !p) {
        return Err(SunLiuError::MissingRow { missing });
    }
    for row in rows {
        if row.shares.len() != n {
            return Err(SunLiuError::RaggedRow {
                owner: row.owner,
                expected: n,
                got: row.shares.len(),
            });
        }
    }
    Ok(())
}

/// `S'_j`: the sum of column `j` over all `n` rows.
pub fn column_sum(
    rows: &[AdditiveShareRow],
    n: usize,
    column: usize,
    mode: &AdditiveMode,
) -> Result<BigInt, SunLiuError> {
    check_rows(rows, n)?;
    Ok(mode.reduce(rows.iter().map(|r| &r.shares[column]).sum()))
}

/// `v'_j = S'_j - R_j`.
pub fn derandomize(column_total: &BigInt, randomizer: &BigInt, mode: &AdditiveMode) -> BigInt {
    mode.reduce(column_total - randomizer)
}

/// `T`: the sum of every broadcast partial.
pub fn tally(partials: &[BigInt], mode: &AdditiveMode) -> BigInt {
    mode.reduce(partials.iter().sum())
}

/// Reads candidate `j`'s count out of its `k`-bit segment of `T`.
pub fn decode_tally(total: &BigInt, layout: &BallotLayout) -> Result<Vec<u64>, SunLiuError> {
    let out_of_range = || SunLiuError::TallyOutOfRange {
        tally: total.clone(),
        bits: layout.total_bits,
    };
    let magnitude = total.to_biguint().ok_or_else(out_of_range)?;
    if magnitude.bits() as usize > layout.total_bits {
        return Err(out_of_range());
    }
    let mask = (BigUint::one() << layout.k) - 1u32;
    (0..layout.m)
        .map(|candidate| {
            let count = ((&magnitude >> layout.segment_shift(candidate)) & &mask)
                .to_u64()
                .expect("segment wider than 64 bits");
            if count as usize > layout.n {
                Err(SunLiuError::CountExceedsVoters { candidate, count, n: layout.n })
            } else {
                Ok(count)
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverflowReport {
    pub bits: usize,
    pub exceeds_64: bool,
}

/// Ballot bit length `mk` and whether it outgrows a machine word.
pub fn overflow_report(m: usize, n: usize) -> OverflowReport {
    let k = (usize::BITS - n.leading_zeros()) as usize;
    let bits = m * k.max(1);
    OverflowReport {
        bits,
        exceeds_64: bits > 64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    fn int(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn layout_examples() {
        let l = make_layout(3, 7).unwrap();
        assert_eq!((l.k, l.total_bits), (3, 9));
        let l = make_layout(9, 1000).unwrap();
        assert_eq!((l.k, l.total_bits), (10, 90));
        let l = make_layout(1, 1).unwrap();
        assert_eq!((l.k, l.total_bits), (1, 1));
        // n < 2^k at the power-of-two boundary.
        assert_eq!(make_layout(1, 8).unwrap().k, 4);
        assert_eq!(make_layout(1, 7).unwrap().k, 3);
        assert!(make_layout(0, 3).is_err());
    }

    #[test]
    fn encode_examples() {
        let l = make_layout(3, 7).unwrap();
        let p1 = encode_ballot(&set(&[0, 2]), &l).unwrap();
        assert_eq!(p1.value, BigUint::from(65u32));
        assert_eq!(p1.bits(), "001000001");
        assert_eq!(encode_ballot(&set(&[0, 1, 2]), &l).unwrap().value, BigUint::from(73u32));
        assert_eq!(encode_ballot(&set(&[]), &l).unwrap().value, BigUint::zero());
        assert_eq!(
            encode_ballot(&set(&[3]), &l),
            Err(SunLiuError::CandidateOutOfRange { candidate: 3, m: 3 })
        );
    }

    #[test]
    fn randomize_examples() {
        assert_eq!(randomize(&int(65), &int(10)), int(75));
        assert_eq!(randomize(&int(73), &int(11)), int(84));
        assert_eq!(randomize(&int(0), &int(0)), int(0));
    }

    #[test]
    fn split_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let row = split_additive(0, &int(13), 1, &AdditiveMode::Plain, &mut rng);
        assert_eq!(row.shares, vec![int(13)]);

        let row = split_additive(0, &int(75), 7, &AdditiveMode::Plain, &mut rng);
        assert_eq!(row.shares.len(), 7);
        assert_eq!(row.total(&AdditiveMode::Plain), int(75));
        assert!(row.shares.iter().all(|s| !s.is_negative() && s <= &int(75)));

        let q: BigUint = BigUint::one() << 32;
        let mode = AdditiveMode::Modular(q.clone());
        let row = split_additive(0, &int(75), 7, &mode, &mut rng);
        let sum: BigInt = row.shares.iter().sum();
        assert_eq!(sum.mod_floor(&BigInt::from(q)), int(75));
    }

    #[test]
    fn column_and_derandomize_examples() {
        let mode = AdditiveMode::Plain;
        assert_eq!(derandomize(&int(42), &int(10), &mode), int(32));
        assert_eq!(derandomize(&int(42), &int(25), &mode), int(17));
        assert_eq!(derandomize(&int(9), &int(0), &mode), int(9));

        let rows = vec![
            AdditiveShareRow { owner: 0, shares: vec![int(1), int(2)] },
            AdditiveShareRow { owner: 1, shares: vec![int(3), int(4)] },
        ];
        assert_eq!(column_sum(&rows, 2, 1, &mode).unwrap(), int(6));
        assert_eq!(
            column_sum(&rows[..1], 2, 0, &mode),
            Err(SunLiuError::MissingRow { missing: 1 })
        );
    }

    #[test]
    fn tally_examples() {
        let mode = AdditiveMode::Plain;
        let l = make_layout(3, 7).unwrap();
        let partials: Vec<BigInt> = [32, 34, 40, 34, 34, 17, 37].into_iter().map(int).collect();
        let t = tally(&partials, &mode);
        assert_eq!(t, int(228));
        assert_eq!(decode_tally(&t, &l).unwrap(), vec![3, 4, 4]);
        assert_eq!(decode_tally(&int(0), &l).unwrap(), vec![0, 0, 0]);
        assert_eq!(decode_tally(&int(73), &l).unwrap(), vec![1, 1, 1]);
    }

    #[test]
    fn decode_rejects_corruption() {
        let l = make_layout(3, 7).unwrap();
        assert!(matches!(decode_tally(&int(-1), &l), Err(SunLiuError::TallyOutOfRange { .. })));
        assert!(matches!(decode_tally(&int(512), &l), Err(SunLiuError::TallyOutOfRange { .. })));
        // n = 5 fits k = 3, but a segment reading 7 is impossible.
        let l = make_layout(1, 5).unwrap();
        assert!(matches!(decode_tally(&int(7), &l), Err(SunLiuError::CountExceedsVoters { .. })));
    }

    #[test]
    fn overflow_examples() {
        assert_eq!(overflow_report(9, 1000), OverflowReport { bits: 90, exceeds_64: true });
        assert_eq!(overflow_report(3, 7), OverflowReport { bits: 9, exceeds_64: false });
        assert_eq!(overflow_report(1, 1), OverflowReport { bits: 1, exceeds_64: false });
        assert_eq!(overflow_report(8, 255).bits, 64);
        assert!(!overflow_report(8, 255).exceeds_64);
    }

    #[test]
    fn modular_default_covers_wide_layouts() {
        let l = make_layout(9, 1000).unwrap();
        let mode = AdditiveMode::modular_for(&l);
        assert!(mode.check_layout(&l).is_ok());
        assert!(AdditiveMode::Modular(BigUint::one() << 64).check_layout(&l).is_err());
    }

    #[test]
    fn modular_share_uniformity() {
        // q = 5, n = 3: the first two shares of every row should be uniform on
        // Z_5 x Z_5 whatever the secret.
        let q = BigUint::from(5u32);
        let mode = AdditiveMode::Modular(q);
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let trials = 50_000;
        for secret in [0, 3] {
            let mut counts = [0u32; 25];
            for _ in 0..trials {
                let row = split_additive(0, &int(secret), 3, &mode, &mut rng);
                let a = row.shares[0].to_usize().unwrap();
                let b = row.shares[1].to_usize().unwrap();
                counts[a * 5 + b] += 1;
            }
            let expected = trials as f64 / 25.0;
            let chi2: f64 = counts
                .iter()
                .map(|&c| (c as f64 - expected).powi(2) / expected)
                .sum();
            // chi-square, 24 dof, p = 0.001 critical value.
            assert!(chi2 < 51.18, "secret {secret}: chi2 = {chi2}");
        }
    }

    fn brute_counts(ballots: &[BTreeSet<usize>], m: usize) -> Vec<u64> {
        (0..m)
            .map(|j| ballots.iter().filter(|b| b.contains(&j)).count() as u64)
            .collect()
    }

    proptest! {
        #[test]
        fn telescoping_and_segments(
            m in 1usize..=6,
            n in 1usize..=20,
            seed in any::<u64>(),
            modular in any::<bool>(),
        ) {
            let layout = make_layout(m, n).unwrap();
            let mode = if modular { AdditiveMode::modular_for(&layout) } else { AdditiveMode::Plain };
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let ballots: Vec<BTreeSet<usize>> = (0..n)
                .map(|_| (0..m).filter(|_| rng.gen_bool(0.5)).collect())
                .collect();
            let values: Vec<BigInt> = ballots
                .iter()
                .map(|b| BigInt::from(encode_ballot(b, &layout).unwrap().value))
                .collect();
            let randomizers: Vec<BigInt> = (0..n).map(|_| mode.draw_randomizer(&layout, &mut rng)).collect();
            let rows: Vec<AdditiveShareRow> = (0..n)
                .map(|i| split_additive(i, &randomize(&values[i], &randomizers[i]), n, &mode, &mut rng))
                .collect();

            let by_rows: BigInt = rows.iter().flat_map(|r| r.shares.iter()).sum();
            let by_cols: BigInt = (0..n).flat_map(|j| rows.iter().map(move |r| &r.shares[j])).sum();
            prop_assert_eq!(by_rows, by_cols);

            let partials: Vec<BigInt> = (0..n)
                .map(|j| derandomize(&column_sum(&rows, n, j, &mode).unwrap(), &randomizers[j], &mode))
                .collect();
            let t = tally(&partials, &mode);
            prop_assert_eq!(&t, &values.iter().sum::<BigInt>());
            prop_assert_eq!(decode_tally(&t, &layout).unwrap(), brute_counts(&ballots, m));
        }
    }
}
