use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use proptest::prelude::*;
use rand::SeedableRng;

use super::*;
use crate::godel_core::{exponent_vector_of_ratio, godel_decode, ExponentVector, FieldParams, PrimeBase};
use crate::goedel_scheme::{split_factors, ExactDomain, FieldDomain, Randomizer, ShareDomain, SplitMode};
use crate::worked_examples::{self, BALLOTS_7X3, GOEDEL_PARTIALS, SUN_LIU_PARTIALS};

fn completed(cfg: &ElectionConfig) -> ElectionRun {
    match run_election(cfg).unwrap() {
        ElectionOutcome::Completed(run) => *run,
        other => panic!("expected a completed run, got {other:?}"),
    }
}

fn exact_exponents(text: &str, m: usize) -> ExponentVector {
    let base = PrimeBase::first(m).unwrap();
    let (num, den) = text.split_once('/').unwrap_or((text, "1"));
    exponent_vector_of_ratio(&BigUint::from_str(num).unwrap(), &BigUint::from_str(den).unwrap(), &base).unwrap()
}

#[test]
fn additive_worked_example_reproduces_every_partial() {
    let run = completed(&worked_examples::sun_liu_7x3());
    assert_eq!(run.result.counts, vec![3, 4, 4]);
    assert_eq!(run.result.tally, "228");
    let partials: Vec<i64> = run
        .voters
        .iter()
        .map(|v| v.partial.as_ref().unwrap().parse().unwrap())
        .collect();
    assert_eq!(partials, SUN_LIU_PARTIALS);
}

#[test]
fn multiplicative_worked_example_reproduces_every_partial() {
    let run = completed(&worked_examples::goedel_7x3());
    assert_eq!(run.result.counts, vec![3, 4, 4]);
    assert_eq!(run.result.tally, "405000");
    for (v, expected) in run.voters.iter().zip(GOEDEL_PARTIALS) {
        assert_eq!(exact_exponents(v.partial.as_ref().unwrap(), 3).as_slice(), expected);
    }
}

#[test]
fn worked_example_in_both_split_modes() {
    for split in [SplitMode::FactorScatter, SplitMode::UniformField] {
        for seed in 0..5 {
            let run = completed(&worked_examples::goedel_7x3_free(split, seed));
            assert_eq!(run.result.counts, vec![3, 4, 4], "{split:?} seed {seed}");
        }
    }
}

#[test]
fn single_voter_counts_equal_the_ballot() {
    for scheme in [SchemeKind::SunLiu, SchemeKind::Goedel] {
        let mut cfg = ElectionConfig::new(scheme, 4, 1);
        cfg.ballots = BallotSource::Explicit(vec![vec![1, 3]]);
        let run = completed(&cfg);
        assert_eq!(run.result.counts, vec![0, 1, 0, 1]);
        assert!(run.transcript.messages.is_empty());
    }
}

#[test]
fn empty_ballots_give_zero_counts() {
    let mut cfg = ElectionConfig::new(SchemeKind::Goedel, 3, 4);
    cfg.ballots = BallotSource::Explicit(vec![vec![]; 4]);
    assert_eq!(completed(&cfg).result.counts, vec![0, 0, 0]);
}

#[test]
fn identical_configs_give_identical_transcripts() {
    let mut cfg = ElectionConfig::new(SchemeKind::Goedel, 4, 6);
    cfg.seed = 17;
    cfg.goedel.arithmetic = Arithmetic::Field;
    cfg.goedel.split = SplitMode::UniformField;
    let a = run_election(&cfg).unwrap().transcript().to_jsonl();
    let b = run_election(&cfg).unwrap().transcript().to_jsonl();
    assert_eq!(a, b);
    cfg.seed = 18;
    assert_ne!(a, run_election(&cfg).unwrap().transcript().to_jsonl());
}

#[test]
fn transcript_round_trips_and_replays() {
    for cfg in [
        worked_examples::sun_liu_7x3(),
        worked_examples::goedel_7x3(),
        worked_examples::goedel_7x3_free(SplitMode::UniformField, 3),
    ] {
        let run = completed(&cfg);
        let text = run.transcript.to_jsonl();
        let parsed = Transcript::from_jsonl(&text).unwrap();
        assert_eq!(parsed, run.transcript);
        assert_eq!(parsed.to_jsonl(), text);
        assert_eq!(replay_tally(&cfg, &parsed).unwrap(), run.result.counts);
        let first = text.lines().nth(1).unwrap();
        assert!(first.contains("\"phase\":\"casting\""), "{first}");
    }
}

#[test]
fn equivocating_partial_is_detected() {
    let run = completed(&worked_examples::goedel_7x3());
    let mut t = run.transcript.clone();
    let idx = t.messages.iter().position(|m| m.kind == MessageKind::Partial).unwrap();
    t.messages[idx].payload = "7".into();
    let sender = t.messages[idx].sender;
    match t.public_partials() {
        Err(SimError::Equivocation { voter }) => assert_eq!(voter, sender),
        other => panic!("{other:?}"),
    }
}

#[test]
fn message_counts_and_privacy_of_outbound_traffic() {
    let cfg = worked_examples::goedel_7x3_free(SplitMode::UniformField, 2);
    let run = completed(&cfg);
    let n = 7;
    let shares = run.transcript.messages.iter().filter(|m| m.kind == MessageKind::Share).count();
    let partials = run.transcript.messages.iter().filter(|m| m.kind == MessageKind::Partial).count();
    assert_eq!(shares, n * (n - 1));
    assert_eq!(partials, n * (n - 1));
    // No voter ever sends its kept share or its randomizer.
    for v in &run.voters {
        for m in run.transcript.messages.iter().filter(|m| m.sender == v.index) {
            assert_ne!(Some(&*m.payload), v.kept_share.as_deref());
            assert_ne!(Some(&*m.payload), v.randomizer.as_deref());
        }
    }
}

#[test]
fn every_voter_agrees_and_tallies_only_when_complete() {
    let run = completed(&worked_examples::goedel_7x3_free(SplitMode::FactorScatter, 9));
    for v in &run.voters {
        assert_eq!(v.phase, VoterPhase::Tallied);
        assert_eq!(v.tally.as_deref(), Some(&run.result.counts[..]));
    }

    let cfg = ElectionConfig::new(SchemeKind::Goedel, 3, 2);
    let engine = exact_engine(&cfg).unwrap();
    let mut voter: Voter<GoedelEngine<ExactDomain>> = Voter::new(0, 2);
    voter.vote(ApprovalBallot::new(0, [0])).unwrap();
    let mut rng = stream_rng(1, 1);
    assert!(matches!(voter.tally(&engine), Err(SimError::PhaseOrder { .. })));
    let out = voter.cast(&engine, 2, &mut rng).unwrap();
    assert_eq!(out.len(), 1);
    voter.receive_share(&engine, 2, 1, &out[0].1, "1".into()).unwrap();
    voter.broadcast(&engine).unwrap();
    match voter.tally(&engine) {
        Err(SimError::PrematureTally { missing, .. }) => assert_eq!(missing, vec![1]),
        other => panic!("{other:?}"),
    }
    assert!(matches!(voter.vote(ApprovalBallot::new(0, [])), Err(SimError::PhaseOrder { .. })));
}

#[test]
fn corrupted_announcement_is_flagged() {
    let mut cfg = worked_examples::goedel_7x3();
    cfg.faults.corrupt_tallies = vec![4];
    let run = completed(&cfg);
    assert_eq!(run.result.counts, vec![3, 4, 4]);
    assert_eq!(run.result.disputes, BTreeSet::from([4]));
    assert_eq!(run.transcript.announcements[&4], vec![4, 4, 4]);

    cfg.faults.corrupt_tallies = vec![1, 5];
    assert_eq!(completed(&cfg).result.disputes, BTreeSet::from([1, 5]));
}

#[test]
fn split_announcements_are_unresolved() {
    let mut cfg = ElectionConfig::new(SchemeKind::Goedel, 2, 2);
    cfg.ballots = BallotSource::Explicit(vec![vec![0], vec![1]]);
    cfg.faults.corrupt_tallies = vec![1];
    assert!(matches!(run_election(&cfg).unwrap(), ElectionOutcome::Unresolved(_)));
}

#[test]
fn dropout_before_casting_reindexes_the_rest() {
    for phase in [Phase::Voting, Phase::Casting] {
        for cfg in [worked_examples::goedel_7x3(), worked_examples::sun_liu_7x3()] {
            let run = match drop_voter(&cfg, 3, phase).unwrap() {
                ElectionOutcome::Completed(r) => r,
                other => panic!("{other:?}"),
            };
            let remaining: Vec<ApprovalBallot> = BALLOTS_7X3
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != 3)
                .map(|(i, b)| ApprovalBallot::new(i, b.iter().copied()))
                .collect();
            assert_eq!(run.result.counts, brute_force_counts(&remaining, 3));
            assert_eq!(run.result.voters, 6);
            assert_eq!(run.transcript.roster, vec![0, 1, 2, 4, 5, 6]);
            assert_eq!(run.transcript.dropped, vec![(3, phase)]);
        }
    }
}

#[test]
fn dropout_after_casting_aborts_naming_the_voter() {
    let cfg = worked_examples::goedel_7x3();
    let report = match drop_voter(&cfg, 2, Phase::Tallying).unwrap() {
        ElectionOutcome::Aborted(a) => a,
        other => panic!("{other:?}"),
    };
    assert_eq!(report.blocking_voter, 2);
    assert_eq!(report.original_index, 2);
    assert_eq!(report.partials_received, 6);
    // The blocking voter's randomizer is the prime 5: the uncancelled product
    // is the true tally times 5.
    let uncancelled = exact_exponents(&report.uncancelled, 3);
    assert_eq!(uncancelled.as_slice(), &[3, 4, 5]);
    assert!(report.voters.iter().all(|v| v.tally.is_none()));

    let report = match drop_voter(&worked_examples::sun_liu_7x3(), 5, Phase::Tallying).unwrap() {
        ElectionOutcome::Aborted(a) => a,
        other => panic!("{other:?}"),
    };
    assert_eq!(report.blocking_voter, 5);
    assert_eq!(report.uncancelled, (228 + 25).to_string());
}

#[test]
fn dropout_runs_are_deterministic() {
    let mut cfg = ElectionConfig::new(SchemeKind::Goedel, 3, 5);
    cfg.seed = 4;
    for phase in [Phase::Casting, Phase::Tallying] {
        let a = drop_voter(&cfg, 1, phase).unwrap().transcript().to_jsonl();
        let b = drop_voter(&cfg, 1, phase).unwrap().transcript().to_jsonl();
        assert_eq!(a, b);
    }
}

#[test]
fn no_dropout_matches_plain_run() {
    let cfg = worked_examples::goedel_7x3_free(SplitMode::FactorScatter, 5);
    let plain = run_election(&cfg).unwrap().transcript().to_jsonl();
    let mut with_faults = cfg.clone();
    with_faults.faults = Faults::default();
    assert_eq!(run_election(&with_faults).unwrap().transcript().to_jsonl(), plain);
}

#[test]
fn capacity_is_checked_before_running() {
    let mut cfg = ElectionConfig::new(SchemeKind::Goedel, 2, 3);
    cfg.goedel.arithmetic = Arithmetic::Field;
    cfg.goedel.field_prime = Some("37".into());
    match run_election(&cfg) {
        Err(SimError::Config(e)) => assert_eq!(e.field, "goedel.field_prime"),
        other => panic!("{other:?}"),
    }
    let mut cfg = ElectionConfig::new(SchemeKind::SunLiu, 3, 7);
    cfg.sun_liu.modular = true;
    cfg.sun_liu.modulus_bits = Some(8);
    match run_election(&cfg) {
        Err(SimError::Config(e)) => assert_eq!(e.field, "sun_liu.modulus_bits"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn matrix_rows_must_match_masked_ballots() {
    let mut cfg = worked_examples::sun_liu_7x3();
    cfg.sun_liu.randomizers.as_mut().unwrap()[0] = 11;
    match run_election(&cfg) {
        Err(SimError::Config(e)) => assert_eq!(e.field, "sun_liu.transfer_matrix[0]"),
        other => panic!("{other:?}"),
    }
}

/// Distribution of the share a given slot receives, for every (ballot,
/// randomizer) pair, over every choice of the free uniform slots.
fn slot_distributions(split: SplitMode, slot: usize) -> BTreeMap<Vec<usize>, BTreeMap<BigUint, u64>> {
    let base = PrimeBase::first(2).unwrap();
    let params = std::sync::Arc::new(FieldParams::new(BigUint::from(37u32)).unwrap());
    let domain = FieldDomain::new(base.clone(), params);
    let n: usize = 3;
    let ballots: Vec<Vec<usize>> = vec![vec![], vec![0], vec![1], vec![0, 1]];
    let randomizers = [vec![2], vec![3], vec![2, 3]];
    let mut out = BTreeMap::new();
    for ballot in &ballots {
        let factors: Vec<u64> = ballot.iter().map(|&c| base.prime(c).unwrap()).collect();
        let mut dist: BTreeMap<BigUint, u64> = BTreeMap::new();
        for r in &randomizers {
            let r = Randomizer::new(r.clone(), &base).unwrap();
            match split {
                SplitMode::UniformField => {
                    let masked = crate::goedel_scheme::masked_ballot(&domain, &factors, &r);
                    for a in 1..37u32 {
                        for b in 1..37u32 {
                            let row = crate::goedel_scheme::complete_uniform_row(
                                &domain,
                                0,
                                &masked,
                                vec![domain.element(a), domain.element(b)],
                            )
                            .unwrap();
                            *dist.entry(row.shares[slot].value().clone()).or_default() += 1;
                        }
                    }
                }
                SplitMode::FactorScatter => {
                    // Every assignment of the factors to slots, each equally likely.
                    let all: Vec<u64> = factors.iter().chain(r.primes()).copied().collect();
                    for code in 0..n.pow(all.len() as u32) {
                        let mut x = ExponentVector::zeros(2);
                        let mut rest = code;
                        for &p in &all {
                            if rest % n == slot {
                                x.bump(base.index_of(p).unwrap());
                            }
                            rest /= n;
                        }
                        // Weight so every randomizer and assignment count equally.
                        let weight = n.pow((4 - all.len()) as u32) as u64;
                        *dist.entry(domain.element_of(&x).value().clone()).or_default() += weight;
                    }
                }
            }
        }
        out.insert(ballot.clone(), dist);
    }
    out
}

#[test]
fn no_single_uniform_share_determines_a_ballot() {
    for slot in 0..3 {
        let dists = slot_distributions(SplitMode::UniformField, slot);
        let first = dists.values().next().unwrap();
        assert_eq!(first.len(), 36, "every unit is a possible share");
        for d in dists.values() {
            assert_eq!(d, first, "slot {slot}: share distribution depends on the ballot");
        }
    }
}

#[test]
fn scattered_shares_leak_ballot_information() {
    let dists = slot_distributions(SplitMode::FactorScatter, 1);
    // A share of 2*2*3 can only come from a ballot approving candidate 0.
    let witness = BigUint::from(12u32);
    let possible: Vec<&Vec<usize>> = dists.iter().filter(|(_, d)| d.contains_key(&witness)).map(|(b, _)| b).collect();
    assert!(possible.iter().all(|b| b.contains(&0)), "{possible:?}");
    assert_ne!(dists[&vec![]], dists[&vec![0, 1]]);
}

#[test]
fn every_message_in_a_tiny_uniform_run_is_consistent_with_every_ballot() {
    // Receipt structure at n = 3, m = 2: for each share in the transcript and
    // each alternative ballot and randomizer of its sender, there is a choice
    // of the sender's other shares that explains the same message.
    let mut cfg = ElectionConfig::new(SchemeKind::Goedel, 2, 3);
    cfg.goedel.arithmetic = Arithmetic::Field;
    cfg.goedel.split = SplitMode::UniformField;
    cfg.seed = 5;
    let run = completed(&cfg);
    let base = PrimeBase::first(2).unwrap();
    let params = crate::godel_core::choose_field_prime(2, 3).unwrap();
    let domain = FieldDomain::new(base.clone(), params);
    for msg in run.transcript.messages.iter().filter(|m| m.kind == MessageKind::Share) {
        let value = domain.parse(&msg.payload).unwrap();
        for alt in [vec![], vec![0], vec![1], vec![0, 1]] {
            let factors: Vec<u64> = alt.iter().map(|&c| base.prime(c).unwrap()).collect();
            let masked = crate::goedel_scheme::masked_ballot(&domain, &factors, &Randomizer::new(vec![2], &base).unwrap());
            // Put the observed value in its slot, pick the remaining free slot
            // arbitrarily, and let the fixing slot absorb the difference.
            let explained = if msg.receiver == 2 {
                let a = domain.element(1u32);
                let b = domain.mul(&masked, &domain.inv(&domain.mul(&a, &value)).unwrap());
                crate::goedel_scheme::complete_uniform_row(&domain, msg.sender, &masked, vec![a, b]).unwrap()
            } else {
                let mut free = vec![domain.element(1u32), domain.element(1u32)];
                free[msg.receiver] = value.clone();
                crate::goedel_scheme::complete_uniform_row(&domain, msg.sender, &masked, free).unwrap()
            };
            assert_eq!(explained.shares[msg.receiver], value);
            assert_eq!(domain.product(explained.shares.iter()), masked);
        }
    }
}

#[test]
fn godel_decode_agrees_with_run_tally() {
    let mut cfg = ElectionConfig::new(SchemeKind::Goedel, 4, 9);
    cfg.seed = 2;
    cfg.goedel.arithmetic = Arithmetic::Field;
    let run = completed(&cfg);
    let base = PrimeBase::first(4).unwrap();
    let x = godel_decode(&BigUint::from_str(&run.result.tally).unwrap(), &base).unwrap();
    let counts: Vec<u64> = x.as_slice().iter().map(|&e| e as u64).collect();
    assert_eq!(counts, run.result.counts);
    assert_eq!(counts, brute_force_counts(&run.ballots, 4));
}

#[test]
fn additive_tally_is_the_sum_of_partials() {
    let mut cfg = ElectionConfig::new(SchemeKind::SunLiu, 5, 12);
    cfg.seed = 8;
    let run = completed(&cfg);
    let sum: BigInt = run.voters.iter().map(|v| BigInt::from_str(v.partial.as_ref().unwrap()).unwrap()).sum();
    assert_eq!(sum.to_string(), run.result.tally);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn runs_match_brute_force_and_conserve(
        scheme in prop_oneof![Just(SchemeKind::SunLiu), Just(SchemeKind::Goedel)],
        field in any::<bool>(),
        uniform in any::<bool>(),
        modular in any::<bool>(),
        m in 1usize..6,
        n in 1usize..10,
        seed in any::<u64>(),
    ) {
        let mut cfg = ElectionConfig::new(scheme, m, n);
        cfg.seed = seed;
        cfg.sun_liu.modular = modular;
        if field {
            cfg.goedel.arithmetic = Arithmetic::Field;
            if uniform {
                cfg.goedel.split = SplitMode::UniformField;
            }
        }
        let run = completed(&cfg);
        let expected = brute_force_counts(&run.ballots, m);
        prop_assert_eq!(&run.result.counts, &expected);
        prop_assert!(run.result.counts.iter().all(|&c| c as usize <= n));
        prop_assert!(run.result.counts.iter().sum::<u64>() as usize <= n * m);
        prop_assert!(run.result.disputes.is_empty());
        for v in &run.voters {
            prop_assert_eq!(v.tally.as_ref(), Some(&expected));
        }
    }
}

#[test]
fn seeded_rng_streams_are_independent() {
    use rand::RngCore;
    let mut a = stream_rng(1, 0);
    let mut b = stream_rng(1, 1);
    assert_ne!(a.next_u64(), b.next_u64());
    let mut c = rand_chacha::ChaCha20Rng::seed_from_u64(1);
    assert_eq!(stream_rng(1, 0).next_u64(), c.next_u64());
}

#[test]
fn scatter_split_in_tiny_field_matches_split_factors() {
    // The engine's field cast and a direct split agree when fed the same rng.
    let mut cfg = ElectionConfig::new(SchemeKind::Goedel, 2, 3);
    cfg.goedel.arithmetic = Arithmetic::Field;
    let engine = field_engine(&cfg, 3).unwrap();
    let ballot = ApprovalBallot::new(0, [1]);
    let r = Randomizer::new(vec![2], engine.domain().base()).unwrap();
    let mut cfg_fixed = cfg.clone();
    cfg_fixed.goedel.randomizers = Some(vec![vec![2]; 3]);
    let fixed = field_engine(&cfg_fixed, 3).unwrap();
    let (_, row) = fixed.cast(0, 3, &ballot, &mut stream_rng(0, 9)).unwrap();
    let direct = split_factors(engine.domain(), 0, &[3], &r, 3, SplitMode::FactorScatter, &mut stream_rng(0, 9)).unwrap();
    assert_eq!(row, direct.shares);
}
