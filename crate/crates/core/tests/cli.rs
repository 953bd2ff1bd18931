use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use goedel_voting::cli::RunReport;
use goedel_voting::protocol_sim::Transcript;

const BALLOTS: &str = "ballots = [[0, 2], [2], [0], [1, 2], [0, 1, 2], [1], [1]]";

fn goedel_vote(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goedel-vote"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("election.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn record(out: &Output) -> RunReport {
    RunReport::from_record(String::from_utf8_lossy(&out.stdout).trim()).expect("one record line")
}

#[test]
fn run_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &format!("scheme = \"goedel\"\ncandidates = 3\nvoters = 7\nseed = 5\n{BALLOTS}\n\n[goedel]\narithmetic = \"field\"\nsplit = \"uniform-field\"\n"),
    );
    let out = goedel_vote(&["run", &config, "--format", "records"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = record(&out);
    assert_eq!(report.counts, vec![3, 4, 4]);
    assert_eq!(report.oracle_match, Some(true));
}

#[test]
fn overrides_replace_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "scheme = \"goedel\"\ncandidates = 4\nvoters = 5\n");
    let out = goedel_vote(&["run", &config, "--scheme", "sun-liu", "--voters", "9", "--mode", "modular", "--format", "records"]);
    assert_eq!(out.status.code(), Some(0));
    let report = record(&out);
    assert_eq!((report.n, report.m, report.counts.len()), (9, 4, 4));
    assert_eq!(report.oracle_match, Some(true));
}

#[test]
fn invalid_config_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "scheme = \"goedel\"\ncandidates = 3\nvoters = \"seven\"\n");
    let out = goedel_vote(&["run", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("voters"));

    let config = write_config(dir.path(), "scheme = \"goedel\"\ncandidates = 3\nvoters = 2\nballots = [[0], [5]]\n");
    assert_eq!(goedel_vote(&["run", &config]).status.code(), Some(2));
}

#[test]
fn post_casting_dropout_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &format!("scheme = \"sun-liu\"\ncandidates = 3\nvoters = 7\n{BALLOTS}\n\n[faults.dropout]\nvoter = 4\nphase = \"tallying\"\n"),
    );
    let out = goedel_vote(&["run", &config, "--format", "records"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(record(&out).blocking_voter, Some(4));
}

#[test]
fn corrupted_tally_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &format!("scheme = \"goedel\"\ncandidates = 3\nvoters = 7\n{BALLOTS}\n\n[faults]\ncorrupt_tallies = [2]\n"),
    );
    let out = goedel_vote(&["run", &config, "--format", "records"]);
    assert_eq!(out.status.code(), Some(4));
    let report = record(&out);
    assert_eq!(report.disputes, vec![2]);
    assert_eq!(report.counts, vec![3, 4, 4]);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<String> = (0..2).map(|i| dir.path().join(format!("t{i}.jsonl")).to_str().unwrap().to_string()).collect();
    for p in &paths {
        let out = goedel_vote(&["demo", "goedel-7x3", "--seed", "11", "--transcript", p]);
        assert_eq!(out.status.code(), Some(0));
    }
    let a = fs::read_to_string(&paths[0]).unwrap();
    assert_eq!(a, fs::read_to_string(&paths[1]).unwrap());
    let transcript = Transcript::from_jsonl(&a).unwrap();
    assert_eq!(transcript.candidates, 3);
}

#[test]
fn out_flag_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.jsonl");
    let out = goedel_vote(&["bench", "--grid", "9:1000,3:7", "--reps", "0", "--format", "records", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 2);
}

#[test]
fn analyze_reports_per_target_tests() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "scheme = \"goedel\"\ncandidates = 2\nvoters = 3\n\n[goedel]\narithmetic = \"field\"\nsplit = \"uniform-field\"\nfield_prime = \"37\"\n",
    );
    let out = goedel_vote(&["analyze", &config, "-t", "1", "--trials", "20000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("result     PASS"), "{text}");

    let out = goedel_vote(&["analyze", &config, "-t", "3"]);
    assert_eq!(out.status.code(), Some(2));
}
