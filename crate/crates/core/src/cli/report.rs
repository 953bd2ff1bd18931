use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::protocol_sim::{
    AbortReport, CollusionReport, DisputeError, ElectionOutcome, SchemeKind, UnresolvedDispute,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    Aborted,
    Unresolved,
}

/// Machine-readable summary of one election run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub scheme: SchemeKind,
    pub m: usize,
    pub n: usize,
    pub status: RunStatus,
    pub counts: Vec<u64>,
    /// Decimal tally value; empty unless completed.
    pub tally: String,
    pub elapsed_micros: u64,
    pub disputes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocking_voter: Option<usize>,
    /// Set when the counts were checked against the plaintext ballots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_match: Option<bool>,
}

impl RunReport {
    pub fn from_outcome(scheme: SchemeKind, m: usize, n: usize, outcome: &ElectionOutcome, elapsed_micros: u64) -> Self {
        let mut report = RunReport {
            scheme,
            m,
            n,
            status: RunStatus::Completed,
            counts: Vec::new(),
            tally: String::new(),
            elapsed_micros,
            disputes: Vec::new(),
            blocking_voter: None,
            oracle_match: None,
        };
        match outcome {
            ElectionOutcome::Completed(run) => {
                report.n = run.result.voters;
                report.counts = run.result.counts.clone();
                report.tally = run.result.tally.clone();
                report.disputes = run.result.disputes.iter().copied().collect();
            }
            ElectionOutcome::Aborted(a) => {
                let AbortReport { original_index, .. } = **a;
                report.status = RunStatus::Aborted;
                report.blocking_voter = Some(original_index);
            }
            ElectionOutcome::Unresolved(u) => {
                let UnresolvedDispute { error: DisputeError::NoMajority { groups, .. }, .. } = &**u;
                report.status = RunStatus::Unresolved;
                report.disputes = groups.iter().flat_map(|(_, voters)| voters.iter().copied()).collect();
            }
        }
        report
    }

    /// 0 on a clean run, 3 on abort, 4 when any dispute was raised.
    pub fn exit_code(&self) -> i32 {
        match self.status {
            RunStatus::Aborted => 3,
            RunStatus::Unresolved => 4,
            RunStatus::Completed if !self.disputes.is_empty() => 4,
            RunStatus::Completed => 0,
        }
    }

    pub fn to_record(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }

    pub fn from_record(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scheme     {}", self.scheme);
        let _ = writeln!(out, "candidates {}", self.m);
        let _ = writeln!(out, "voters     {}", self.n);
        let status = match self.status {
            RunStatus::Completed => "completed".to_string(),
            RunStatus::Aborted => format!(
                "aborted: voter {} never broadcast its partial tally",
                self.blocking_voter.unwrap_or_default()
            ),
            RunStatus::Unresolved => "unresolved: no tally announced by a strict majority".to_string(),
        };
        let _ = writeln!(out, "status     {status}");
        if self.status == RunStatus::Completed {
            let _ = writeln!(out, "tally      {}", self.tally);
            let _ = writeln!(out, "candidate  approvals");
            for (c, count) in self.counts.iter().enumerate() {
                let _ = writeln!(out, "{c:<10} {count}");
            }
        }
        let disputes = if self.disputes.is_empty() {
            "none".to_string()
        } else {
            self.disputes.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        };
        let _ = writeln!(out, "disputes   {disputes}");
        if let Some(ok) = self.oracle_match {
            let _ = writeln!(out, "oracle     {}", if ok { "match" } else { "MISMATCH" });
        }
        let _ = writeln!(out, "elapsed    {:.3} ms", self.elapsed_micros as f64 / 1000.0);
        out
    }
}

pub fn collusion_table(report: &CollusionReport) -> String {
    let mut out = String::new();
    let split = report.split.map(|s| format!(" ({s:?})")).unwrap_or_default();
    let _ = writeln!(out, "scheme     {}{split}", report.scheme);
    let _ = writeln!(out, "voters     {}, candidates {}", report.voters, report.candidates);
    let _ = writeln!(out, "colluders  {:?}", report.colluders);
    let _ = writeln!(out, "trials     {} per setting", report.trials);
    let _ = writeln!(out, "threshold  p >= {:.4}", report.threshold);
    let _ = writeln!(out, "target  categories  chi2        dof  p-value   exposing(A/B)  verdict");
    for t in &report.targets {
        let _ = writeln!(
            out,
            "{:<7} {:<11} {:<11.3} {:<4} {:<9.4} {:<14} {}",
            t.voter,
            t.categories,
            t.homogeneity.statistic,
            t.homogeneity.dof,
            t.homogeneity.p_value,
            format!("{}/{}", t.factor_exposing[0], t.factor_exposing[1]),
            if t.passed { "PASS" } else { "FAIL" }
        );
        if let Some(u) = &t.uniformity {
            let _ = writeln!(
                out,
                "        uniformity of view: chi2 {:.3} on {} dof, p {:.4}",
                u.statistic, u.dof, u.p_value
            );
        }
    }
    for note in &report.notes {
        let _ = writeln!(out, "note: {note}");
    }
    let _ = writeln!(out, "result     {}", if report.passed { "PASS" } else { "FAIL" });
    out
}
