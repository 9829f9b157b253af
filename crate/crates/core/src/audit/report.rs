use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::{above_random, AuditOptions, BlindBreakdown, ItemRecord, Phase, ShuffleScoring};
use crate::backends::{Choice, Mode};
use crate::dataset::Partition;
use crate::{Error, Exact, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditStatus {
    Complete,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionStat {
    pub n: usize,
    pub correct: usize,
    /// Absent when the partition is empty.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureNote {
    pub sample_id: String,
    pub phase: Phase,
    pub cause: String,
}

/// Metrics for one dataset under one backend.
///
/// Accuracies are computed as exact rationals and rounded once on the way in,
/// so `above_random` entries are the correctly rounded `accuracy - 1/k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub dataset_id: String,
    pub backend_id: String,
    pub n: usize,
    pub k: usize,
    pub mode: Mode,
    pub plain_accuracy: Option<f64>,
    pub shuffled_accuracy: Option<f64>,
    pub blind_accuracy_overall: Option<f64>,
    pub blind_by_partition: BTreeMap<Partition, PartitionStat>,
    pub above_random: BTreeMap<String, f64>,
    pub unparseable_rate: Option<f64>,
    pub seed: u64,
    pub shuffle_variants: usize,
    pub shuffle_scoring: ShuffleScoring,
    pub status: AuditStatus,
    pub failures: Vec<FailureNote>,
}

fn to_f64(x: Exact) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

impl AuditReport {
    pub(super) fn new(opts: &AuditOptions, backend_id: &str, n: usize, k: usize) -> Self {
        Self {
            dataset_id: opts.dataset_id.clone(),
            backend_id: backend_id.to_string(),
            n,
            k,
            mode: opts.mode,
            plain_accuracy: None,
            shuffled_accuracy: None,
            blind_accuracy_overall: None,
            blind_by_partition: BTreeMap::new(),
            above_random: BTreeMap::new(),
            unparseable_rate: None,
            seed: opts.seed,
            shuffle_variants: opts.shuffle_variants,
            shuffle_scoring: opts.shuffle_scoring,
            status: AuditStatus::Complete,
            failures: Vec::new(),
        }
    }

    pub(super) fn aborted(dataset_id: &str, cause: &str, records: &[ItemRecord]) -> Self {
        let mut opts = AuditOptions::new(dataset_id, 0);
        if let Some(r) = records.first() {
            opts.mode = r.mode;
        }
        let mut report = Self::new(&opts, "", 0, 0);
        report.mark_aborted(cause, records);
        report
    }

    fn delta(&mut self, name: &str, accuracy: Exact) {
        if let Ok(d) = above_random(accuracy, self.k) {
            self.above_random.insert(name.to_string(), to_f64(d));
        }
    }

    pub(super) fn set_plain(&mut self, accuracy: Exact) {
        self.plain_accuracy = Some(to_f64(accuracy));
        self.delta("plain", accuracy);
    }

    pub(super) fn set_shuffled(&mut self, accuracy: Exact) {
        self.shuffled_accuracy = Some(to_f64(accuracy));
        self.delta("shuffled", accuracy);
    }

    pub(super) fn set_blind(&mut self, parts: &BlindBreakdown<Exact>) {
        self.blind_accuracy_overall = Some(to_f64(parts.overall.accuracy));
        self.delta("blind_overall", parts.overall.accuracy);
        for &(part, n, correct, accuracy) in &parts.partitions {
            self.blind_by_partition.insert(
                part,
                PartitionStat {
                    n,
                    correct,
                    accuracy: accuracy.map(to_f64),
                },
            );
            if let Some(acc) = accuracy {
                self.delta(&format!("blind_{}", part.short_name()), acc);
            }
        }
    }

    fn note_failures(&mut self, records: &[ItemRecord]) {
        self.failures = records
            .iter()
            .filter_map(|r| {
                r.failure.as_ref().map(|cause| FailureNote {
                    sample_id: r.sample_id.clone(),
                    phase: r.phase,
                    cause: cause.clone(),
                })
            })
            .collect();
        if !records.is_empty() {
            let unparseable = records
                .iter()
                .filter(|r| r.chosen_index == Choice::Unparseable)
                .count();
            self.unparseable_rate =
                Some(to_f64(Exact::new(unparseable as i64, records.len() as i64)));
        }
    }

    pub(super) fn finish(&mut self, records: &[ItemRecord]) {
        self.status = AuditStatus::Complete;
        self.note_failures(records);
    }

    pub(super) fn mark_aborted(&mut self, cause: &str, records: &[ItemRecord]) {
        self.status = AuditStatus::Aborted;
        self.note_failures(records);
        if self.failures.is_empty() {
            self.failures.push(FailureNote {
                sample_id: "*".into(),
                phase: Phase::Plain,
                cause: cause.to_string(),
            });
        }
    }

    /// Accuracy-like metrics by name, for diffing.
    fn metrics(&self) -> BTreeMap<String, Option<f64>> {
        let mut m = BTreeMap::new();
        m.insert("plain_accuracy".to_string(), self.plain_accuracy);
        m.insert("shuffled_accuracy".to_string(), self.shuffled_accuracy);
        m.insert(
            "blind_accuracy_overall".to_string(),
            self.blind_accuracy_overall,
        );
        m.insert("unparseable_rate".to_string(), self.unparseable_rate);
        for part in Partition::ALL {
            let acc = self.blind_by_partition.get(&part).and_then(|s| s.accuracy);
            m.insert(format!("blind_{}", part.short_name()), acc);
        }
        for (k, v) in &self.above_random {
            m.insert(format!("above_random.{k}"), Some(*v));
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDiff {
    pub backend_id: String,
    pub k: usize,
    pub baseline: String,
    pub candidate: String,
    /// `candidate - baseline`; absent when either side lacks the metric.
    pub deltas: BTreeMap<String, Option<f64>>,
    /// The above-random metric the verdict is based on.
    pub basis: String,
    pub bias_reduced: bool,
    pub verdict: String,
}

/// Per-metric deltas from `a` (baseline) to `b` (candidate).
///
/// Bias counts as reduced when the blind above-random delta on the partition
/// without the sentinel option shrinks in magnitude. If either report lacks
/// that partition, the overall blind delta is used instead.
pub fn compare_reports(a: &AuditReport, b: &AuditReport) -> Result<ReportDiff> {
    if a.k != b.k {
        return Err(Error::Precondition(format!(
            "option counts differ: {} vs {}",
            a.k, b.k
        )));
    }
    if a.backend_id != b.backend_id {
        return Err(Error::Precondition(format!(
            "backends differ: `{}` vs `{}`",
            a.backend_id, b.backend_id
        )));
    }
    let (ma, mb) = (a.metrics(), b.metrics());
    let deltas = ma
        .keys()
        .chain(mb.keys())
        .map(|key| {
            let d = match (
                ma.get(key).copied().flatten(),
                mb.get(key).copied().flatten(),
            ) {
                (Some(x), Some(y)) => Some(y - x),
                _ => None,
            };
            (key.clone(), d)
        })
        .collect();
    let basis = ["blind_D_V", "blind_overall"]
        .into_iter()
        .find(|k| a.above_random.contains_key(*k) && b.above_random.contains_key(*k));
    let (basis, bias_reduced, verdict) = match basis {
        Some(key) => {
            let reduced = b.above_random[key].abs() < a.above_random[key].abs();
            let verdict = if reduced {
                "bias reduced"
            } else {
                "bias not reduced"
            };
            (key.to_string(), reduced, verdict.to_string())
        }
        None => (String::new(), false, "undetermined".to_string()),
    };
    Ok(ReportDiff {
        backend_id: a.backend_id.clone(),
        k: a.k,
        baseline: a.dataset_id.clone(),
        candidate: b.dataset_id.clone(),
        deltas,
        basis,
        bias_reduced,
        verdict,
    })
}
