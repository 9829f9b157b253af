//! Shortcut audits: plain, shuffle-consistency and blind evaluations.

mod report;

pub use report::{
    compare_reports, AuditReport, AuditStatus, FailureNote, PartitionStat, ReportDiff,
};

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{answer_mcq, Choice, Evaluator, Mode};
use crate::dataset::{McqaDataset, McqaInstance, Partition};
use crate::{rng, Error, Exact, Result, Scalar};

/// `accuracy - 1/k`, the distance from chance for `k` options.
pub fn above_random<T: Scalar>(accuracy: T, k: usize) -> Result<T> {
    if k < 2 {
        return Err(Error::Precondition(format!(
            "above_random needs k >= 2, got {k}"
        )));
    }
    Ok(accuracy - T::ratio(1, k as u64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShuffleScoring {
    /// An item counts only if every ordering is answered correctly.
    #[default]
    AllVariants,
    /// Each item contributes its fraction of correct orderings.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Plain,
    Shuffled,
    Blind,
}

/// One backend call, kept with its raw reply so audits can be re-scored offline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub sample_id: String,
    pub phase: Phase,
    pub variant: usize,
    /// `order[j]` is the stored option index presented at position `j`.
    pub order: Vec<usize>,
    pub correct_index: usize,
    pub chosen_index: Choice,
    pub correct: bool,
    pub raw_text: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub accuracy: T,
    pub n: usize,
    pub records: Vec<ItemRecord>,
}

#[derive(Debug, Clone)]
pub struct BlindBreakdown<T> {
    pub overall: Evaluation<T>,
    /// `(partition, n, correct, accuracy)`; accuracy is `None` for an empty partition.
    pub partitions: Vec<(Partition, usize, usize, Option<T>)>,
}

#[derive(Debug, Clone)]
pub struct AuditOptions {
    pub dataset_id: String,
    /// Mode for the plain and shuffled runs. The partitioned run is always blind.
    pub mode: Mode,
    pub shuffle_variants: usize,
    pub shuffle_scoring: ShuffleScoring,
    pub seed: u64,
    pub max_failure_rate: f64,
}

impl AuditOptions {
    pub fn new(dataset_id: impl Into<String>, seed: u64) -> Self {
        Self {
            dataset_id: dataset_id.into(),
            mode: Mode::Full,
            shuffle_variants: 4,
            shuffle_scoring: ShuffleScoring::AllVariants,
            seed,
            max_failure_rate: 0.10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditOutcome {
    pub report: AuditReport,
    pub records: Vec<ItemRecord>,
}

struct Job<'a> {
    item: &'a McqaInstance,
    variant: usize,
    order: Vec<usize>,
}

struct Aborted {
    cause: String,
    records: Vec<ItemRecord>,
}

fn common_k(ds: &McqaDataset) -> Result<usize> {
    let first = ds
        .iter()
        .next()
        .ok_or_else(|| Error::Precondition("cannot audit an empty dataset".into()))?;
    let k = first.k();
    if let Some(other) = ds.iter().find(|i| i.k() != k) {
        return Err(Error::Precondition(format!(
            "mixed option counts: `{}` has {k}, `{}` has {}",
            first.sample_id,
            other.sample_id,
            other.k()
        )));
    }
    if k < 2 {
        return Err(Error::Precondition(format!(
            "instances need at least 2 options, got {k}"
        )));
    }
    Ok(k)
}

/// Run all jobs, stopping early once hard failures exceed `max_failure_rate`.
fn run_jobs(
    jobs: Vec<Job<'_>>,
    backend: &dyn Evaluator,
    mode: Mode,
    phase: Phase,
    max_failure_rate: f64,
) -> std::result::Result<Vec<ItemRecord>, Aborted> {
    let budget = (max_failure_rate * jobs.len() as f64).floor() as usize;
    let failures = AtomicUsize::new(0);
    let threads = backend
        .max_parallel()
        .min(rayon::current_num_threads())
        .max(1);
    let run = |job: &Job<'_>| -> ItemRecord {
        let presented = job.item.reordered(&job.order);
        let result = if failures.load(Ordering::Relaxed) > budget {
            crate::backends::ChoiceResult {
                chosen_index: Choice::Unparseable,
                raw_text: String::new(),
                mode,
                failure: Some("not attempted: failure budget exhausted".into()),
            }
        } else {
            let r = answer_mcq(&presented, backend, mode);
            if r.failure.is_some() {
                failures.fetch_add(1, Ordering::Relaxed);
            }
            r
        };
        ItemRecord {
            sample_id: job.item.sample_id.clone(),
            phase,
            variant: job.variant,
            order: job.order.clone(),
            correct_index: presented.correct_index,
            correct: result.chosen_index == Choice::Index(presented.correct_index),
            chosen_index: result.chosen_index,
            raw_text: result.raw_text,
            mode,
            failure: result.failure,
        }
    };
    let records: Vec<ItemRecord> =
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| jobs.par_iter().map(run).collect()),
            Err(_) => jobs.iter().map(run).collect(),
        };
    let failed = records.iter().filter(|r| r.failure.is_some()).count();
    if failed > budget {
        let first = records
            .iter()
            .find_map(|r| r.failure.clone())
            .unwrap_or_default();
        return Err(Aborted {
            cause: format!(
                "{failed} of {} backend calls failed ({phase:?}): {first}",
                records.len()
            ),
            records,
        });
    }
    Ok(records)
}

fn identity(k: usize) -> Vec<usize> {
    (0..k).collect()
}

/// `min(k!, cap)`.
fn orderings_capped(k: usize, cap: usize) -> usize {
    let mut f = 1usize;
    for x in 2..=k {
        f = f.saturating_mul(x);
        if f >= cap {
            return cap;
        }
    }
    f.min(cap)
}

/// Distinct option orderings for one item: identity first, the rest drawn
/// without repetition from a stream keyed by `(seed, sample_id)`.
///
/// Asks for at most `k!` orderings.
pub fn shuffle_orders(k: usize, variants: usize, seed: u64, sample_id: &str) -> Vec<Vec<usize>> {
    let want = orderings_capped(k, variants);
    let mut rng = rng::keyed(seed, "shuffle", &[sample_id]);
    let mut seen = BTreeSet::new();
    let mut orders = vec![identity(k)];
    seen.insert(identity(k));
    while orders.len() < want {
        let mut order = identity(k);
        order.shuffle(&mut rng);
        if seen.insert(order.clone()) {
            orders.push(order);
        }
    }
    orders
}

fn aborted<T>(ds_id: &str, cause: String, records: Vec<ItemRecord>) -> Result<T> {
    let report = AuditReport::aborted(ds_id, &cause, &records);
    Err(Error::AuditAborted {
        cause,
        partial: Box::new(AuditOutcome { report, records }),
    })
}

fn plain_with(
    ds: &McqaDataset,
    backend: &dyn Evaluator,
    mode: Mode,
    phase: Phase,
    max_failure_rate: f64,
) -> std::result::Result<Vec<ItemRecord>, Aborted> {
    let jobs = ds
        .iter()
        .map(|item| Job {
            item,
            variant: 0,
            order: identity(item.k()),
        })
        .collect();
    run_jobs(jobs, backend, mode, phase, max_failure_rate)
}

fn accuracy_of<T: Scalar>(records: &[ItemRecord]) -> T {
    let correct = records.iter().filter(|r| r.correct).count();
    T::ratio(correct as u64, records.len().max(1) as u64)
}

/// Accuracy in the stored option order. Unparseable replies count as wrong.
pub fn eval_plain<T: Scalar>(
    ds: &McqaDataset,
    backend: &dyn Evaluator,
    mode: Mode,
) -> Result<Evaluation<T>> {
    common_k(ds)?;
    match plain_with(ds, backend, mode, Phase::Plain, 0.10) {
        Ok(records) => Ok(Evaluation {
            accuracy: accuracy_of(&records),
            n: ds.len(),
            records,
        }),
        Err(a) => aborted("", a.cause, a.records),
    }
}

fn score_shuffled<T: Scalar>(
    n: usize,
    variants: usize,
    records: &[ItemRecord],
    scoring: ShuffleScoring,
) -> T {
    let mut total = T::zero();
    for chunk in records.chunks(variants) {
        let correct = chunk.iter().filter(|r| r.correct).count();
        total = total
            + match scoring {
                ShuffleScoring::AllVariants => {
                    if correct == chunk.len() {
                        T::one()
                    } else {
                        T::zero()
                    }
                }
                ShuffleScoring::Mean => T::ratio(correct as u64, chunk.len() as u64),
            };
    }
    total / T::from_count(n as u64)
}

fn shuffled_with(
    ds: &McqaDataset,
    backend: &dyn Evaluator,
    mode: Mode,
    variants: usize,
    seed: u64,
    max_failure_rate: f64,
) -> Result<(usize, std::result::Result<Vec<ItemRecord>, Aborted>)> {
    let k = common_k(ds)?;
    if variants < 2 {
        return Err(Error::Precondition(format!(
            "shuffle needs at least 2 variants, got {variants}"
        )));
    }
    let per_item = orderings_capped(k, variants);
    let jobs = ds
        .iter()
        .flat_map(|item| {
            shuffle_orders(k, per_item, seed, &item.sample_id)
                .into_iter()
                .enumerate()
                .map(move |(variant, order)| Job {
                    item,
                    variant,
                    order,
                })
        })
        .collect();
    Ok((
        per_item,
        run_jobs(jobs, backend, mode, Phase::Shuffled, max_failure_rate),
    ))
}

/// Shuffle-consistency accuracy over `variants` distinct orderings per item.
pub fn eval_shuffled<T: Scalar>(
    ds: &McqaDataset,
    backend: &dyn Evaluator,
    mode: Mode,
    variants: usize,
    seed: u64,
    scoring: ShuffleScoring,
) -> Result<Evaluation<T>> {
    let (per_item, run) = shuffled_with(ds, backend, mode, variants, seed, 0.10)?;
    match run {
        Ok(records) => Ok(Evaluation {
            accuracy: score_shuffled(ds.len(), per_item, &records, scoring),
            n: ds.len(),
            records,
        }),
        Err(a) => aborted("", a.cause, a.records),
    }
}

fn breakdown<T: Scalar>(ds: &McqaDataset, records: Vec<ItemRecord>) -> Result<BlindBreakdown<T>> {
    let mut tallies = [(0usize, 0usize); 3];
    for (inst, rec) in ds.iter().zip(&records) {
        let part = Partition::of(inst)?;
        let slot = Partition::ALL
            .iter()
            .position(|&p| p == part)
            .expect("listed partition");
        tallies[slot].0 += 1;
        tallies[slot].1 += rec.correct as usize;
    }
    let partitions = Partition::ALL
        .iter()
        .zip(tallies)
        .map(|(&p, (n, c))| (p, n, c, (n > 0).then(|| T::ratio(c as u64, n as u64))))
        .collect();
    Ok(BlindBreakdown {
        overall: Evaluation {
            accuracy: accuracy_of(&records),
            n: ds.len(),
            records,
        },
        partitions,
    })
}

/// Blind accuracy overall and per visibility partition.
pub fn eval_blind_partitioned<T: Scalar>(
    ds: &McqaDataset,
    backend: &dyn Evaluator,
) -> Result<BlindBreakdown<T>> {
    common_k(ds)?;
    crate::dataset::partition_by_visibility(ds)?;
    match plain_with(ds, backend, Mode::Blind, Phase::Blind, 0.10) {
        Ok(records) => breakdown(ds, records),
        Err(a) => aborted("", a.cause, a.records),
    }
}

/// Full audit: plain, shuffled and partitioned blind runs plus derived deltas.
///
/// When `opts.mode` is blind, the plain run doubles as the partitioned blind run.
pub fn run_audit(
    ds: &McqaDataset,
    backend: &dyn Evaluator,
    opts: &AuditOptions,
) -> Result<AuditOutcome> {
    let k = common_k(ds)?;
    crate::dataset::partition_by_visibility(ds)?;
    let mut report = AuditReport::new(opts, &backend.id(), ds.len(), k);
    let mut all = Vec::new();

    let abort =
        |report: AuditReport, mut all: Vec<ItemRecord>, a: Aborted| -> Result<AuditOutcome> {
            all.extend(a.records);
            let mut report = report;
            report.mark_aborted(&a.cause, &all);
            Err(Error::AuditAborted {
                cause: a.cause,
                partial: Box::new(AuditOutcome {
                    report,
                    records: all,
                }),
            })
        };

    let plain = match plain_with(ds, backend, opts.mode, Phase::Plain, opts.max_failure_rate) {
        Ok(r) => r,
        Err(a) => return abort(report, all, a),
    };
    report.set_plain(accuracy_of::<Exact>(&plain));

    let (per_item, shuffled) = shuffled_with(
        ds,
        backend,
        opts.mode,
        opts.shuffle_variants,
        opts.seed,
        opts.max_failure_rate,
    )?;
    report.shuffle_variants = per_item;
    let blind_source = (opts.mode == Mode::Blind).then(|| plain.clone());
    all.extend(plain);
    let shuffled = match shuffled {
        Ok(r) => r,
        Err(a) => return abort(report, all, a),
    };
    report.set_shuffled(score_shuffled::<Exact>(
        ds.len(),
        per_item,
        &shuffled,
        opts.shuffle_scoring,
    ));
    all.extend(shuffled);

    let blind = match blind_source {
        Some(records) => records,
        None => match plain_with(
            ds,
            backend,
            Mode::Blind,
            Phase::Blind,
            opts.max_failure_rate,
        ) {
            Ok(r) => {
                let copy = r.clone();
                all.extend(r);
                copy
            }
            Err(a) => return abort(report, all, a),
        },
    };
    let parts = breakdown::<Exact>(ds, blind)?;
    report.set_blind(&parts);
    report.finish(&all);
    Ok(AuditOutcome {
        report,
        records: all,
    })
}
