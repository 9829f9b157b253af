use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::expert::Expert;
use super::pool::{build_answer_pool, AnswerPool, Stage1Output};
use super::stages::{
    assemble_instance, balance_positions, debias_distractors, format_qa, gen_distractors_llm,
};
use super::{GenerationConfig, Strategy};
use crate::dataset::{BaseDataset, Dataset, McqaDataset, McqaInstance};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub sample_id: String,
    pub stage: String,
    pub kind: String,
    pub message: String,
}

impl SampleFailure {
    fn new(sample_id: &str, stage: &str, err: &Error) -> Self {
        Self {
            sample_id: sample_id.to_string(),
            stage: stage.to_string(),
            kind: err.kind().to_string(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub n_base: usize,
    pub n_built: usize,
    pub strategy: Strategy,
    pub k_options: usize,
    pub seed: u64,
    pub expert: String,
    /// `text` or `video`: what Stage II distractor generation was conditioned on.
    pub distractor_conditioning: String,
    pub failures: Vec<SampleFailure>,
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub dataset: McqaDataset,
    pub report: BuildReport,
}

fn thread_pool(max_parallel: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(max_parallel.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn check_relabeled(base: &BaseDataset) -> Result<()> {
    match base
        .iter()
        .find(|s| !s.agent_visible && !s.label.is_sentinel())
    {
        Some(s) => Err(Error::Precondition(format!(
            "sample `{}` is hidden but not relabeled; apply visibility relabeling first",
            s.sample_id
        ))),
        None => Ok(()),
    }
}

/// Stage I over the whole base set. Results keep input order.
pub fn run_stage_one(
    base: &BaseDataset,
    expert: &dyn Expert,
    max_parallel: usize,
) -> Result<(Vec<Stage1Output>, Vec<SampleFailure>)> {
    let results: Vec<Result<Stage1Output>> = thread_pool(max_parallel)?.install(|| {
        base.records()
            .par_iter()
            .map(|s| format_qa(s, expert))
            .collect()
    });
    let mut outputs = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (sample, res) in base.iter().zip(results) {
        match res {
            Ok(out) => outputs.push(out),
            Err(e) => failures.push(SampleFailure::new(&sample.sample_id, "stage1", &e)),
        }
    }
    Ok((outputs, failures))
}

fn stage_two(
    stage1: &Stage1Output,
    cfg: &GenerationConfig,
    expert: &dyn Expert,
    pool: Option<&AnswerPool>,
) -> Result<McqaInstance> {
    let distractors = match (cfg.strategy, pool) {
        (Strategy::Debiased, Some(pool)) => {
            debias_distractors(stage1, pool, cfg.k_options, cfg.seed)?
        }
        _ => gen_distractors_llm(stage1, expert, cfg.k_options)?,
    };
    assemble_instance(
        stage1,
        distractors,
        cfg.k_options,
        cfg.strategy.variant(),
        cfg.seed,
    )
}

/// Stage II and assembly over existing Stage I outputs.
///
/// `prior_failures` (typically Stage I failures) count toward the failure budget.
pub fn build_from_stage_one(
    n_base: usize,
    stage1: &[Stage1Output],
    prior_failures: Vec<SampleFailure>,
    cfg: &GenerationConfig,
    expert: &dyn Expert,
) -> Result<BuildOutput> {
    cfg.validate()?;
    let pool = (cfg.strategy == Strategy::Debiased).then(|| build_answer_pool(stage1));
    let results: Vec<Result<McqaInstance>> = thread_pool(cfg.max_parallel)?.install(|| {
        stage1
            .par_iter()
            .map(|s| stage_two(s, cfg, expert, pool.as_ref()))
            .collect()
    });
    let mut failures = prior_failures;
    let mut instances = Vec::with_capacity(results.len());
    for (s, res) in stage1.iter().zip(results) {
        match res {
            Ok(inst) => instances.push(inst),
            Err(e) => failures.push(SampleFailure::new(&s.sample_id, "stage2", &e)),
        }
    }
    balance_positions(&mut instances, cfg.seed);
    let report = BuildReport {
        n_base,
        n_built: instances.len(),
        strategy: cfg.strategy,
        k_options: cfg.k_options,
        seed: cfg.seed,
        expert: expert.id(),
        distractor_conditioning: match cfg.strategy {
            Strategy::Llm => expert.distractor_conditioning().to_string(),
            Strategy::Debiased => "none".to_string(),
        },
        failures,
    };
    if (report.failures.len() as f64) > cfg.max_failure_rate * n_base as f64 {
        return Err(Error::TooManyFailures {
            failed: report.failures.len(),
            total: n_base,
            report: Box::new(report),
        });
    }
    Ok(BuildOutput {
        dataset: Dataset::new(instances)?,
        report,
    })
}

/// Stage I, Stage II, rewrite, assemble and position balancing, one instance per base sample.
///
/// Per-sample failures are collected in the report; only exceeding the
/// failure budget fails the run.
pub fn build_dataset(
    base: &BaseDataset,
    cfg: &GenerationConfig,
    expert: &dyn Expert,
) -> Result<BuildOutput> {
    cfg.validate()?;
    check_relabeled(base)?;
    let (stage1, failures) = run_stage_one(base, expert, cfg.max_parallel)?;
    build_from_stage_one(base.len(), &stage1, failures, cfg, expert)
}
