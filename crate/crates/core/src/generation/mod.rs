//! MCQA construction: Stage I realization, Stage II distractors (expert-generated
//! or sampled from other samples' answers), identifier rewriting, and assembly.

mod expert;
mod pipeline;
mod pool;
mod rewrite;
mod stages;

pub use expert::{
    answer_text, question_text, DistractorRequest, Expert, HttpExpert, ProposedDistractor, QaPair,
    StyledExpert, TemplateExpert,
};
pub use pipeline::{
    build_dataset, build_from_stage_one, run_stage_one, BuildOutput, BuildReport, SampleFailure,
};
pub use pool::{build_answer_pool, AnswerPool, PoolEntry, Stage1Output};
pub use rewrite::{
    mentions_agent, numeric_ids, rewrite_agent_id, templatize, NoIdentifier, AGENT_PLACEHOLDER,
};
pub use stages::{
    assemble_instance, balance_positions, debias_distractors, format_qa, gen_distractors_llm,
    mcqa_to_openended, OpenEndedItem,
};

use serde::{Deserialize, Serialize};

use crate::dataset::{ManeuverLabel, Variant};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Distractors proposed by the expert.
    Llm,
    /// Distractors sampled from other samples' ground-truth answers.
    Debiased,
}

impl Strategy {
    pub fn variant(self) -> Variant {
        match self {
            Strategy::Llm => Variant::Llm,
            Strategy::Debiased => Variant::Debiased,
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "llm" => Ok(Strategy::Llm),
            "debiased" | "debias" => Ok(Strategy::Debiased),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub k_options: usize,
    pub strategy: Strategy,
    pub seed: u64,
    /// Upper bound on concurrent expert calls.
    pub max_parallel: usize,
    /// Largest tolerated fraction of per-sample failures.
    pub max_failure_rate: f64,
}

impl GenerationConfig {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        Self {
            k_options: 4,
            strategy,
            seed,
            max_parallel: 8,
            max_failure_rate: 0.10,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k_options = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_options < 2 {
            return Err(Error::Config("k_options must be at least 2".into()));
        }
        let labels = ManeuverLabel::ALL.len();
        if self.strategy == Strategy::Debiased && self.k_options > labels {
            return Err(Error::Config(format!(
                "debiased sampling needs k_options - 1 <= {} distinct other labels",
                labels - 1
            )));
        }
        if self.max_parallel == 0 {
            return Err(Error::Config("max_parallel must be positive".into()));
        }
        Ok(())
    }
}
