//! Building blocks for multiple-choice QA datasets over labeled driving scenes.
//!
//! The crate covers the whole offline toolchain:
//!
//! - [`dataset`]: records, line-delimited IO, visibility relabeling, partitions,
//!   validation statistics and synthetic fixtures.
//! - [`generation`]: question/answer realization, LLM-style distractors, and the
//!   label-space distractor sampler that reuses other samples' answers.
//! - [`backends`]: evaluators (remote chat-completion endpoints and scripted probes).
//! - [`audit`]: plain, shuffled and blind evaluations with partitioned breakdowns.
//! - [`curriculum`]: option-dropping schedules and trainer manifests.
//! - [`review`]: human-review sessions and baseline reports.
//!
//! Metric arithmetic is generic over [`Scalar`], so the same code runs on `f32`,
//! `f64` and exact rationals ([`Exact`]).

pub mod audit;
pub mod backends;
pub mod curriculum;
pub mod dataset;
pub mod endpoint;
pub mod error;
pub mod generation;
pub mod io;
pub mod review;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::{FloatScalar, Scalar};

/// Exact rational scalar used for reproducible report arithmetic.
pub type Exact = num_rational::Ratio<i64>;

/// Curriculum configuration in the percent units used by trainers.
pub type CurriculumConfig = curriculum::CurriculumConfig<f64>;
/// Curriculum configuration with exact rational drop fractions.
pub type ExactCurriculumConfig = curriculum::CurriculumConfig<Exact>;

/// Human baseline report as served to coordinators.
pub type BaselineReport = review::BaselineReport<f64>;
/// Human baseline report computed without rounding.
pub type ExactBaselineReport = review::BaselineReport<Exact>;

pub use dataset::{BaseDataset, McqaDataset};
