//! Option-dropping schedules and per-step trainer manifests.
//!
//! A dropped item is presented to the trainer as an open-ended question
//! (see [`crate::generation::mcqa_to_openended`]); manifests reference items by
//! `sample_id` only.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::McqaDataset;
use crate::{rng, Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    /// `max(d_min, d_max - (d_max - d_min)(t/tau)^2)`: decays from `d_max` to `d_min` over `tau` steps.
    #[default]
    Interpolated,
    /// `max(d_min, d_max - d_min (t/tau)^2)`, the schedule read literally.
    /// Constant at `d_max` when `d_min = 0`.
    AsWritten,
}

impl FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interpolated" => Ok(Formula::Interpolated),
            "as_written" | "as-written" => Ok(Formula::AsWritten),
            other => Err(Error::Config(format!("unknown formula `{other}`"))),
        }
    }
}

/// Drop percentages in `[0, 100]` and the decay horizon `tau` in steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurriculumConfig<T> {
    pub d_min: T,
    pub d_max: T,
    pub tau: u64,
    pub formula: Formula,
}

impl<T: Scalar> CurriculumConfig<T> {
    pub fn new(d_min: T, d_max: T, tau: u64, formula: Formula) -> Result<Self> {
        let hundred = T::from_count(100);
        if !(T::zero() <= d_min && d_min <= d_max && d_max <= hundred) {
            return Err(Error::Config(format!(
                "need 0 <= d_min <= d_max <= 100, got d_min={d_min:?} d_max={d_max:?}"
            )));
        }
        if tau == 0 {
            return Err(Error::Config("tau must be at least 1".into()));
        }
        Ok(Self {
            d_min,
            d_max,
            tau,
            formula,
        })
    }

    /// Percent of a step's items to drop options from.
    pub fn drop_fraction(&self, t: u64) -> T {
        if self.formula == Formula::Interpolated && t >= self.tau {
            return self.d_min;
        }
        let r = T::ratio(t, self.tau);
        let coeff = match self.formula {
            Formula::Interpolated => self.d_max - self.d_min,
            Formula::AsWritten => self.d_min,
        };
        (self.d_max - coeff * r * r)
            .max_of(self.d_min)
            .min_of(self.d_max)
    }
}

impl<T: Scalar> Default for CurriculumConfig<T> {
    /// `d_min = 0`, `d_max = 100`, `tau = 670`, interpolated.
    fn default() -> Self {
        Self {
            d_min: T::zero(),
            d_max: T::from_count(100),
            tau: 670,
            formula: Formula::Interpolated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub sample_id: String,
    pub dropped: bool,
}

/// One line of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEntry {
    pub step: u64,
    /// Percent.
    pub drop_fraction: f64,
    pub items: Vec<ManifestItem>,
}

impl StepEntry {
    pub fn dropped(&self) -> usize {
        self.items.iter().filter(|i| i.dropped).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub d_min: f64,
    pub d_max: f64,
    pub tau: u64,
    pub formula: Formula,
}

/// Trainer settings carried along for the consumer; nothing here reads them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSetup {
    pub base_model: String,
    pub precision: String,
    pub optimizer: String,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub decay_type: String,
    pub warmup_steps: u64,
    pub global_batch_size: u64,
    pub random_seed: u64,
    pub max_steps: u64,
}

impl Default for TrainingSetup {
    fn default() -> Self {
        Self {
            base_model: "Qwen2-VL-2B".into(),
            precision: "bfloat16".into(),
            optimizer: "AdamW".into(),
            learning_rate: 2e-5,
            weight_decay: 0.1,
            decay_type: "linear".into(),
            warmup_steps: 100,
            global_batch_size: 256,
            random_seed: 42,
            max_steps: 2500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestMeta {
    pub config: ConfigEcho,
    pub total_steps: u64,
    pub batch_size: usize,
    pub seed: u64,
    pub dataset_size: usize,
    pub training: TrainingSetup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumManifest {
    pub meta: ManifestMeta,
    pub steps: Vec<StepEntry>,
}

/// Lazily generated step entries.
///
/// Batches walk a fresh seeded permutation of the dataset each epoch; step `t`
/// covers stream positions `t*B .. (t+1)*B`, wrapping into the next epoch.
pub struct ManifestSteps<'a, T> {
    ids: Vec<&'a str>,
    cfg: CurriculumConfig<T>,
    total_steps: u64,
    batch_size: usize,
    seed: u64,
    step: u64,
    epoch: Option<(u64, Vec<usize>)>,
}

impl<'a, T: Scalar> ManifestSteps<'a, T> {
    fn epoch_order(&mut self, epoch: u64) -> &[usize] {
        if self.epoch.as_ref().map(|(e, _)| *e) != Some(epoch) {
            let mut order: Vec<usize> = (0..self.ids.len()).collect();
            order.shuffle(&mut rng::keyed(self.seed, "epoch", &[&epoch.to_string()]));
            self.epoch = Some((epoch, order));
        }
        &self.epoch.as_ref().expect("epoch cached").1
    }
}

impl<'a, T: Scalar> Iterator for ManifestSteps<'a, T> {
    type Item = StepEntry;

    fn next(&mut self) -> Option<StepEntry> {
        if self.step >= self.total_steps {
            return None;
        }
        let t = self.step;
        self.step += 1;
        let x = self.cfg.drop_fraction(t).to_f64_lossy();
        let n = self.ids.len() as u64;
        let step_key = t.to_string();
        let items = (0..self.batch_size as u64)
            .map(|j| {
                let pos = t * self.batch_size as u64 + j;
                let idx = self.epoch_order(pos / n)[(pos % n) as usize];
                let sample_id = self.ids[idx];
                let u: f64 = rng::keyed(self.seed, "drop", &[&step_key, sample_id]).random();
                ManifestItem {
                    sample_id: sample_id.to_string(),
                    dropped: u * 100.0 < x,
                }
            })
            .collect();
        Some(StepEntry {
            step: t,
            drop_fraction: x,
            items,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.total_steps - self.step) as usize;
        (left, Some(left))
    }
}

fn check_inputs(ds: &McqaDataset, total_steps: u64, batch_size: usize) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::Precondition(
            "cannot schedule an empty dataset".into(),
        ));
    }
    if total_steps == 0 || batch_size == 0 {
        return Err(Error::Precondition(
            "steps and batch size must be at least 1".into(),
        ));
    }
    Ok(())
}

pub fn manifest_steps<'a, T: Scalar>(
    ds: &'a McqaDataset,
    cfg: &CurriculumConfig<T>,
    total_steps: u64,
    batch_size: usize,
    seed: u64,
) -> Result<ManifestSteps<'a, T>> {
    check_inputs(ds, total_steps, batch_size)?;
    Ok(ManifestSteps {
        ids: ds.iter().map(|i| i.sample_id.as_str()).collect(),
        cfg: *cfg,
        total_steps,
        batch_size,
        seed,
        step: 0,
        epoch: None,
    })
}

pub fn manifest_meta<T: Scalar>(
    ds: &McqaDataset,
    cfg: &CurriculumConfig<T>,
    total_steps: u64,
    batch_size: usize,
    seed: u64,
) -> ManifestMeta {
    ManifestMeta {
        config: ConfigEcho {
            d_min: cfg.d_min.to_f64_lossy(),
            d_max: cfg.d_max.to_f64_lossy(),
            tau: cfg.tau,
            formula: cfg.formula,
        },
        total_steps,
        batch_size,
        seed,
        dataset_size: ds.len(),
        training: TrainingSetup::default(),
    }
}

pub fn make_manifest<T: Scalar>(
    ds: &McqaDataset,
    cfg: &CurriculumConfig<T>,
    total_steps: u64,
    batch_size: usize,
    seed: u64,
) -> Result<CurriculumManifest> {
    let steps = manifest_steps(ds, cfg, total_steps, batch_size, seed)?.collect();
    Ok(CurriculumManifest {
        meta: manifest_meta(ds, cfg, total_steps, batch_size, seed),
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Exact;

    #[test]
    fn interpolated_endpoints() {
        let cfg = CurriculumConfig::<Exact>::default();
        assert_eq!(cfg.drop_fraction(0), Exact::from_integer(100));
        assert_eq!(cfg.drop_fraction(335), Exact::from_integer(75));
        assert_eq!(cfg.drop_fraction(670), Exact::from_integer(0));
        assert_eq!(cfg.drop_fraction(10_000), Exact::from_integer(0));
    }

    #[test]
    fn as_written_with_zero_floor_is_flat() {
        let cfg = CurriculumConfig::<f64> {
            formula: Formula::AsWritten,
            ..Default::default()
        };
        assert!((0..3000).all(|t| cfg.drop_fraction(t) == 100.0));
    }

    #[test]
    fn as_written_with_positive_floor_decays() {
        let cfg = CurriculumConfig::<f64>::new(40.0, 100.0, 100, Formula::AsWritten).unwrap();
        assert_eq!(cfg.drop_fraction(50), 90.0);
        assert_eq!(cfg.drop_fraction(100), 60.0);
        assert_eq!(cfg.drop_fraction(1000), 40.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(CurriculumConfig::<f64>::new(50.0, 40.0, 10, Formula::Interpolated).is_err());
        assert!(CurriculumConfig::<f64>::new(0.0, 120.0, 10, Formula::Interpolated).is_err());
        assert!(CurriculumConfig::<f64>::new(0.0, 100.0, 0, Formula::Interpolated).is_err());
    }
}
