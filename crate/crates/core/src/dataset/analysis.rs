use std::collections::BTreeMap;

use serde::Serialize;

use super::{BaseDataset, BaseSample, Dataset, ManeuverLabel, McqaDataset, Record};
use crate::scalar::{FloatScalar, Scalar};
use crate::stats::{chi_square_sf, chi_square_uniform};
use crate::{Error, Result};

/// Replace the label of every sample whose target agent is not visible with
/// the sentinel. Visible samples are untouched. Idempotent.
pub fn apply_visibility_relabel(ds: &BaseDataset) -> BaseDataset {
    let records = ds
        .iter()
        .map(|s| {
            if s.agent_visible {
                s.clone()
            } else {
                BaseSample {
                    label: ManeuverLabel::AgentNotVisible,
                    ..s.clone()
                }
            }
        })
        .collect();
    Dataset::new(records).expect("relabeling preserves ids")
}

pub fn label_counts<R: Record>(ds: &Dataset<R>) -> BTreeMap<ManeuverLabel, u64> {
    let mut counts = BTreeMap::new();
    for label in ds.iter().filter_map(Record::label) {
        *counts.entry(label).or_insert(0) += 1;
    }
    counts
}

/// Fraction of samples carrying each label. Labels that never occur are absent.
pub fn label_distribution<T: Scalar, R: Record>(
    ds: &Dataset<R>,
) -> Result<BTreeMap<ManeuverLabel, T>> {
    if ds.is_empty() {
        return Err(Error::Precondition(
            "label distribution of an empty dataset".into(),
        ));
    }
    let counts = label_counts(ds);
    let total: u64 = counts.values().sum();
    Ok(counts
        .into_iter()
        .map(|(label, c)| (label, T::ratio(c, total)))
        .collect())
}

/// Correct-position histogram and its chi-square test against uniform placement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityTest<T> {
    pub counts: Vec<u64>,
    pub chi_square: T,
    pub degrees_of_freedom: usize,
    pub p_value: T,
}

impl<T: FloatScalar> UniformityTest<T> {
    pub fn from_counts(counts: Vec<u64>) -> Self {
        let chi_square = chi_square_uniform::<T>(&counts);
        let degrees_of_freedom = counts.len().saturating_sub(1);
        let p_value = chi_square_sf(chi_square, degrees_of_freedom);
        Self {
            counts,
            chi_square,
            degrees_of_freedom,
            p_value,
        }
    }

    pub fn passes(&self, alpha: T) -> bool {
        self.p_value > alpha
    }
}

pub fn position_uniformity<T: FloatScalar>(ds: &McqaDataset) -> Result<UniformityTest<T>> {
    let first = ds
        .iter()
        .next()
        .ok_or_else(|| Error::Precondition("position uniformity of an empty dataset".into()))?;
    let k = first.k();
    let mut counts = vec![0u64; k];
    for inst in ds {
        if inst.k() != k {
            return Err(Error::Precondition(format!(
                "instance `{}` has {} options, expected {k}",
                inst.sample_id,
                inst.k()
            )));
        }
        if inst.correct_index >= k {
            return Err(Error::Integrity(format!(
                "instance `{}` has correct_index {} out of range",
                inst.sample_id, inst.correct_index
            )));
        }
        counts[inst.correct_index] += 1;
    }
    Ok(UniformityTest::from_counts(counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_synthetic_base, Split};
    use crate::Exact;

    fn sample(id: &str, label: ManeuverLabel, visible: bool) -> BaseSample {
        BaseSample {
            sample_id: id.into(),
            video_ref: format!("bev://{id}"),
            agent_id: "1".into(),
            label,
            agent_visible: visible,
            split: Split::Train,
        }
    }

    #[test]
    fn relabel_identity_and_forced_cases() {
        let ds = Dataset::new(vec![
            sample("v", ManeuverLabel::Turning, true),
            sample("h", ManeuverLabel::Turning, false),
        ])
        .unwrap();
        let out = apply_visibility_relabel(&ds);
        assert_eq!(out.records()[0].label, ManeuverLabel::Turning);
        assert_eq!(out.records()[1].label, ManeuverLabel::AgentNotVisible);
        // input untouched
        assert_eq!(ds.records()[1].label, ManeuverLabel::Turning);
        assert_eq!(apply_visibility_relabel(&out), out);
    }

    #[test]
    fn single_label_distribution() {
        let ds = Dataset::new(
            (0..10)
                .map(|i| sample(&i.to_string(), ManeuverLabel::Turning, true))
                .collect(),
        )
        .unwrap();
        let dist = label_distribution::<f64, _>(&ds).unwrap();
        assert_eq!(dist.len(), 1);
        assert_eq!(dist[&ManeuverLabel::Turning], 1.0);
    }

    #[test]
    fn uniform_base_distribution_is_one_twelfth() {
        let ds = gen_synthetic_base(1200, 0.0, 3);
        let dist = label_distribution::<Exact, _>(&ds).unwrap();
        assert_eq!(dist.len(), 12);
        for frac in dist.values() {
            assert_eq!(*frac, Exact::new(1, 12));
        }
        let float = label_distribution::<f64, _>(&ds).unwrap();
        for frac in float.values() {
            assert!((frac - 0.0833).abs() < 1e-3);
        }
    }

    #[test]
    fn empty_dataset_is_precondition_error() {
        let ds = BaseDataset::empty();
        assert!(matches!(
            label_distribution::<f64, _>(&ds),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            position_uniformity::<f64>(&McqaDataset::empty()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn exact_uniform_counts() {
        let t = UniformityTest::<f64>::from_counts(vec![500, 500, 500, 500]);
        assert_eq!(t.chi_square, 0.0);
        assert_eq!(t.p_value, 1.0);
        assert_eq!(t.degrees_of_freedom, 3);
    }

    #[test]
    fn skewed_counts_fail_at_one_percent() {
        let t = UniformityTest::<f64>::from_counts(vec![600, 400, 500, 500]);
        assert_eq!(t.chi_square, 40.0);
        assert!(!t.passes(0.01));
    }
}
