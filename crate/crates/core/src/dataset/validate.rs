use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use super::{
    label_distribution, BaseDataset, ManeuverLabel, McqaDataset, McqaInstance, OptionOrigin,
    Partition, UniformityTest, Variant,
};
use crate::Result;

/// Significance level of the correct-position uniformity test.
pub const ALPHA: f64 = 0.01;

/// Minimum expected count per position before the chi-square test is applied.
const MIN_EXPECTED_PER_CELL: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub sample_id: String,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub kind: &'static str,
    pub n_samples: usize,
    pub position_counts: Vec<u64>,
    pub chi_square: Option<f64>,
    pub p_value: Option<f64>,
    /// `pass`, `fail`, `insufficient_data`, or `not_applicable`.
    pub uniformity: &'static str,
    pub label_fractions: BTreeMap<ManeuverLabel, f64>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn violation(sample_id: &str, rule: &str) -> Violation {
    Violation {
        sample_id: sample_id.to_string(),
        rule: rule.to_string(),
    }
}

/// Every per-instance rule broken by `inst`, given the dataset-wide option count.
pub fn instance_violations(inst: &McqaInstance, expected_k: usize) -> Vec<Violation> {
    let id = inst.sample_id.as_str();
    let mut out = Vec::new();
    let k = inst.k();
    if k < 2 {
        out.push(violation(id, "k_at_least_two"));
    }
    if k != expected_k {
        out.push(violation(id, "option_count"));
    }
    let n_correct = inst.options.iter().filter(|o| o.is_correct).count();
    if n_correct != 1 {
        out.push(violation(id, "single_correct"));
    }
    if !inst
        .options
        .get(inst.correct_index)
        .is_some_and(|o| o.is_correct)
    {
        out.push(violation(id, "correct_index"));
    }
    let mut texts = HashSet::new();
    if !inst.options.iter().all(|o| texts.insert(o.text.as_str())) {
        out.push(violation(id, "distinct_texts"));
    }
    let correct_label = inst.correct_label();
    for opt in &inst.options {
        if opt.is_correct
            && (opt.origin != OptionOrigin::Stage1Gt || opt.source_sample_id != inst.sample_id)
        {
            out.push(violation(id, "correct_provenance"));
        }
        if opt.origin == OptionOrigin::PoolDistractor
            && (opt.source_sample_id == inst.sample_id || Some(opt.source_label) == correct_label)
        {
            out.push(violation(id, "pool_provenance"));
        }
        if !opt.is_correct
            && opt.source_sample_id == inst.sample_id
            && inst.variant == Variant::Debiased
        {
            out.push(violation(id, "self_sourced_distractor"));
        }
    }
    if inst.variant == Variant::Debiased {
        let mut labels = HashSet::new();
        let distinct = inst
            .options
            .iter()
            .filter(|o| !o.is_correct)
            .all(|o| labels.insert(o.source_label));
        if !distinct {
            out.push(violation(id, "distinct_distractor_labels"));
        }
    }
    if Partition::of(inst).is_err() {
        out.push(violation(id, "sentinel_both_sides"));
    }
    out
}

pub fn validate_mcqa(ds: &McqaDataset) -> Result<ValidationReport> {
    let n = ds.len();
    let expected_k = ds.iter().next().map(McqaInstance::k).unwrap_or(0);
    let mut violations: Vec<Violation> = ds
        .iter()
        .flat_map(|i| instance_violations(i, expected_k))
        .collect();

    let mut counts = vec![0u64; expected_k];
    for inst in ds {
        if inst.k() == expected_k && inst.correct_index < expected_k {
            counts[inst.correct_index] += 1;
        }
    }
    let (chi_square, p_value, uniformity) = if n == 0 {
        (None, None, "insufficient_data")
    } else {
        let test = UniformityTest::<f64>::from_counts(counts.clone());
        let verdict = if n < MIN_EXPECTED_PER_CELL * expected_k {
            "insufficient_data"
        } else if test.passes(ALPHA) {
            "pass"
        } else {
            violations.push(violation("*", "position_uniformity"));
            "fail"
        };
        (Some(test.chi_square), Some(test.p_value), verdict)
    };
    let label_fractions = if n == 0 {
        BTreeMap::new()
    } else {
        label_distribution::<f64, _>(ds)?
    };
    Ok(ValidationReport {
        kind: "mcqa",
        n_samples: n,
        position_counts: counts,
        chi_square,
        p_value,
        uniformity,
        label_fractions,
        violations,
    })
}

pub fn validate_base(ds: &BaseDataset) -> Result<ValidationReport> {
    let mut violations = Vec::new();
    for s in ds {
        // the sentinel is reserved for relabeled hidden agents
        if s.agent_visible && s.label == ManeuverLabel::AgentNotVisible {
            violations.push(violation(&s.sample_id, "visible_with_sentinel"));
        }
        if s.agent_id.is_empty() || !s.agent_id.chars().all(|c| c.is_ascii_digit()) {
            violations.push(violation(&s.sample_id, "agent_id_numeric"));
        }
    }
    let label_fractions = if ds.is_empty() {
        BTreeMap::new()
    } else {
        label_distribution::<f64, _>(ds)?
    };
    Ok(ValidationReport {
        kind: "base",
        n_samples: ds.len(),
        position_counts: Vec::new(),
        chi_square: None,
        p_value: None,
        uniformity: "not_applicable",
        label_fractions,
        violations,
    })
}
