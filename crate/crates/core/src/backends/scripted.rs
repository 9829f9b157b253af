use rand::Rng;

use super::{Evaluator, Mode};
use crate::dataset::{option_letter, McqaInstance};
use crate::{rng, Result};

/// Deterministic probes for exercising the audit harness.
///
/// None of them read the clip reference, so full and blind modes agree.
/// Random choices are keyed by the seed, the sample id and the presented
/// option order, so each reordering of an item is an independent draw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scripted {
    /// Always right; reads option provenance.
    Oracle,
    FixedPosition(usize),
    LongestOption,
    /// Picks the odd one out with respect to `marker`: the only marked option,
    /// or the only unmarked one. Random otherwise.
    MarkerSeeker {
        marker: String,
        seed: u64,
    },
    UniformRandom {
        seed: u64,
    },
    /// Picks the "agent not visible" option when offered, random otherwise.
    AbsenceDefault {
        seed: u64,
    },
}

impl Scripted {
    pub fn id(&self) -> String {
        match self {
            Scripted::Oracle => "oracle".into(),
            Scripted::FixedPosition(j) => format!("fixed_position({j})"),
            Scripted::LongestOption => "longest_option".into(),
            Scripted::MarkerSeeker { marker, seed } => format!("marker_seeker({marker},{seed})"),
            Scripted::UniformRandom { seed } => format!("uniform_random({seed})"),
            Scripted::AbsenceDefault { seed } => format!("absence_default({seed})"),
        }
    }

    pub fn choose(&self, item: &McqaInstance) -> usize {
        match self {
            Scripted::Oracle => item.correct_index,
            Scripted::FixedPosition(j) => *j,
            Scripted::LongestOption => item
                .options
                .iter()
                .enumerate()
                .max_by(|(ia, a), (ib, b)| {
                    a.text
                        .chars()
                        .count()
                        .cmp(&b.text.chars().count())
                        .then(ib.cmp(ia))
                })
                .map(|(i, _)| i)
                .unwrap_or(0),
            Scripted::MarkerSeeker { marker, seed } => {
                let needle = marker.to_lowercase();
                let marked: Vec<usize> = item
                    .options
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| o.text.to_lowercase().contains(&needle))
                    .map(|(i, _)| i)
                    .collect();
                let k = item.k();
                if marked.len() == 1 {
                    marked[0]
                } else if marked.len() + 1 == k {
                    (0..k)
                        .find(|i| !marked.contains(i))
                        .expect("one unmarked option")
                } else {
                    random_index(*seed, "marker_seeker", item)
                }
            }
            Scripted::UniformRandom { seed } => random_index(*seed, "uniform_random", item),
            Scripted::AbsenceDefault { seed } => item
                .options
                .iter()
                .position(|o| o.source_label.is_sentinel())
                .unwrap_or_else(|| random_index(*seed, "absence_default", item)),
        }
    }
}

fn random_index(seed: u64, domain: &str, item: &McqaInstance) -> usize {
    let order: Vec<&str> = item.options.iter().map(|o| o.text.as_str()).collect();
    let order = order.join("\u{1f}");
    rng::keyed(seed, domain, &[&item.sample_id, &order]).random_range(0..item.k().max(1))
}

impl Evaluator for Scripted {
    fn id(&self) -> String {
        Scripted::id(self)
    }

    fn respond(&self, item: &McqaInstance, _mode: Mode) -> Result<String> {
        Ok(option_letter(self.choose(item)).to_string())
    }
}
