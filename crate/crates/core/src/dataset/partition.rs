use serde::{Deserialize, Serialize};

use super::{McqaDataset, McqaInstance};
use crate::{Error, Result};

/// Where the "agent not visible" option sits in an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Partition {
    /// The sentinel is the correct answer.
    #[serde(rename = "D_NV")]
    NotVisibleCorrect,
    /// The sentinel is offered as a distractor.
    #[serde(rename = "D_N")]
    NotVisibleDistractor,
    /// The sentinel is not offered.
    #[serde(rename = "D_V")]
    NotVisibleAbsent,
}

impl Partition {
    pub const ALL: [Partition; 3] = [
        Partition::NotVisibleCorrect,
        Partition::NotVisibleDistractor,
        Partition::NotVisibleAbsent,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Partition::NotVisibleCorrect => "D_NV",
            Partition::NotVisibleDistractor => "D_N",
            Partition::NotVisibleAbsent => "D_V",
        }
    }

    /// Membership is decided from option provenance, never from option text.
    pub fn of(inst: &McqaInstance) -> Result<Partition> {
        let mut correct = false;
        let mut distractor = false;
        for opt in inst.options.iter().filter(|o| o.source_label.is_sentinel()) {
            if opt.is_correct {
                correct = true;
            } else {
                distractor = true;
            }
        }
        match (correct, distractor) {
            (true, true) => Err(Error::Integrity(format!(
                "instance `{}` offers the sentinel both as answer and distractor",
                inst.sample_id
            ))),
            (true, false) => Ok(Partition::NotVisibleCorrect),
            (false, true) => Ok(Partition::NotVisibleDistractor),
            (false, false) => Ok(Partition::NotVisibleAbsent),
        }
    }
}

/// Indices into the source dataset for each partition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Partitions {
    pub not_visible_correct: Vec<usize>,
    pub not_visible_distractor: Vec<usize>,
    pub not_visible_absent: Vec<usize>,
}

impl Partitions {
    pub fn get(&self, part: Partition) -> &[usize] {
        match part {
            Partition::NotVisibleCorrect => &self.not_visible_correct,
            Partition::NotVisibleDistractor => &self.not_visible_distractor,
            Partition::NotVisibleAbsent => &self.not_visible_absent,
        }
    }

    pub fn total(&self) -> usize {
        Partition::ALL.iter().map(|&p| self.get(p).len()).sum()
    }
}

pub fn partition_by_visibility(ds: &McqaDataset) -> Result<Partitions> {
    let mut parts = Partitions::default();
    for (idx, inst) in ds.iter().enumerate() {
        match Partition::of(inst)? {
            Partition::NotVisibleCorrect => parts.not_visible_correct.push(idx),
            Partition::NotVisibleDistractor => parts.not_visible_distractor.push(idx),
            Partition::NotVisibleAbsent => parts.not_visible_absent.push(idx),
        }
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AnswerOption, ManeuverLabel, OptionOrigin, Variant};

    fn inst(labels: &[ManeuverLabel], correct: usize) -> McqaInstance {
        let options = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| AnswerOption {
                // text deliberately never mentions visibility
                text: format!("option {i}"),
                source_label: l,
                source_sample_id: if i == correct {
                    "x".into()
                } else {
                    format!("o{i}")
                },
                is_correct: i == correct,
                origin: if i == correct {
                    OptionOrigin::Stage1Gt
                } else {
                    OptionOrigin::PoolDistractor
                },
            })
            .collect();
        McqaInstance {
            sample_id: "x".into(),
            question: "q".into(),
            video_ref: "v".into(),
            options,
            correct_index: correct,
            variant: Variant::Debiased,
            generation_seed: 0,
        }
    }

    use ManeuverLabel::*;

    #[test]
    fn correct_sentinel_is_nv() {
        let i = inst(&[AgentNotVisible, Turning, Stopped, UTurn], 0);
        assert_eq!(Partition::of(&i).unwrap(), Partition::NotVisibleCorrect);
    }

    #[test]
    fn distractor_sentinel_is_n() {
        let i = inst(&[Turning, Stopped, AgentNotVisible, UTurn], 0);
        assert_eq!(Partition::of(&i).unwrap(), Partition::NotVisibleDistractor);
    }

    #[test]
    fn absent_sentinel_is_v() {
        let i = inst(&[Turning, Stopped, Straight, UTurn], 2);
        assert_eq!(Partition::of(&i).unwrap(), Partition::NotVisibleAbsent);
    }

    #[test]
    fn text_mentioning_absence_does_not_matter() {
        let mut i = inst(&[Turning, Stopped, Straight, UTurn], 0);
        i.options[1].text = "The agent is not visible in the scene".into();
        assert_eq!(Partition::of(&i).unwrap(), Partition::NotVisibleAbsent);
    }

    #[test]
    fn sentinel_on_both_sides_is_integrity_error() {
        let i = inst(&[AgentNotVisible, AgentNotVisible, Straight, UTurn], 0);
        assert!(matches!(Partition::of(&i), Err(Error::Integrity(_))));
    }
}
