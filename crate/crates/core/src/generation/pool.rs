use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::rewrite::templatize;
use crate::dataset::ManeuverLabel;

/// Stage I result for one sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage1Output {
    pub sample_id: String,
    pub agent_id: String,
    pub video_ref: String,
    pub label: ManeuverLabel,
    pub question: String,
    pub gt_answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub sample_id: String,
    /// Ground-truth answer with the agent id replaced by the placeholder.
    pub text: String,
}

/// Ground-truth answers grouped by label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnswerPool {
    buckets: BTreeMap<ManeuverLabel, Vec<PoolEntry>>,
}

impl AnswerPool {
    pub fn bucket(&self, label: ManeuverLabel) -> &[PoolEntry] {
        self.buckets.get(&label).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn labels(&self) -> impl Iterator<Item = ManeuverLabel> + '_ {
        self.buckets.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.buckets.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }
}

pub fn build_answer_pool<'a>(stage1: impl IntoIterator<Item = &'a Stage1Output>) -> AnswerPool {
    let mut buckets: BTreeMap<ManeuverLabel, Vec<PoolEntry>> = BTreeMap::new();
    for out in stage1 {
        buckets.entry(out.label).or_default().push(PoolEntry {
            sample_id: out.sample_id.clone(),
            text: templatize(&out.gt_answer, &out.agent_id),
        });
    }
    AnswerPool { buckets }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn out(id: &str, agent: &str, label: ManeuverLabel, answer: &str) -> Stage1Output {
        Stage1Output {
            sample_id: id.into(),
            agent_id: agent.into(),
            video_ref: String::new(),
            label,
            question: String::new(),
            gt_answer: answer.into(),
        }
    }

    #[test]
    fn keys_are_exactly_the_present_labels() {
        use ManeuverLabel::*;
        let outs = [
            out("a", "1", Turning, "Agent 1 turns."),
            out("b", "2", Turning, "Agent 2 turns."),
            out("c", "3", Stopped, "Agent 3 stops."),
        ];
        let pool = build_answer_pool(&outs);
        assert_eq!(pool.labels().collect::<Vec<_>>(), vec![Turning, Stopped]);
        assert_eq!(pool.bucket(Turning).len(), 2);
        assert_eq!(pool.bucket(Stopped).len(), 1);
        assert!(pool.bucket(UTurn).is_empty());
    }

    #[test]
    fn identifiers_become_placeholders() {
        let pool = build_answer_pool(&[out(
            "a",
            "42",
            ManeuverLabel::Turning,
            "vehicle 42 is turning",
        )]);
        assert_eq!(
            pool.bucket(ManeuverLabel::Turning)[0].text,
            "vehicle ⟨AGENT⟩ is turning"
        );
    }
}
