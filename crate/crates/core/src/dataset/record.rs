use serde::{Deserialize, Serialize};

use super::ManeuverLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One labeled driving clip with a selected target agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseSample {
    pub sample_id: String,
    /// Opaque clip reference; never dereferenced here.
    pub video_ref: String,
    pub agent_id: String,
    pub label: ManeuverLabel,
    pub agent_visible: bool,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionOrigin {
    Stage1Gt,
    LlmDistractor,
    PoolDistractor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub text: String,
    pub source_label: ManeuverLabel,
    pub source_sample_id: String,
    pub is_correct: bool,
    pub origin: OptionOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Llm,
    Debiased,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqaInstance {
    pub sample_id: String,
    pub question: String,
    pub video_ref: String,
    pub options: Vec<AnswerOption>,
    pub correct_index: usize,
    pub variant: Variant,
    pub generation_seed: u64,
}

impl McqaInstance {
    pub fn k(&self) -> usize {
        self.options.len()
    }

    pub fn correct_option(&self) -> Option<&AnswerOption> {
        self.options.get(self.correct_index)
    }

    /// Label of the correct option, from provenance.
    pub fn correct_label(&self) -> Option<ManeuverLabel> {
        self.correct_option().map(|o| o.source_label)
    }

    /// The same instance with options presented in `order`, where `order[j]`
    /// is the current index of the option placed at position `j`.
    pub fn reordered(&self, order: &[usize]) -> McqaInstance {
        debug_assert_eq!(order.len(), self.options.len());
        let options: Vec<AnswerOption> = order.iter().map(|&i| self.options[i].clone()).collect();
        let correct_index = order
            .iter()
            .position(|&i| i == self.correct_index)
            .unwrap_or(self.correct_index);
        McqaInstance {
            options,
            correct_index,
            ..self.clone()
        }
    }
}

/// Letter for option position `index` (`0 → 'A'`).
pub fn option_letter(index: usize) -> char {
    (b'A' + index as u8) as char
}
