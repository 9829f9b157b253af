//! Experts realize labels as text (Stage I) and propose LLM-style distractors.

use rand::seq::SliceRandom;
use serde_json::Value;

use crate::dataset::{BaseSample, ManeuverLabel};
use crate::endpoint::{extract_json, Attachment, ChatClient, EndpointConfig};
use crate::{rng, Error, Result};

/// A question and its ground-truth answer for one sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaPair {
    pub question: String,
    pub answer: String,
}

/// Everything an expert may condition distractor generation on.
#[derive(Debug, Clone)]
pub struct DistractorRequest<'a> {
    pub sample_id: &'a str,
    pub agent_id: &'a str,
    pub label: ManeuverLabel,
    pub question: &'a str,
    pub video_ref: &'a str,
    pub gt_answer: &'a str,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProposedDistractor {
    pub text: String,
    pub label: ManeuverLabel,
}

pub trait Expert: Send + Sync {
    fn id(&self) -> String;

    fn realize(&self, sample: &BaseSample) -> Result<QaPair>;

    fn propose_distractors(
        &self,
        request: &DistractorRequest<'_>,
    ) -> Result<Vec<ProposedDistractor>>;

    /// Whether distractor generation saw the clip (`video`) or only text (`text`).
    fn distractor_conditioning(&self) -> &'static str {
        "text"
    }
}

pub fn question_text(agent_id: &str) -> String {
    format!("What maneuver is agent {agent_id} performing in this clip?")
}

pub fn answer_text(agent_id: &str, label: ManeuverLabel) -> String {
    format!("Agent {agent_id} {}.", label.gloss())
}

/// Deterministic expert: one fixed gloss per label and nothing else.
#[derive(Debug, Clone, Default)]
pub struct TemplateExpert {
    pub seed: u64,
}

impl TemplateExpert {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl Expert for TemplateExpert {
    fn id(&self) -> String {
        "template".into()
    }

    fn realize(&self, sample: &BaseSample) -> Result<QaPair> {
        Ok(QaPair {
            question: question_text(&sample.agent_id),
            answer: answer_text(&sample.agent_id, sample.label),
        })
    }

    /// Glosses of other labels, in a seeded order.
    fn propose_distractors(&self, req: &DistractorRequest<'_>) -> Result<Vec<ProposedDistractor>> {
        let mut labels: Vec<ManeuverLabel> = ManeuverLabel::ALL
            .into_iter()
            .filter(|&l| l != req.label)
            .collect();
        labels.shuffle(&mut rng::keyed(
            self.seed,
            "template-distractors",
            &[req.sample_id],
        ));
        Ok(labels
            .into_iter()
            .take(req.count)
            .map(|label| ProposedDistractor {
                text: answer_text(req.agent_id, label),
                label,
            })
            .collect())
    }
}

/// Template expert whose distractors all carry a stylistic marker that the
/// ground-truth answers never do: a controlled textual shortcut.
#[derive(Debug, Clone)]
pub struct StyledExpert {
    pub inner: TemplateExpert,
    pub marker: String,
}

impl StyledExpert {
    pub const DEFAULT_MARKER: &'static str = "notably";

    pub fn new(marker: impl Into<String>, seed: u64) -> Self {
        Self {
            inner: TemplateExpert::new(seed),
            marker: marker.into(),
        }
    }

    pub fn mark(&self, text: &str) -> String {
        if text.contains(" is ") {
            text.replacen(" is ", &format!(" is {} ", self.marker), 1)
        } else {
            format!("{} ({})", text, self.marker)
        }
    }
}

impl Expert for StyledExpert {
    fn id(&self) -> String {
        format!("styled:{}", self.marker)
    }

    fn realize(&self, sample: &BaseSample) -> Result<QaPair> {
        self.inner.realize(sample)
    }

    fn propose_distractors(&self, req: &DistractorRequest<'_>) -> Result<Vec<ProposedDistractor>> {
        Ok(self
            .inner
            .propose_distractors(req)?
            .into_iter()
            .map(|d| ProposedDistractor {
                text: self.mark(&d.text),
                label: d.label,
            })
            .collect())
    }
}

const STAGE1_SYSTEM: &str =
    "You turn structured driving-scene labels into a multiple-choice question \
and its correct answer. Use only the information in the label; do not add details. Refer to the \
target agent by its numeric id. Reply with JSON: {\"question\": string, \"answer\": string}.";

const STAGE2_SYSTEM: &str = "You write plausible but incorrect answer options for a driving-scene \
multiple-choice question. Each option describes a different maneuver of the same agent. Reply with \
a JSON array of objects {\"label\": string, \"text\": string} where label is one of the listed labels.";

/// Expert backed by a remote chat-completion endpoint.
#[derive(Debug)]
pub struct HttpExpert {
    client: ChatClient,
    /// Attach the clip to distractor requests when the endpoint supports video.
    pub attach_video: bool,
}

impl HttpExpert {
    pub fn new(config: EndpointConfig, attach_video: bool) -> Result<Self> {
        Ok(Self {
            client: ChatClient::new(config)?,
            attach_video,
        })
    }

    fn call(&self, system: &str, user: &str, attachment: Attachment<'_>) -> Result<Value> {
        let body = self.client.request_body(system, user, &attachment);
        let reply = self
            .client
            .complete(&body)
            .result
            .map_err(Error::Transport)?;
        extract_json(&reply).ok_or_else(|| Error::Transport(format!("reply is not JSON: {reply}")))
    }
}

impl Expert for HttpExpert {
    fn id(&self) -> String {
        format!("http:{}", self.client.config().model)
    }

    fn realize(&self, sample: &BaseSample) -> Result<QaPair> {
        let user = format!(
            "Target agent id: {}\nManeuver label: {} (the agent {})",
            sample.agent_id,
            sample.label,
            sample.label.gloss()
        );
        let value = self.call(STAGE1_SYSTEM, &user, Attachment::None)?;
        let field = |name: &str| {
            value
                .get(name)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| Error::Content {
                    sample_id: sample.sample_id.clone(),
                    message: format!("expert reply lacks `{name}`"),
                })
        };
        Ok(QaPair {
            question: field("question")?,
            answer: field("answer")?,
        })
    }

    fn propose_distractors(&self, req: &DistractorRequest<'_>) -> Result<Vec<ProposedDistractor>> {
        let labels: Vec<&str> = ManeuverLabel::ALL
            .iter()
            .filter(|&&l| l != req.label)
            .map(|l| l.as_str())
            .collect();
        let user = format!(
            "Question: {}\nCorrect answer: {}\nWrite {} incorrect options. Allowed labels: {}",
            req.question,
            req.gt_answer,
            req.count,
            labels.join(", ")
        );
        let attachment = if self.attach_video && self.client.config().supports_video {
            Attachment::Video(req.video_ref)
        } else {
            Attachment::None
        };
        let value = self.call(STAGE2_SYSTEM, &user, attachment)?;
        let items = value.as_array().cloned().unwrap_or_default();
        // unusable entries are dropped here; the caller reports any shortfall
        Ok(items
            .iter()
            .filter_map(|item| {
                let text = item.get("text")?.as_str()?.to_string();
                let label = item.get("label")?.as_str()?.parse().ok()?;
                Some(ProposedDistractor { text, label })
            })
            .collect())
    }

    fn distractor_conditioning(&self) -> &'static str {
        if self.attach_video && self.client.config().supports_video {
            "video"
        } else {
            "text"
        }
    }
}
