use super::{render_prompt, Evaluator, Mode};
use crate::dataset::McqaInstance;
use crate::endpoint::{Attachment, BlindInput, ChatClient, EndpointConfig};
use crate::{Error, Result};

/// Default evaluation instruction. Documented default, tune per model.
pub const EVAL_SYSTEM_PROMPT: &str = "You are an expert driving analyst. You are shown a question \
about a driving scene and a set of lettered answer options. Reply with the letter of the single \
correct option and nothing else.";

#[derive(Debug)]
pub struct HttpEvaluator {
    client: ChatClient,
    pub system_prompt: String,
}

impl HttpEvaluator {
    pub fn new(config: EndpointConfig) -> Result<Self> {
        Ok(Self {
            client: ChatClient::new(config)?,
            system_prompt: EVAL_SYSTEM_PROMPT.to_string(),
        })
    }

    pub fn attachment<'a>(&self, item: &'a McqaInstance, mode: Mode) -> Attachment<'a> {
        let cfg = self.client.config();
        match mode {
            Mode::Full if cfg.supports_video => Attachment::Video(&item.video_ref),
            Mode::Full => Attachment::None,
            Mode::Blind => match cfg.blind_input {
                BlindInput::Omit => Attachment::None,
                BlindInput::ZeroFrame => Attachment::ZeroFrame,
            },
        }
    }
}

impl Evaluator for HttpEvaluator {
    fn id(&self) -> String {
        format!("http:{}", self.client.config().model)
    }

    fn respond(&self, item: &McqaInstance, mode: Mode) -> Result<String> {
        let body = self.client.request_body(
            &self.system_prompt,
            &render_prompt(item),
            &self.attachment(item, mode),
        );
        let outcome = self.client.complete(&body);
        outcome
            .result
            .map_err(|e| Error::Transport(format!("{e} (after {} attempts)", outcome.attempts)))
    }

    fn max_parallel(&self) -> usize {
        self.client.config().max_parallel.max(1)
    }
}
