//! Chat-completion-compatible HTTP transport shared by the remote expert and
//! the remote evaluator.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{Error, Result};

/// 8×1 black PNG sent in place of video for zero-frame blind runs.
pub const ZERO_FRAME_DATA_URL: &str =
    "data:image/png;base64,iVBORw0KGgoAAAANSUhEUgAAAAgAAAABCAIAAABsYngUAAAADElEQVR4nGNgGB4AAADIAAGtQHYiAAAAAElFTkSuQmCC";

/// How blind requests fill the visual slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlindInput {
    /// Send no visual attachment at all.
    #[default]
    Omit,
    /// Send a single all-black frame, for endpoints that require an image.
    ZeroFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer key.
    pub key_env: String,
    pub max_parallel: usize,
    /// Attempts after the first one.
    pub retries: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    /// Whether the endpoint accepts `video_url` content parts.
    pub supports_video: bool,
    pub blind_input: BlindInput,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: "default".into(),
            key_env: "FORGE_API_KEY".into(),
            max_parallel: 4,
            retries: 3,
            backoff_ms: 500,
            timeout_secs: 120,
            supports_video: false,
            blind_input: BlindInput::Omit,
        }
    }
}

/// What to attach alongside the text prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Attachment<'a> {
    None,
    Video(&'a str),
    ZeroFrame,
}

#[derive(Debug)]
pub struct ChatClient {
    config: EndpointConfig,
    http: reqwest::blocking::Client,
    api_key: Option<String>,
}

/// Outcome of a call that may have been retried.
#[derive(Debug, Clone, PartialEq)]
pub struct CallOutcome {
    pub result: std::result::Result<String, String>,
    pub attempts: u32,
}

impl ChatClient {
    pub fn new(config: EndpointConfig) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        let api_key = std::env::var(&config.key_env).ok();
        Ok(Self {
            config,
            http,
            api_key,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn url(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }

    pub fn request_body(&self, system: &str, user: &str, attachment: &Attachment<'_>) -> Value {
        let mut content = vec![json!({"type": "text", "text": user})];
        match attachment {
            Attachment::None => {}
            Attachment::Video(url) => {
                content.push(json!({"type": "video_url", "video_url": {"url": url}}))
            }
            Attachment::ZeroFrame => content
                .push(json!({"type": "image_url", "image_url": {"url": ZERO_FRAME_DATA_URL}})),
        }
        json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": content},
            ],
            // greedy decoding
            "temperature": 0,
            "top_p": 1,
            "n": 1,
        })
    }

    /// One POST; returns the first choice's message content.
    pub fn complete_once(&self, body: &Value) -> Result<String> {
        let mut req = self.http.post(self.url()).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Error::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Error::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(Error::Transport(format!(
                "HTTP {status}: {}",
                truncate(&text, 200)
            )));
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Transport(format!("malformed response: {e}")))?;
        extract_content(&value)
            .ok_or_else(|| Error::Transport("response has no message content".into()))
    }

    /// Retry transport failures with exponential backoff until the budget runs out.
    pub fn complete(&self, body: &Value) -> CallOutcome {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.complete_once(body) {
                Ok(text) => {
                    return CallOutcome {
                        result: Ok(text),
                        attempts,
                    }
                }
                Err(e) if e.is_retryable() && attempts <= self.config.retries => {
                    let wait = self
                        .config
                        .backoff_ms
                        .saturating_mul(1 << (attempts - 1).min(16));
                    std::thread::sleep(Duration::from_millis(wait));
                }
                Err(e) => {
                    return CallOutcome {
                        result: Err(e.to_string()),
                        attempts,
                    }
                }
            }
        }
    }
}

fn extract_content(value: &Value) -> Option<String> {
    let content = value
        .get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?;
    match content {
        Value::String(s) => Some(s.clone()),
        // some servers return content parts
        Value::Array(parts) => Some(
            parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect::<Vec<_>>()
                .join(""),
        ),
        _ => None,
    }
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((idx, _)) => &s[..idx],
        None => s,
    }
}

/// Pull the first JSON object or array out of a model reply, tolerating code fences and prose.
pub fn extract_json(reply: &str) -> Option<Value> {
    let start = reply.find(['{', '['])?;
    let open = reply.as_bytes()[start];
    let close = if open == b'{' { '}' } else { ']' };
    let end = reply.rfind(close)?;
    if end < start {
        return None;
    }
    serde_json::from_str(&reply[start..=end]).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_extraction_handles_strings_and_parts() {
        let v = json!({"choices": [{"message": {"content": "B"}}]});
        assert_eq!(extract_content(&v).as_deref(), Some("B"));
        let v = json!({"choices": [{"message": {"content": [{"type": "text", "text": "C."}]}}]});
        assert_eq!(extract_content(&v).as_deref(), Some("C."));
        assert_eq!(extract_content(&json!({"choices": []})), None);
    }

    #[test]
    fn json_is_found_inside_fences() {
        let reply = "```json\n{\"question\": \"q\", \"answer\": \"a\"}\n```";
        assert_eq!(extract_json(reply).unwrap()["answer"], "a");
        assert_eq!(extract_json("[1, 2]").unwrap(), json!([1, 2]));
        assert!(extract_json("no json here").is_none());
    }

    #[test]
    fn blind_body_has_no_visual_part() {
        let client = ChatClient::new(EndpointConfig::default()).unwrap();
        let body = client.request_body("sys", "user", &Attachment::None);
        let s = body.to_string();
        assert!(!s.contains("video_url") && !s.contains("image_url"));
        assert_eq!(body["temperature"], 0);
        let body = client.request_body("sys", "user", &Attachment::ZeroFrame);
        assert!(body.to_string().contains(ZERO_FRAME_DATA_URL));
    }
}
