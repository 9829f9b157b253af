//! Evaluators answer multiple-choice items, with or without the clip.

mod http;
mod scripted;

pub use http::{HttpEvaluator, EVAL_SYSTEM_PROMPT};
pub use scripted::Scripted;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{option_letter, McqaInstance};
use crate::endpoint::EndpointConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Question, options and clip.
    Full,
    /// Question and options only.
    Blind,
}

/// A parsed choice. Unparseable answers are kept distinct, never coerced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Choice {
    Index(usize),
    Unparseable,
}

impl Choice {
    pub fn index(self) -> Option<usize> {
        match self {
            Choice::Index(i) => Some(i),
            Choice::Unparseable => None,
        }
    }
}

impl Serialize for Choice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Choice::Index(i) => s.serialize_u64(*i as u64),
            Choice::Unparseable => s.serialize_str("UNPARSEABLE"),
        }
    }
}

impl<'de> Deserialize<'de> for Choice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Index(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Index(i) => Ok(Choice::Index(i)),
            Raw::Text(t) if t == "UNPARSEABLE" => Ok(Choice::Unparseable),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid choice `{t}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceResult {
    pub chosen_index: Choice,
    pub raw_text: String,
    pub mode: Mode,
    /// Transport failure that exhausted the retry budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Parse a reply that starts with an option letter.
///
/// Accepts `B`, `b`, `(c).`, `A) the vehicle turns`: an optional opening
/// parenthesis, one letter within the first `k`, then end of text or any
/// non-alphanumeric character. Everything else is unparseable.
pub fn parse_choice(raw: &str, k: usize) -> Choice {
    let mut chars = raw.trim_start().chars().peekable();
    if chars.peek() == Some(&'(') {
        chars.next();
    }
    let Some(letter) = chars.next() else {
        return Choice::Unparseable;
    };
    if !letter.is_ascii_alphabetic() {
        return Choice::Unparseable;
    }
    let index = (letter.to_ascii_uppercase() as u8 - b'A') as usize;
    if index >= k {
        return Choice::Unparseable;
    }
    match chars.next() {
        None => Choice::Index(index),
        Some(next) if !next.is_alphanumeric() => Choice::Index(index),
        Some(_) => Choice::Unparseable,
    }
}

/// Render an item as the text shown to a model.
pub fn render_prompt(inst: &McqaInstance) -> String {
    let mut out = inst.question.clone();
    out.push('\n');
    for (i, opt) in inst.options.iter().enumerate() {
        out.push_str(&format!("\n{}. {}", option_letter(i), opt.text));
    }
    out.push_str("\n\nAnswer with the letter of the correct option.");
    out
}

pub trait Evaluator: Send + Sync {
    fn id(&self) -> String;

    /// Raw reply for one presentation of `item`. Transport failures are
    /// returned only once the backend's own retry budget is spent.
    fn respond(&self, item: &McqaInstance, mode: Mode) -> Result<String>;

    /// Concurrent in-flight requests this backend tolerates.
    fn max_parallel(&self) -> usize {
        usize::MAX
    }
}

/// Ask `backend` about `item` and parse the reply.
pub fn answer_mcq(item: &McqaInstance, backend: &dyn Evaluator, mode: Mode) -> ChoiceResult {
    match backend.respond(item, mode) {
        Ok(raw_text) => ChoiceResult {
            chosen_index: parse_choice(&raw_text, item.k()),
            raw_text,
            mode,
            failure: None,
        },
        Err(e) => ChoiceResult {
            chosen_index: Choice::Unparseable,
            raw_text: String::new(),
            mode,
            failure: Some(e.to_string()),
        },
    }
}

/// Textual backend selector, e.g. `oracle`, `fixed:2`, `marker:notably`, `random:7`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Http,
    Scripted(Scripted),
}

impl BackendSpec {
    /// Parse a selector; scripted kinds without an explicit seed use `default_seed`.
    pub fn parse(spec: &str, default_seed: u64) -> Result<Self> {
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (spec, None),
        };
        let seed = || -> Result<u64> {
            arg.map(|a| {
                a.parse()
                    .map_err(|_| Error::Config(format!("invalid seed in backend `{spec}`")))
            })
            .unwrap_or(Ok(default_seed))
        };
        let scripted = match name {
            "http" => return Ok(BackendSpec::Http),
            "oracle" => Scripted::Oracle,
            "fixed" | "fixed_position" => {
                let j = arg.and_then(|a| a.parse().ok()).ok_or_else(|| {
                    Error::Config(format!("`{spec}` needs a position, e.g. fixed:0"))
                })?;
                Scripted::FixedPosition(j)
            }
            "longest" | "longest_option" => Scripted::LongestOption,
            "marker" | "marker_seeker" => Scripted::MarkerSeeker {
                marker: arg
                    .filter(|a| !a.is_empty())
                    .ok_or_else(|| {
                        Error::Config(format!("`{spec}` needs a marker, e.g. marker:notably"))
                    })?
                    .to_string(),
                seed: default_seed,
            },
            "random" | "uniform_random" => Scripted::UniformRandom { seed: seed()? },
            "absence" | "absence-default" | "absence_default" => {
                Scripted::AbsenceDefault { seed: seed()? }
            }
            other => return Err(Error::Config(format!("unknown backend `{other}`"))),
        };
        Ok(BackendSpec::Scripted(scripted))
    }

    pub fn build(self, endpoint: Option<EndpointConfig>) -> Result<Box<dyn Evaluator>> {
        match self {
            BackendSpec::Scripted(s) => Ok(Box::new(s)),
            BackendSpec::Http => Ok(Box::new(HttpEvaluator::new(endpoint.unwrap_or_default())?)),
        }
    }
}

impl FromStr for BackendSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BackendSpec::parse(s, 0)
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Http => f.write_str("http"),
            BackendSpec::Scripted(s) => f.write_str(&s.id()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn letter_grammar() {
        assert_eq!(parse_choice("B", 4), Choice::Index(1));
        assert_eq!(parse_choice("(c).", 4), Choice::Index(2));
        assert_eq!(parse_choice("A) the vehicle turns", 4), Choice::Index(0));
        assert_eq!(parse_choice("  d", 4), Choice::Index(3));
        assert_eq!(
            parse_choice("The answer is unclear", 4),
            Choice::Unparseable
        );
        assert_eq!(parse_choice("E", 4), Choice::Unparseable);
        assert_eq!(parse_choice("Apparently B", 4), Choice::Unparseable);
        assert_eq!(parse_choice("", 4), Choice::Unparseable);
        assert_eq!(parse_choice("1", 4), Choice::Unparseable);
        assert_eq!(parse_choice("C", 2), Choice::Unparseable);
    }

    #[test]
    fn choice_serialization() {
        assert_eq!(serde_json::to_string(&Choice::Index(2)).unwrap(), "2");
        assert_eq!(
            serde_json::to_string(&Choice::Unparseable).unwrap(),
            "\"UNPARSEABLE\""
        );
        let back: Choice = serde_json::from_str("\"UNPARSEABLE\"").unwrap();
        assert_eq!(back, Choice::Unparseable);
        assert_eq!(
            serde_json::from_str::<Choice>("3").unwrap(),
            Choice::Index(3)
        );
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(
            BackendSpec::parse("fixed:2", 0).unwrap(),
            BackendSpec::Scripted(Scripted::FixedPosition(2))
        );
        assert_eq!(
            BackendSpec::parse("random", 9).unwrap(),
            BackendSpec::Scripted(Scripted::UniformRandom { seed: 9 })
        );
        assert_eq!(
            BackendSpec::parse("marker:notably", 4).unwrap(),
            BackendSpec::Scripted(Scripted::MarkerSeeker {
                marker: "notably".into(),
                seed: 4
            })
        );
        assert_eq!(BackendSpec::parse("http", 0).unwrap(), BackendSpec::Http);
        assert!(BackendSpec::parse("fixed", 0).is_err());
        assert!(BackendSpec::parse("gpt", 0).is_err());
    }
}
