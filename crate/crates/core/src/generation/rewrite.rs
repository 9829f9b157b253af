use std::sync::OnceLock;

use regex::Regex;

/// Stand-in for the agent identifier inside pooled answers.
pub const AGENT_PLACEHOLDER: &str = "⟨AGENT⟩";

fn numeric_id() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b\d+\b").expect("valid regex"))
}

/// No placeholder and no numeric identifier in the text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoIdentifier;

/// Point `text` at `target_agent_id`.
///
/// Placeholders are substituted when present. Otherwise every standalone
/// number is taken to be an agent id (agents carry purely numeric ids) and
/// replaced. Nothing else in the text changes.
pub fn rewrite_agent_id(text: &str, target_agent_id: &str) -> Result<String, NoIdentifier> {
    if text.contains(AGENT_PLACEHOLDER) {
        return Ok(text.replace(AGENT_PLACEHOLDER, target_agent_id));
    }
    let re = numeric_id();
    if !re.is_match(text) {
        return Err(NoIdentifier);
    }
    Ok(re
        .replace_all(text, regex::NoExpand(target_agent_id))
        .into_owned())
}

/// Replace occurrences of `agent_id` with the placeholder.
pub fn templatize(text: &str, agent_id: &str) -> String {
    numeric_id()
        .replace_all(text, |caps: &regex::Captures<'_>| {
            if &caps[0] == agent_id {
                AGENT_PLACEHOLDER.to_string()
            } else {
                caps[0].to_string()
            }
        })
        .into_owned()
}

/// Standalone numbers in `text`.
pub fn numeric_ids(text: &str) -> Vec<&str> {
    numeric_id().find_iter(text).map(|m| m.as_str()).collect()
}

/// `text` names `agent_id` as a standalone number.
pub fn mentions_agent(text: &str, agent_id: &str) -> bool {
    numeric_ids(text).contains(&agent_id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholder_path() {
        assert_eq!(
            rewrite_agent_id("vehicle ⟨AGENT⟩ is reversing", "17").unwrap(),
            "vehicle 17 is reversing"
        );
    }

    #[test]
    fn numeric_path() {
        assert_eq!(
            rewrite_agent_id("agent 99 makes a U turn", "3").unwrap(),
            "agent 3 makes a U turn"
        );
    }

    #[test]
    fn every_occurrence_is_rewritten() {
        let text = "agent 12 yields, then agent 12 turns";
        let out = rewrite_agent_id(text, "5").unwrap();
        assert_eq!(out.matches('5').count(), 2);
        assert!(!out.contains("12"));
        assert_eq!(out, "agent 5 yields, then agent 5 turns");
        let placeholders = "⟨AGENT⟩ and ⟨AGENT⟩";
        assert_eq!(rewrite_agent_id(placeholders, "8").unwrap(), "8 and 8");
    }

    #[test]
    fn missing_identifier_is_flagged() {
        assert_eq!(rewrite_agent_id("the agent turns", "1"), Err(NoIdentifier));
    }

    #[test]
    fn templatize_only_touches_the_agent() {
        assert_eq!(
            templatize("vehicle 42 is turning", "42"),
            "vehicle ⟨AGENT⟩ is turning"
        );
        assert_eq!(
            templatize("agent 4 passes 42", "4"),
            "agent ⟨AGENT⟩ passes 42"
        );
        assert!(mentions_agent("Agent 42.", "42"));
        assert!(!mentions_agent("Agent 421.", "42"));
    }
}
