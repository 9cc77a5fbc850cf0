//! Deterministic offline stand-in for a language model.
//!
//! The mock is a pure function of the request. Per task:
//!
//! * **classify**: confidence of each candidate is the best Jaccard overlap
//!   between the utterance's word set and the word set of one of the intent's
//!   examples (label + description when it has none). Words are lowercased,
//!   stripped of every character that is neither alphanumeric nor whitespace,
//!   and split on whitespace.
//! * **branch**: label `gen-NNN` with the smallest `NNN ≥ 1` not already used
//!   at the scene, reply `Mock reply to: <utterance>`, scene description
//!   `Auto branch`, never terminal.
//! * **feedback**: `Mock feedback for intent <label>` (`<none>` when rejected).
//! * **generate**: a three-scene skeleton: an opening scene `gen-001` with a
//!   `cooperative` edge `gen-004` to `gen-002` and a `dismissive` edge
//!   `gen-005` to `gen-003`, both terminal.

use std::collections::BTreeSet;

use serde_json::{json, Value};

use super::{LanguageModel, PromptRequest, ProviderError, Task};
use crate::ids::generated_id;

#[derive(Debug, Clone, Copy, Default)]
pub struct MockModel;

/// Lowercased, punctuation-free word set.
pub fn word_set(text: &str) -> BTreeSet<String> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// `|a ∩ b| / |a ∪ b|`, zero when both are empty.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub(crate) fn mock_confidence(utterance: &str, label: &str, description: &str, examples: &[String]) -> f64 {
    let words = word_set(utterance);
    if examples.is_empty() {
        return jaccard(&words, &word_set(&format!("{label} {description}")));
    }
    examples
        .iter()
        .map(|ex| jaccard(&words, &word_set(ex)))
        .fold(0.0, f64::max)
}

fn str_field<'a>(v: &'a Value, key: &str) -> &'a str {
    v.get(key).and_then(Value::as_str).unwrap_or("")
}

fn classify(input: &Value) -> Option<String> {
    let utterance = input.get("utterance")?.as_str()?;
    let candidates = input.get("candidates")?.as_array()?;
    let matches: Vec<Value> = candidates
        .iter()
        .map(|c| {
            let examples: Vec<String> = c
                .get("examples")
                .and_then(Value::as_array)
                .map(|xs| xs.iter().filter_map(Value::as_str).map(str::to_string).collect())
                .unwrap_or_default();
            let confidence = mock_confidence(utterance, str_field(c, "label"), str_field(c, "description"), &examples);
            json!({"edge_id": str_field(c, "edge_id"), "confidence": confidence})
        })
        .collect();
    Some(json!({ "matches": matches }).to_string())
}

fn branch(input: &Value) -> Option<String> {
    let prompt = input
        .get("utterance")
        .or_else(|| input.get("instruction"))?
        .as_str()?;
    let taken: BTreeSet<String> = input
        .get("existing_labels")
        .and_then(Value::as_array)
        .map(|xs| xs.iter().filter_map(Value::as_str).map(str::to_lowercase).collect())
        .unwrap_or_default();
    let label = (1..)
        .map(generated_id)
        .find(|l| !taken.contains(l))
        .expect("unbounded counter");
    Some(
        json!({
            "intent_label": label,
            "intent_description": "Auto intent",
            "avatar_reply": format!("Mock reply to: {prompt}"),
            "scene_description": "Auto branch",
            "terminal": false,
        })
        .to_string(),
    )
}

fn feedback(input: &Value) -> Option<String> {
    let label = input
        .get("outcome")
        .and_then(|o| o.get("intent_label"))
        .and_then(Value::as_str)
        .unwrap_or("<none>");
    Some(format!("Mock feedback for intent {label}"))
}

fn generate(input: &Value) -> Option<String> {
    let prompt = input.get("prompt")?.as_str()?;
    let doc = json!({
        "title": format!("Mock scenario: {prompt}"),
        "mode": "flexible",
        "start_node": "gen-001",
        "nodes": [
            {"id": "gen-001", "avatar_utterance": format!("Mock opening for: {prompt}"),
             "description": "Generated opening scene", "terminal": false},
            {"id": "gen-002", "avatar_utterance": "Mock positive outcome",
             "description": "Generated cooperative outcome", "terminal": true},
            {"id": "gen-003", "avatar_utterance": "Mock negative outcome",
             "description": "Generated dismissive outcome", "terminal": true},
        ],
        "edges": [
            {"id": "gen-004", "from": "gen-001", "to": "gen-002",
             "intent": {"label": "cooperative", "description": "Engage with the concern",
                        "examples": ["I can help you with that"]}},
            {"id": "gen-005", "from": "gen-001", "to": "gen-003",
             "intent": {"label": "dismissive", "description": "Brush the concern off",
                        "examples": ["That is not my problem"]}},
        ],
    });
    Some(doc.to_string())
}

impl LanguageModel for MockModel {
    fn complete(&self, request: &PromptRequest) -> Result<String, ProviderError> {
        let reply = serde_json::from_str::<Value>(&request.user_text)
            .ok()
            .and_then(|input| match request.task {
                Task::Classify => classify(&input),
                Task::Branch => branch(&input),
                Task::Feedback => feedback(&input),
                Task::Generate => generate(&input),
            });
        Ok(reply.unwrap_or_else(|| format!("Mock response to an unrecognised {} request", request.task.as_str())))
    }
}
