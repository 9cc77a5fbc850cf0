//! Task-level gateway calls: request building, reply parsing, repair retry.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{GatewayError, PromptRequest, ProviderHandle, Task};
use crate::graph::{ResponseIntent, SceneNode};
use crate::ids::{EdgeId, GENERATED_PREFIX};

/// Confidence that an utterance expresses the intent of one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentMatch {
    pub edge_id: EdgeId,
    pub confidence: f64,
}

/// A model-proposed new intent and the scene it leads to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchProposal {
    pub intent_label: String,
    #[serde(default)]
    pub intent_description: String,
    pub avatar_reply: String,
    #[serde(default)]
    pub scene_description: String,
    #[serde(default)]
    pub terminal: bool,
}

/// The scene fields a model is allowed to see.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneContext {
    pub id: String,
    pub avatar_utterance: String,
    pub description: String,
}

impl From<&SceneNode> for SceneContext {
    fn from(node: &SceneNode) -> Self {
        Self {
            id: node.id.to_string(),
            avatar_utterance: node.avatar_utterance.clone(),
            description: node.description.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Matched,
    GeneratedBranch,
    Rejected,
}

/// Final decision of a turn, reduced to what feedback may depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSummary {
    pub kind: OutcomeKind,
    /// Label of the edge taken; `None` for rejected turns.
    pub intent_label: Option<String>,
    pub confidence: Option<f64>,
    pub hint: Option<String>,
}

/// Everything the feedback prompt receives. Deliberately has no room for
/// candidate edges or other turns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRequest {
    pub scene: SceneContext,
    pub student_utterance: String,
    pub outcome: DecisionSummary,
}

impl FeedbackRequest {
    pub fn to_prompt(&self, provider: &ProviderHandle) -> PromptRequest {
        let user = serde_json::to_string(self).expect("feedback request serializes");
        PromptRequest::new(Task::Feedback, provider.prompts().get(Task::Feedback).text.clone(), user)
    }
}

/// Strips Markdown code fences some models wrap JSON in.
fn json_body(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.split_once('\n').map_or("", |(_, body)| body);
    rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
}

pub(crate) fn parse_json(text: &str) -> Result<Value, String> {
    serde_json::from_str(json_body(text)).map_err(|e| format!("not valid JSON: {e}"))
}

/// Sends a structured request; on an unusable reply, sends one repair request
/// echoing the reply back, then gives up with `malformed`.
pub(crate) fn structured<T>(
    provider: &ProviderHandle,
    task: Task,
    user_text: String,
    parse: impl Fn(&str) -> Result<T, String>,
    malformed: fn(String) -> GatewayError,
) -> Result<T, GatewayError> {
    let system = provider.prompts().get(task).text.clone();
    let first = PromptRequest::new(task, system.clone(), user_text.clone());
    let reply = provider.complete(&first)?;
    let problem = match parse(&reply) {
        Ok(v) => return Ok(v),
        Err(problem) => problem,
    };
    let repair = PromptRequest::new(
        task,
        system,
        format!(
            "{user_text}\n\nYour previous reply could not be used ({problem}). It was:\n{reply}\n\
             Reply again with only the JSON described in the instructions."
        ),
    );
    let reply = provider.complete(&repair)?;
    parse(&reply).map_err(malformed)
}

/// Scores `utterance` against every candidate intent.
///
/// Result has one entry per candidate, sorted by confidence descending with
/// ties kept in candidate order.
pub fn classify_intent(
    provider: &ProviderHandle,
    utterance: &str,
    candidates: &[(EdgeId, ResponseIntent)],
) -> Result<Vec<IntentMatch>, GatewayError> {
    if candidates.is_empty() {
        return Err(GatewayError::EmptyCandidates);
    }
    let payload = json!({
        "utterance": utterance,
        "candidates": candidates.iter().map(|(id, intent)| json!({
            "edge_id": id,
            "label": intent.label,
            "description": intent.description,
            "examples": intent.examples,
        })).collect::<Vec<_>>(),
    });
    let parse = |text: &str| -> Result<Vec<IntentMatch>, String> {
        let value = parse_json(text)?;
        let items = match &value {
            Value::Array(items) => items,
            Value::Object(o) => o
                .get("matches")
                .and_then(Value::as_array)
                .ok_or("expected a `matches` array")?,
            _ => return Err("expected a JSON object or array".into()),
        };
        let mut scores: HashMap<&str, f64> = HashMap::new();
        for item in items {
            let id = item["edge_id"].as_str().ok_or("entry without string `edge_id`")?;
            let conf = item["confidence"].as_f64().ok_or("entry without numeric `confidence`")?;
            if !candidates.iter().any(|(c, _)| c.as_str() == id) {
                return Err(format!("unknown edge id `{id}`"));
            }
            scores.entry(id).or_insert(conf.clamp(0.0, 1.0));
        }
        let mut out: Vec<IntentMatch> = candidates
            .iter()
            .map(|(id, _)| IntentMatch {
                edge_id: id.clone(),
                confidence: scores.get(id.as_str()).copied().unwrap_or(0.0),
            })
            .collect();
        out.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        Ok(out)
    };
    structured(provider, Task::Classify, payload.to_string(), parse, GatewayError::MalformedClassification)
}

/// First of `label`, `gen-label`, `gen-label-2`, … not already in `existing`
/// (case-insensitive).
pub fn unique_label<S: AsRef<str>>(label: &str, existing: &[S]) -> String {
    let taken: BTreeSet<String> = existing.iter().map(|s| s.as_ref().to_lowercase()).collect();
    if !taken.contains(&label.to_lowercase()) {
        return label.to_string();
    }
    let base = format!("{GENERATED_PREFIX}{label}");
    std::iter::once(base.clone())
        .chain((2..).map(|n| format!("{base}-{n}")))
        .find(|l| !taken.contains(&l.to_lowercase()))
        .expect("unbounded suffixes")
}

fn parse_proposal(value: Value) -> Result<BranchProposal, String> {
    let p: BranchProposal = serde_json::from_value(value).map_err(|e| format!("bad branch proposal: {e}"))?;
    if p.intent_label.trim().is_empty() {
        return Err("empty intent_label".into());
    }
    if p.intent_label.contains(['\n', '\r']) {
        return Err("intent_label contains a newline".into());
    }
    if p.avatar_reply.trim().is_empty() {
        return Err("empty avatar_reply".into());
    }
    Ok(p)
}

/// Asks the model for a new intent capturing an unmatched `utterance`.
pub fn propose_branch<S: AsRef<str>>(
    provider: &ProviderHandle,
    scene: &SceneNode,
    utterance: &str,
    existing_labels: &[S],
) -> Result<BranchProposal, GatewayError> {
    if utterance.trim().is_empty() {
        return Err(GatewayError::EmptyUtterance);
    }
    let labels: Vec<&str> = existing_labels.iter().map(AsRef::as_ref).collect();
    let payload = json!({
        "scene": SceneContext::from(scene),
        "utterance": utterance,
        "existing_labels": labels,
    });
    let mut proposal = structured(
        provider,
        Task::Branch,
        payload.to_string(),
        |text| parse_proposal(parse_json(text)?),
        GatewayError::MalformedGeneration,
    )?;
    proposal.intent_label = unique_label(&proposal.intent_label, existing_labels);
    Ok(proposal)
}

/// Asks the model for one or more branches under `scene` following an
/// instructor instruction. Labels are made unique against `existing_labels`
/// and each other.
pub fn propose_expansion<S: AsRef<str>>(
    provider: &ProviderHandle,
    scene: &SceneNode,
    instruction: &str,
    existing_labels: &[S],
) -> Result<Vec<BranchProposal>, GatewayError> {
    if instruction.trim().is_empty() {
        return Err(GatewayError::EmptyPrompt);
    }
    let mut labels: Vec<String> = existing_labels.iter().map(|s| s.as_ref().to_string()).collect();
    let payload = json!({
        "scene": SceneContext::from(scene),
        "instruction": instruction,
        "existing_labels": labels,
    });
    let parse = |text: &str| -> Result<Vec<BranchProposal>, String> {
        match parse_json(text)? {
            Value::Array(items) if items.is_empty() => Err("empty proposal list".into()),
            Value::Array(items) => items.into_iter().map(parse_proposal).collect(),
            other => Ok(vec![parse_proposal(other)?]),
        }
    };
    let mut proposals = structured(provider, Task::Branch, payload.to_string(), parse, GatewayError::MalformedGeneration)?;
    for p in &mut proposals {
        p.intent_label = unique_label(&p.intent_label, &labels);
        labels.push(p.intent_label.clone());
    }
    Ok(proposals)
}

/// Per-turn coaching text, produced from scene, utterance and decision only.
pub fn compose_feedback(
    provider: &ProviderHandle,
    scene: &SceneNode,
    utterance: &str,
    decision: &DecisionSummary,
) -> Result<String, GatewayError> {
    let request = FeedbackRequest {
        scene: SceneContext::from(scene),
        student_utterance: utterance.to_string(),
        outcome: decision.clone(),
    };
    let text = provider.complete(&request.to_prompt(provider))?;
    let text = text.trim();
    if text.is_empty() {
        return Err(super::ProviderError::BadResponse("empty feedback".into()).into());
    }
    Ok(text.to_string())
}
