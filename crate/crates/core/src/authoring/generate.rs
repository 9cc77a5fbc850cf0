//! Model-assisted authoring: whole scenarios from a prompt, and new branches
//! under an existing scene.
//!
//! Generated elements get engine ids (`gen-NNN`, one counter per graph shared
//! by nodes and edges) and `Provenance::Generated`.

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::authoring::json::from_value;
use crate::graph::{GraphError, Mutation, NarrativeGraph, Provenance, ResponseIntent, SceneNode, TransitionEdge};
use crate::ids::{generated_id, GraphId, NodeId};
use crate::llm::tasks::{parse_json, propose_expansion, structured};
use crate::llm::{GatewayError, ProviderHandle, Task};
use crate::validate::{validate, Diagnostic};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerateError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn set_default(obj: &mut Map<String, Value>, key: &str, value: Value) {
    obj.entry(key.to_string()).or_insert(value);
}

/// Turns a model reply into a validated graph with engine ids.
fn graph_from_reply(text: &str) -> Result<NarrativeGraph, String> {
    let mut value = parse_json(text)?;
    let doc = value.as_object_mut().ok_or("expected a JSON object")?;
    set_default(doc, "id", json!("pending"));
    set_default(doc, "version", json!(1));
    set_default(doc, "metadata", json!({}));
    set_default(doc, "mode", json!("flexible"));
    set_default(doc, "title", json!("Generated scenario"));

    let nodes = doc
        .get_mut("nodes")
        .and_then(Value::as_array_mut)
        .ok_or("missing `nodes` array")?;
    if nodes.is_empty() {
        return Err("scenario has no nodes".into());
    }
    let mut counter = 0;
    let mut renames = Map::new();
    for node in nodes.iter_mut() {
        let obj = node.as_object_mut().ok_or("node is not an object")?;
        counter += 1;
        let new_id = generated_id(counter);
        let old = obj.get("id").and_then(Value::as_str).unwrap_or_default().to_string();
        renames.insert(old, json!(new_id));
        obj.insert("id".into(), json!(new_id));
        obj.insert("provenance".into(), json!("generated"));
        set_default(obj, "description", json!(""));
        set_default(obj, "terminal", json!(false));
    }
    let first_node = doc["nodes"][0]["id"].clone();
    let rename = |v: &Value| -> Value {
        v.as_str()
            .and_then(|s| renames.get(s))
            .cloned()
            .unwrap_or_else(|| v.clone())
    };
    let start = match doc.get("start_node") {
        Some(Value::Null) | None => first_node,
        Some(v) => rename(v),
    };
    doc.insert("start_node".into(), start);

    let empty = Vec::new();
    let edges: Vec<Value> = doc.get("edges").and_then(Value::as_array).unwrap_or(&empty).clone();
    let mut remapped = Vec::with_capacity(edges.len());
    for mut edge in edges {
        let obj = edge.as_object_mut().ok_or("edge is not an object")?;
        counter += 1;
        obj.insert("id".into(), json!(generated_id(counter)));
        for end in ["from", "to"] {
            let v = obj.get(end).cloned().unwrap_or(Value::Null);
            obj.insert(end.into(), rename(&v));
        }
        obj.insert("provenance".into(), json!("generated"));
        let intent = obj
            .get_mut("intent")
            .and_then(Value::as_object_mut)
            .ok_or("edge without `intent` object")?;
        set_default(intent, "description", json!(""));
        set_default(intent, "examples", json!([]));
        remapped.push(edge);
    }
    doc.insert("edges".into(), Value::Array(remapped));

    let graph = from_value(value).map_err(|e| e.to_string())?;
    let errors: Vec<Diagnostic> = validate(&graph).into_iter().filter(Diagnostic::is_error).collect();
    if !errors.is_empty() {
        let listed: Vec<String> = errors.iter().map(ToString::to_string).collect();
        return Err(format!("generated graph is invalid: {}", listed.join("; ")));
    }
    Ok(graph)
}

/// Builds a new scenario from an instructor prompt.
pub fn generate_graph(provider: &ProviderHandle, prompt: &str) -> Result<NarrativeGraph, GenerateError> {
    if prompt.trim().is_empty() {
        return Err(GatewayError::EmptyPrompt.into());
    }
    let user = json!({ "prompt": prompt }).to_string();
    let mut graph = structured(provider, Task::Generate, user, graph_from_reply, GatewayError::MalformedGeneration)?;
    graph.id = GraphId::fresh();
    graph.version = 1;
    graph.metadata.insert("prompt".into(), prompt.to_string());
    Ok(graph)
}

/// Appends model-proposed branches under `node`; the version advances once per
/// appended edge + node pair.
pub fn expand_node(
    provider: &ProviderHandle,
    graph: &NarrativeGraph,
    node: &str,
    instruction: &str,
) -> Result<NarrativeGraph, GenerateError> {
    let scene = graph
        .node(node)
        .ok_or_else(|| GraphError::UnknownNode(NodeId::from(node)))?;
    let labels: Vec<String> = graph
        .outgoing_edges(node)?
        .iter()
        .map(|e| e.intent.label.clone())
        .collect();
    let proposals = propose_expansion(provider, scene, instruction, &labels)?;
    let mut next = graph.clone();
    for p in &proposals {
        let id = generated_id(next.next_generated_counter());
        let version = next.version;
        next = next.apply_all([
            Mutation::AddNode(
                SceneNode::new(id.as_str(), p.avatar_reply.clone())
                    .with_description(p.scene_description.clone())
                    .terminal(p.terminal)
                    .with_provenance(Provenance::Generated),
            ),
            Mutation::AddEdge(
                TransitionEdge::new(
                    id.as_str(),
                    node,
                    id.as_str(),
                    ResponseIntent::new(p.intent_label.clone()).with_description(p.intent_description.clone()),
                )
                .with_provenance(Provenance::Generated),
            ),
        ])?;
        next.version = version + 1;
    }
    Ok(next)
}
