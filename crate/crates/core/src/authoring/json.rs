//! Persistence format for narrative graphs.
//!
//! ```json
//! {
//!   "edges": [{"from": "n0", "id": "e1", "intent": {"description": "", "examples": [], "label": "patient"},
//!              "provenance": "authored", "to": "n1"}],
//!   "id": "…", "metadata": {}, "mode": "flexible",
//!   "nodes": [{"avatar_utterance": "…", "description": "", "id": "n0", "provenance": "authored", "terminal": false}],
//!   "start_node": "n0", "title": "…", "version": 1
//! }
//! ```
//!
//! Output is canonical (sorted keys, nodes by id, edges in insertion order),
//! so `to_json(from_json(t)) == t` for canonical `t`.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::to_canonical_string;
use crate::graph::{DialogueMode, NarrativeGraph, SceneNode, TransitionEdge};
use crate::ids::{GraphId, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JsonError {
    #[error("schema violation at `{pointer}`: {message}")]
    SchemaViolation { pointer: String, message: String },
}

impl JsonError {
    fn at(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        JsonError::SchemaViolation {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    pub fn pointer(&self) -> &str {
        let JsonError::SchemaViolation { pointer, .. } = self;
        pointer
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDocument {
    id: GraphId,
    title: String,
    mode: DialogueMode,
    start_node: Option<NodeId>,
    version: u64,
    metadata: BTreeMap<String, String>,
    nodes: Vec<SceneNode>,
    edges: Vec<TransitionEdge>,
}

/// Serializes `graph` to canonical JSON text.
pub fn to_json(graph: &NarrativeGraph) -> String {
    to_canonical_string(&to_value(graph)).expect("graph documents always serialize")
}

/// The graph as a JSON value (same shape as [`to_json`]).
pub fn to_value(graph: &NarrativeGraph) -> serde_json::Value {
    let doc = GraphDocument {
        id: graph.id.clone(),
        title: graph.title.clone(),
        mode: graph.mode,
        start_node: graph.start_node.clone(),
        version: graph.version,
        metadata: graph.metadata.clone(),
        nodes: graph.nodes.values().cloned().collect(),
        edges: graph.edges.clone(),
    };
    serde_json::to_value(doc).expect("graph documents always serialize")
}

pub fn from_json(text: &str) -> Result<NarrativeGraph, JsonError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let doc: GraphDocument = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let pointer = pointer_of(e.path());
        let inner = e.into_inner();
        JsonError::at(pointer, inner.to_string())
    })?;
    de.end().map_err(|e| JsonError::at("", e.to_string()))?;
    from_document(doc)
}

pub fn from_value(value: serde_json::Value) -> Result<NarrativeGraph, JsonError> {
    let doc: GraphDocument = serde_path_to_error::deserialize(value)
        .map_err(|e| JsonError::at(pointer_of(e.path()), e.into_inner().to_string()))?;
    from_document(doc)
}

fn from_document(doc: GraphDocument) -> Result<NarrativeGraph, JsonError> {
    if doc.title.is_empty() {
        return Err(JsonError::at("/title", "title must not be empty"));
    }
    if doc.version == 0 {
        return Err(JsonError::at("/version", "version starts at 1"));
    }
    let mut nodes = BTreeMap::new();
    let mut seen = HashSet::new();
    for (i, node) in doc.nodes.into_iter().enumerate() {
        if node.id.as_str().is_empty() {
            return Err(JsonError::at(format!("/nodes/{i}/id"), "id must not be empty"));
        }
        if !seen.insert(node.id.clone()) {
            return Err(JsonError::at(
                format!("/nodes/{i}/id"),
                format!("duplicate node id `{}`", node.id),
            ));
        }
        if node.avatar_utterance.is_empty() {
            return Err(JsonError::at(
                format!("/nodes/{i}/avatar_utterance"),
                "avatar utterance must not be empty",
            ));
        }
        nodes.insert(node.id.clone(), node);
    }
    for (i, edge) in doc.edges.iter().enumerate() {
        if edge.id.as_str().is_empty() {
            return Err(JsonError::at(format!("/edges/{i}/id"), "id must not be empty"));
        }
        if let Err(e) = crate::graph::check_intent(&edge.intent) {
            return Err(JsonError::at(format!("/edges/{i}/intent/label"), e.to_string()));
        }
    }
    Ok(NarrativeGraph {
        id: doc.id,
        title: doc.title,
        mode: doc.mode,
        start_node: doc.start_node,
        nodes,
        edges: doc.edges,
        version: doc.version,
        metadata: doc.metadata,
    })
}

/// Renders a serde path as a JSON pointer (`/edges/0/intent/label`).
fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => {
                out.push('/');
                out.push_str(&index.to_string());
            }
            Segment::Map { key } | Segment::Enum { variant: key } => {
                out.push('/');
                out.push_str(&key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Unknown => {}
        }
    }
    out
}
