//! Narrative-graph data model and its mutation algebra.
//!
//! A [`NarrativeGraph`] is an immutable snapshot: [`NarrativeGraph::apply`]
//! returns a new value with `version` bumped by one, so snapshots can be
//! shared freely across threads while writers coordinate through the store.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{generated_counter, EdgeId, GraphId, NodeId};

/// How the simulator treats a student reply that matches no outgoing intent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DialogueMode {
    /// Only existing edges are followed; unmatched replies are rejected.
    Strict,
    /// Unmatched replies grow the graph with a generated branch.
    Flexible,
}

impl DialogueMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DialogueMode::Strict => "strict",
            DialogueMode::Flexible => "flexible",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "strict" => Some(DialogueMode::Strict),
            "flexible" => Some(DialogueMode::Flexible),
            _ => None,
        }
    }
}

/// Where a graph element came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Authored,
    Generated,
    Template,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Authored => "authored",
            Provenance::Generated => "generated",
            Provenance::Template => "template",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "authored" => Some(Provenance::Authored),
            "generated" => Some(Provenance::Generated),
            "template" => Some(Provenance::Template),
            _ => None,
        }
    }
}

/// A category of student reply that selects an outgoing edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseIntent {
    pub label: String,
    pub description: String,
    pub examples: Vec<String>,
}

impl ResponseIntent {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            description: String::new(),
            examples: Vec::new(),
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn with_examples<I, S>(mut self, examples: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.examples = examples.into_iter().map(Into::into).collect();
        self
    }

    /// Key used for the per-node uniqueness rule.
    pub fn label_key(&self) -> String {
        self.label.to_lowercase()
    }
}

/// One moment of the scenario: what the avatar says on arrival.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneNode {
    pub id: NodeId,
    pub avatar_utterance: String,
    pub description: String,
    pub terminal: bool,
    pub provenance: Provenance,
}

impl SceneNode {
    pub fn new(id: impl Into<NodeId>, avatar_utterance: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            avatar_utterance: avatar_utterance.into(),
            description: String::new(),
            terminal: false,
            provenance: Provenance::Authored,
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn terminal(mut self, terminal: bool) -> Self {
        self.terminal = terminal;
        self
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }
}

/// An intent-labelled move from one scene to its successor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEdge {
    pub id: EdgeId,
    pub from: NodeId,
    pub to: NodeId,
    pub intent: ResponseIntent,
    pub provenance: Provenance,
}

impl TransitionEdge {
    pub fn new(
        id: impl Into<EdgeId>,
        from: impl Into<NodeId>,
        to: impl Into<NodeId>,
        intent: ResponseIntent,
    ) -> Self {
        Self {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            intent,
            provenance: Provenance::Authored,
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }
}

/// A single edit to a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "arg", rename_all = "snake_case")]
pub enum Mutation {
    AddNode(SceneNode),
    UpdateNode(SceneNode),
    RemoveNode(NodeId),
    AddEdge(TransitionEdge),
    UpdateEdge(TransitionEdge),
    RemoveEdge(EdgeId),
    SetStart(NodeId),
    SetMode(DialogueMode),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph title must not be empty")]
    EmptyTitle,
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("unknown edge `{0}`")]
    UnknownEdge(EdgeId),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(NodeId),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdge(EdgeId),
    #[error("node `{node}` already has an outgoing intent labelled `{label}`")]
    DuplicateIntentLabel { node: NodeId, label: String },
    #[error("removing `{0}` would leave the start node dangling")]
    WouldDangle(NodeId),
    #[error("invalid element: {0}")]
    InvalidElement(String),
}

/// Versioned scene/transition graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NarrativeGraph {
    pub id: GraphId,
    pub title: String,
    pub mode: DialogueMode,
    /// `None` only while the graph has no nodes.
    pub start_node: Option<NodeId>,
    pub nodes: BTreeMap<NodeId, SceneNode>,
    /// Insertion order is significant: it is the tie-break order for matching.
    pub edges: Vec<TransitionEdge>,
    pub version: u64,
    pub metadata: BTreeMap<String, String>,
}

impl NarrativeGraph {
    /// Creates an empty graph at version 1 with a fresh id.
    pub fn new(title: impl Into<String>, mode: DialogueMode) -> Result<Self, GraphError> {
        let title = title.into();
        if title.is_empty() {
            return Err(GraphError::EmptyTitle);
        }
        Ok(Self {
            id: GraphId::fresh(),
            title,
            mode,
            start_node: None,
            nodes: BTreeMap::new(),
            edges: Vec::new(),
            version: 1,
            metadata: BTreeMap::new(),
        })
    }

    pub fn node(&self, id: &str) -> Option<&SceneNode> {
        self.nodes.get(id)
    }

    pub fn edge(&self, id: &str) -> Option<&TransitionEdge> {
        self.edges.iter().find(|e| e.id.as_str() == id)
    }

    pub fn start(&self) -> Option<&SceneNode> {
        self.start_node.as_ref().and_then(|id| self.nodes.get(id))
    }

    /// Edges leaving `node`, in insertion order.
    pub fn outgoing_edges(&self, node: &str) -> Result<Vec<&TransitionEdge>, GraphError> {
        if !self.nodes.contains_key(node) {
            return Err(GraphError::UnknownNode(NodeId::from(node)));
        }
        Ok(self.edges.iter().filter(|e| e.from.as_str() == node).collect())
    }

    /// Next free counter for `gen-NNN` ids, shared by nodes and edges.
    pub fn next_generated_counter(&self) -> u32 {
        let nodes = self.nodes.keys().map(NodeId::as_str);
        let edges = self.edges.iter().map(|e| e.id.as_str());
        nodes
            .chain(edges)
            .filter_map(generated_counter)
            .max()
            .map_or(1, |n| n + 1)
    }

    /// Applies one mutation, returning the successor snapshot.
    pub fn apply(&self, mutation: Mutation) -> Result<NarrativeGraph, GraphError> {
        let mut next = self.clone();
        match mutation {
            Mutation::AddNode(node) => {
                check_node(&node)?;
                if next.nodes.contains_key(&node.id) {
                    return Err(GraphError::DuplicateNode(node.id));
                }
                if next.start_node.is_none() {
                    next.start_node = Some(node.id.clone());
                }
                next.nodes.insert(node.id.clone(), node);
            }
            Mutation::UpdateNode(node) => {
                check_node(&node)?;
                let slot = next
                    .nodes
                    .get_mut(&node.id)
                    .ok_or_else(|| GraphError::UnknownNode(node.id.clone()))?;
                let provenance = slot.provenance;
                *slot = SceneNode { provenance, ..node };
            }
            Mutation::RemoveNode(id) => {
                if !next.nodes.contains_key(&id) {
                    return Err(GraphError::UnknownNode(id));
                }
                if next.start_node.as_ref() == Some(&id) {
                    if next.nodes.len() > 1 {
                        return Err(GraphError::WouldDangle(id));
                    }
                    next.start_node = None;
                }
                next.nodes.remove(&id);
                next.edges.retain(|e| e.from != id && e.to != id);
            }
            Mutation::AddEdge(edge) => {
                next.check_edge(&edge, None)?;
                if next.edge(edge.id.as_str()).is_some() {
                    return Err(GraphError::DuplicateEdge(edge.id));
                }
                next.edges.push(edge);
            }
            Mutation::UpdateEdge(edge) => {
                let pos = next
                    .edges
                    .iter()
                    .position(|e| e.id == edge.id)
                    .ok_or_else(|| GraphError::UnknownEdge(edge.id.clone()))?;
                next.check_edge(&edge, Some(pos))?;
                let provenance = next.edges[pos].provenance;
                next.edges[pos] = TransitionEdge { provenance, ..edge };
            }
            Mutation::RemoveEdge(id) => {
                let pos = next
                    .edges
                    .iter()
                    .position(|e| e.id == id)
                    .ok_or(GraphError::UnknownEdge(id))?;
                next.edges.remove(pos);
            }
            Mutation::SetStart(id) => {
                if !next.nodes.contains_key(&id) {
                    return Err(GraphError::UnknownNode(id));
                }
                next.start_node = Some(id);
            }
            Mutation::SetMode(mode) => next.mode = mode,
        }
        next.version += 1;
        Ok(next)
    }

    /// Applies mutations left to right, stopping at the first failure.
    pub fn apply_all<I>(&self, mutations: I) -> Result<NarrativeGraph, GraphError>
    where
        I: IntoIterator<Item = Mutation>,
    {
        let mut iter = mutations.into_iter();
        let Some(first) = iter.next() else {
            return Ok(self.clone());
        };
        let mut graph = self.apply(first)?;
        for m in iter {
            graph = graph.apply(m)?;
        }
        Ok(graph)
    }

    /// Endpoint and label checks for an edge about to occupy slot `replacing`
    /// (or be appended when `None`).
    fn check_edge(&self, edge: &TransitionEdge, replacing: Option<usize>) -> Result<(), GraphError> {
        if edge.id.as_str().is_empty() {
            return Err(GraphError::InvalidElement("edge id is empty".into()));
        }
        check_intent(&edge.intent)?;
        for end in [&edge.from, &edge.to] {
            if !self.nodes.contains_key(end) {
                return Err(GraphError::UnknownNode(end.clone()));
            }
        }
        let key = edge.intent.label_key();
        let clash = self.edges.iter().enumerate().any(|(i, e)| {
            Some(i) != replacing && e.from == edge.from && e.intent.label_key() == key
        });
        if clash {
            return Err(GraphError::DuplicateIntentLabel {
                node: edge.from.clone(),
                label: edge.intent.label.clone(),
            });
        }
        Ok(())
    }
}

fn check_node(node: &SceneNode) -> Result<(), GraphError> {
    if node.id.as_str().is_empty() {
        return Err(GraphError::InvalidElement("node id is empty".into()));
    }
    if node.avatar_utterance.is_empty() {
        return Err(GraphError::InvalidElement(format!(
            "node `{}` has an empty avatar utterance",
            node.id
        )));
    }
    Ok(())
}

pub(crate) fn check_intent(intent: &ResponseIntent) -> Result<(), GraphError> {
    if intent.label.is_empty() {
        return Err(GraphError::InvalidElement("intent label is empty".into()));
    }
    if intent.label.contains(['\n', '\r']) {
        return Err(GraphError::InvalidElement(format!(
            "intent label `{}` contains a newline",
            intent.label.escape_debug()
        )));
    }
    Ok(())
}
