//! Structural lint for narrative graphs.
//!
//! Diagnostic codes are a stable contract:
//!
//! | code | severity | meaning |
//! |------|----------|---------|
//! | E001 | error    | start node missing or not a node of the graph |
//! | E002 | error    | edge endpoint references an unknown node |
//! | E003 | error    | two outgoing intents of one node share a label (case-insensitive) |
//! | E004 | error    | element id used more than once |
//! | W001 | warning  | node unreachable from the start node |
//! | W002 | warning  | terminal node has outgoing edges |
//! | W003 | warning  | non-terminal node has no outgoing edges |

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::NarrativeGraph;
use crate::ids::{EdgeId, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Code {
    E001,
    E002,
    E003,
    E004,
    W001,
    W002,
    W003,
}

impl Code {
    pub fn severity(self) -> Severity {
        match self {
            Code::E001 | Code::E002 | Code::E003 | Code::E004 => Severity::Error,
            Code::W001 | Code::W002 | Code::W003 => Severity::Warning,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Code::E001 => "E001",
            Code::E002 => "E002",
            Code::E003 => "E003",
            Code::E004 => "E004",
            Code::W001 => "W001",
            Code::W002 => "W002",
            Code::W003 => "W003",
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a diagnostic is about.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum Subject {
    Graph,
    Node(NodeId),
    Edge(EdgeId),
}

impl Subject {
    fn sort_key(&self) -> &str {
        match self {
            Subject::Graph => "",
            Subject::Node(id) => id.as_str(),
            Subject::Edge(id) => id.as_str(),
        }
    }
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Graph => f.write_str("graph"),
            Subject::Node(id) => write!(f, "node {id}"),
            Subject::Edge(id) => write!(f, "edge {id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: Code,
    pub severity: Severity,
    pub message: String,
    pub subject: Subject,
}

impl Diagnostic {
    fn new(code: Code, subject: Subject, message: impl Into<String>) -> Self {
        Self {
            code,
            severity: code.severity(),
            message: message.into(),
            subject,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}[{}] {}: {}", self.code, self.subject, self.message)
    }
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(Diagnostic::is_error)
}

/// Runs every rule and returns diagnostics ordered by code, then subject id.
pub fn validate(graph: &NarrativeGraph) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let start_ok = match &graph.start_node {
        Some(s) if graph.nodes.contains_key(s) => true,
        Some(s) => {
            out.push(Diagnostic::new(
                Code::E001,
                Subject::Graph,
                format!("start node `{s}` is not a node of the graph"),
            ));
            false
        }
        None => {
            if !graph.nodes.is_empty() {
                out.push(Diagnostic::new(
                    Code::E001,
                    Subject::Graph,
                    "graph has nodes but no start node",
                ));
            }
            false
        }
    };

    for edge in &graph.edges {
        for (end, role) in [(&edge.from, "source"), (&edge.to, "target")] {
            if !graph.nodes.contains_key(end) {
                out.push(Diagnostic::new(
                    Code::E002,
                    Subject::Edge(edge.id.clone()),
                    format!("{role} `{end}` is not a node of the graph"),
                ));
            }
        }
    }

    let mut labels: BTreeMap<(&NodeId, String), usize> = BTreeMap::new();
    for edge in &graph.edges {
        *labels.entry((&edge.from, edge.intent.label_key())).or_default() += 1;
    }
    for ((node, label), count) in labels {
        if count > 1 {
            out.push(Diagnostic::new(
                Code::E003,
                Subject::Node(node.clone()),
                format!("{count} outgoing intents share the label `{label}`"),
            ));
        }
    }

    let mut edge_ids: HashMap<&EdgeId, usize> = HashMap::new();
    for edge in &graph.edges {
        *edge_ids.entry(&edge.id).or_default() += 1;
    }
    let mut dup_edges: Vec<_> = edge_ids.into_iter().filter(|(_, n)| *n > 1).collect();
    dup_edges.sort();
    for (id, n) in dup_edges {
        out.push(Diagnostic::new(
            Code::E004,
            Subject::Edge(id.clone()),
            format!("edge id used {n} times"),
        ));
    }
    for (key, node) in &graph.nodes {
        if &node.id != key {
            let subject = Subject::Node(node.id.clone());
            let message = if graph.nodes.contains_key(&node.id) {
                format!("node id `{}` is used more than once", node.id)
            } else {
                format!("node stored under `{key}` declares id `{}`", node.id)
            };
            out.push(Diagnostic::new(Code::E004, subject, message));
        }
    }

    let reachable = if start_ok {
        reachable_from(graph, graph.start_node.as_ref().unwrap())
    } else {
        BTreeSet::new()
    };
    for id in graph.nodes.keys() {
        if !reachable.contains(id) {
            out.push(Diagnostic::new(
                Code::W001,
                Subject::Node(id.clone()),
                "node is unreachable from the start node",
            ));
        }
    }

    let mut out_degree: HashMap<&NodeId, usize> = HashMap::new();
    for edge in &graph.edges {
        *out_degree.entry(&edge.from).or_default() += 1;
    }
    for (id, node) in &graph.nodes {
        let degree = out_degree.get(id).copied().unwrap_or(0);
        if node.terminal && degree > 0 {
            out.push(Diagnostic::new(
                Code::W002,
                Subject::Node(id.clone()),
                format!("terminal node has {degree} outgoing edge(s)"),
            ));
        } else if !node.terminal && degree == 0 {
            out.push(Diagnostic::new(
                Code::W003,
                Subject::Node(id.clone()),
                "non-terminal node has no outgoing edges",
            ));
        }
    }

    out.sort_by(|a, b| {
        (a.code, a.subject.sort_key(), &a.message).cmp(&(b.code, b.subject.sort_key(), &b.message))
    });
    out
}

fn reachable_from<'g>(graph: &'g NarrativeGraph, start: &'g NodeId) -> BTreeSet<&'g NodeId> {
    let mut adjacency: HashMap<&NodeId, Vec<&NodeId>> = HashMap::new();
    for edge in &graph.edges {
        if graph.nodes.contains_key(&edge.to) {
            adjacency.entry(&edge.from).or_default().push(&edge.to);
        }
    }
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(n) = stack.pop() {
        for &next in adjacency.get(n).into_iter().flatten() {
            if seen.insert(next) {
                stack.push(next);
            }
        }
    }
    seen
}

/// Nodes reachable from the start node by breadth-first walk.
pub fn reachable_nodes(graph: &NarrativeGraph) -> Vec<NodeId> {
    let Some(start) = graph.start_node.as_ref().filter(|s| graph.nodes.contains_key(*s)) else {
        return Vec::new();
    };
    let mut order = vec![start.clone()];
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        for edge in graph.edges.iter().filter(|e| &e.from == n) {
            if graph.nodes.contains_key(&edge.to) && seen.insert(&edge.to) {
                order.push(edge.to.clone());
                queue.push_back(&edge.to);
            }
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{DialogueMode, Mutation, ResponseIntent, SceneNode, TransitionEdge};

    fn codes(d: &[Diagnostic]) -> Vec<Code> {
        d.iter().map(|d| d.code).collect()
    }

    fn base() -> NarrativeGraph {
        NarrativeGraph::new("T", DialogueMode::Strict)
            .unwrap()
            .apply_all([
                Mutation::AddNode(SceneNode::new("a", "a")),
                Mutation::AddNode(SceneNode::new("b", "b").terminal(true)),
                Mutation::AddEdge(TransitionEdge::new("e1", "a", "b", ResponseIntent::new("go"))),
            ])
            .unwrap()
    }

    #[test]
    fn clean_graph_has_no_diagnostics() {
        assert!(validate(&base()).is_empty());
    }

    #[test]
    fn empty_graph_is_clean() {
        let g = NarrativeGraph::new("T", DialogueMode::Strict).unwrap();
        assert!(validate(&g).is_empty());
    }

    #[test]
    fn missing_start_is_e001() {
        let mut g = base();
        g.start_node = Some("ghost".into());
        assert!(codes(&validate(&g)).contains(&Code::E001));
        g.start_node = None;
        assert!(codes(&validate(&g)).contains(&Code::E001));
    }

    #[test]
    fn dangling_endpoint_is_e002() {
        let mut g = base();
        g.edges.push(TransitionEdge::new("e2", "a", "zz", ResponseIntent::new("x")));
        let d = validate(&g);
        assert_eq!(codes(&d), [Code::E002]);
        assert_eq!(d[0].subject, Subject::Edge("e2".into()));
    }

    #[test]
    fn shared_label_is_e003() {
        let mut g = base();
        g.edges.push(TransitionEdge::new("e2", "a", "b", ResponseIntent::new("GO")));
        assert_eq!(codes(&validate(&g)), [Code::E003]);
    }

    #[test]
    fn reused_ids_are_e004() {
        let mut g = base();
        g.edges.push(TransitionEdge::new("e1", "b", "a", ResponseIntent::new("back")));
        assert!(codes(&validate(&g)).contains(&Code::E004));

        let mut g = base();
        let mut clone = g.nodes["b"].clone();
        clone.id = "a".into();
        g.nodes.insert("b".into(), clone);
        assert!(codes(&validate(&g)).contains(&Code::E004));
    }

    #[test]
    fn warnings() {
        let g = base()
            .apply_all([
                Mutation::AddNode(SceneNode::new("island", "alone")),
                Mutation::AddEdge(TransitionEdge::new("e2", "b", "a", ResponseIntent::new("back"))),
            ])
            .unwrap();
        let d = validate(&g);
        assert_eq!(codes(&d), [Code::W001, Code::W002, Code::W003]);
        assert!(!has_errors(&d));
    }

    #[test]
    fn order_is_by_code_then_subject() {
        let mut g = base();
        g.start_node = Some("ghost".into());
        g.edges.push(TransitionEdge::new("z", "a", "q", ResponseIntent::new("x")));
        g.edges.push(TransitionEdge::new("m", "a", "q", ResponseIntent::new("y")));
        let d = validate(&g);
        let keys: Vec<_> = d.iter().map(|d| (d.code, d.subject.sort_key().to_string())).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(d, validate(&g));
    }

    #[test]
    fn bfs_order() {
        let order = reachable_nodes(&base());
        assert_eq!(order, vec![NodeId::from("a"), NodeId::from("b")]);
    }
}
