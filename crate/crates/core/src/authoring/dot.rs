//! Graphviz export.
//!
//! Output is a plain `digraph` with quoted ids. Node labels are the scene id
//! and the first 40 characters of the avatar utterance; edge labels are the
//! intent label. Terminal scenes are drawn as `doublecircle`, generated
//! elements as `style=dashed`, and highlighted elements carry `penwidth=3`.

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{NarrativeGraph, Provenance};
use crate::ids::{EdgeId, NodeId};
use crate::path::Path;

pub const HIGHLIGHT_ATTR: &str = "penwidth=3";
const LABEL_CHARS: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DotError {
    #[error("highlight references unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("highlight references unknown edge `{0}`")]
    UnknownEdge(EdgeId),
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out
}

pub fn render_dot(graph: &NarrativeGraph, highlight: Option<&Path>) -> Result<String, DotError> {
    let mut hot_nodes: HashSet<&str> = HashSet::new();
    let mut hot_edges: HashSet<&str> = HashSet::new();
    if let Some(path) = highlight {
        for n in path.nodes() {
            if !graph.nodes.contains_key(n) {
                return Err(DotError::UnknownNode(n.clone()));
            }
            hot_nodes.insert(n.as_str());
        }
        for e in path.edges() {
            if graph.edge(e.as_str()).is_none() {
                return Err(DotError::UnknownEdge(e.clone()));
            }
            hot_edges.insert(e.as_str());
        }
    }

    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", escape(&graph.title));
    for node in graph.nodes.values() {
        let excerpt: String = node.avatar_utterance.chars().take(LABEL_CHARS).collect();
        let mut attrs = vec![format!(
            "label=\"{}\\n{}\"",
            escape(node.id.as_str()),
            escape(&excerpt)
        )];
        if node.terminal {
            attrs.push("shape=doublecircle".into());
        }
        if node.provenance == Provenance::Generated {
            attrs.push("style=dashed".into());
        }
        if hot_nodes.contains(node.id.as_str()) {
            attrs.push(HIGHLIGHT_ATTR.into());
        }
        let _ = writeln!(out, "  \"{}\" [{}];", escape(node.id.as_str()), attrs.join(", "));
    }
    for edge in &graph.edges {
        let mut attrs = vec![
            format!("id=\"{}\"", escape(edge.id.as_str())),
            format!("label=\"{}\"", escape(&edge.intent.label)),
        ];
        if edge.provenance == Provenance::Generated {
            attrs.push("style=dashed".into());
        }
        if hot_edges.contains(edge.id.as_str()) {
            attrs.push(HIGHLIGHT_ATTR.into());
        }
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [{}];",
            escape(edge.from.as_str()),
            escape(edge.to.as_str()),
            attrs.join(", ")
        );
    }
    out.push_str("}\n");
    Ok(out)
}
