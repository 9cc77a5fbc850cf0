//! Post-session review: paths through the graph, per-session reports and
//! cohort traversal counts. Everything here is recomputed from transcripts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::authoring::dot::render_dot;
use crate::graph::NarrativeGraph;
use crate::ids::{EdgeId, GraphId, NodeId, SessionId};
use crate::llm::OutcomeKind;
use crate::path::Path;
use crate::session::{MatchDecision, Session};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("session {session} turn {turn}: {reason}")]
    InconsistentTranscript {
        session: SessionId,
        turn: usize,
        reason: String,
    },
    #[error("session {session} belongs to graph `{expected}`, not `{found}`")]
    WrongGraph {
        session: SessionId,
        expected: GraphId,
        found: GraphId,
    },
}

/// Replays the non-rejected turns of `session` over `graph`.
pub fn path_of(session: &Session, graph: &NarrativeGraph) -> Result<Path, AnalysisError> {
    let broken = |turn: usize, reason: String| AnalysisError::InconsistentTranscript {
        session: session.id.clone(),
        turn,
        reason,
    };
    let start = session
        .transcript
        .first()
        .map_or(&session.current_node, |t| &t.from_node);
    if !graph.nodes.contains_key(start) {
        return Err(broken(0, format!("start node `{start}` is not in the graph")));
    }
    let mut path = Path::new(start.clone());
    for turn in &session.transcript {
        let at = path.last().clone();
        if turn.from_node != at {
            return Err(broken(
                turn.index,
                format!("turn starts at `{}` but the path is at `{at}`", turn.from_node),
            ));
        }
        let Some(edge_id) = turn.decision.edge_id() else {
            if turn.to_node != turn.from_node {
                return Err(broken(turn.index, "rejected turn moved".into()));
            }
            continue;
        };
        let edge = graph
            .edge(edge_id.as_str())
            .ok_or_else(|| broken(turn.index, format!("edge `{edge_id}` is not in the graph")))?;
        if edge.from != at || edge.to != turn.to_node {
            return Err(broken(
                turn.index,
                format!(
                    "edge `{edge_id}` runs `{}` -> `{}`, turn runs `{at}` -> `{}`",
                    edge.from, edge.to, turn.to_node
                ),
            ));
        }
        if let MatchDecision::GeneratedBranch { node_id, .. } = &turn.decision {
            if node_id != &edge.to {
                return Err(broken(turn.index, format!("generated node `{node_id}` is not the edge target")));
            }
        }
        if !graph.nodes.contains_key(&edge.to) {
            return Err(broken(turn.index, format!("node `{}` is not in the graph", edge.to)));
        }
        path.push(edge.id.clone(), edge.to.clone());
    }
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnSummary {
    pub index: usize,
    pub decision: OutcomeKind,
    pub feedback: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: SessionId,
    pub turns_total: usize,
    pub matched_count: usize,
    pub generated_count: usize,
    pub rejected_count: usize,
    pub completed: bool,
    pub mean_confidence_of_matched: f64,
    pub per_turn: Vec<TurnSummary>,
}

pub fn session_report(session: &Session) -> SessionReport {
    let mut matched = Vec::new();
    let (mut generated, mut rejected) = (0, 0);
    let mut per_turn = Vec::with_capacity(session.transcript.len());
    for turn in &session.transcript {
        match &turn.decision {
            MatchDecision::Matched { confidence, .. } => matched.push(*confidence),
            MatchDecision::GeneratedBranch { .. } => generated += 1,
            MatchDecision::Rejected { .. } => rejected += 1,
        }
        per_turn.push(TurnSummary {
            index: turn.index,
            decision: turn.decision.kind(),
            feedback: turn.feedback.clone(),
        });
    }
    let mean = if matched.is_empty() {
        0.0
    } else {
        matched.iter().sum::<f64>() / matched.len() as f64
    };
    SessionReport {
        session_id: session.id.clone(),
        turns_total: session.transcript.len(),
        matched_count: matched.len(),
        generated_count: generated,
        rejected_count: rejected,
        completed: !session.is_active(),
        mean_confidence_of_matched: mean,
        per_turn,
    }
}

/// How often each edge was taken and each scene visited across sessions.
/// Every edge and node of the graph is present, untraversed ones with 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub graph_id: GraphId,
    pub sessions: usize,
    pub edge_traversals: BTreeMap<EdgeId, u64>,
    /// Start scenes count once per session.
    pub node_visits: BTreeMap<NodeId, u64>,
}

pub fn cohort_summary(graph: &NarrativeGraph, sessions: &[Session]) -> Result<CohortSummary, AnalysisError> {
    let mut edges: BTreeMap<EdgeId, u64> = graph.edges.iter().map(|e| (e.id.clone(), 0)).collect();
    let mut nodes: BTreeMap<NodeId, u64> = graph.nodes.keys().map(|n| (n.clone(), 0)).collect();
    for session in sessions {
        if session.graph_id != graph.id {
            return Err(AnalysisError::WrongGraph {
                session: session.id.clone(),
                expected: graph.id.clone(),
                found: session.graph_id.clone(),
            });
        }
        let path = path_of(session, graph)?;
        for e in path.edges() {
            *edges.entry(e.clone()).or_default() += 1;
        }
        for n in path.nodes() {
            *nodes.entry(n.clone()).or_default() += 1;
        }
    }
    Ok(CohortSummary {
        graph_id: graph.id.clone(),
        sessions: sessions.len(),
        edge_traversals: edges,
        node_visits: nodes,
    })
}

/// DOT rendering of `graph` with the session's path highlighted.
pub fn overlay_dot(graph: &NarrativeGraph, session: &Session) -> Result<String, AnalysisError> {
    let path = path_of(session, graph)?;
    Ok(render_dot(graph, Some(&path)).expect("path_of only yields ids present in the graph"))
}
