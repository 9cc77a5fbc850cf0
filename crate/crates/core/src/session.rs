//! Conversational simulator: one student's walk through a narrative graph.
//!
//! A turn runs classify → resolve → (advance | generate branch | reject) →
//! feedback. Every step works on borrowed snapshots and returns new values, so
//! a failing turn leaves the caller's session and graph exactly as they were.

use std::sync::atomic::{AtomicI64, Ordering};

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::to_canonical_string;
use crate::graph::{DialogueMode, GraphError, Mutation, NarrativeGraph, Provenance, ResponseIntent, SceneNode, TransitionEdge};
use crate::ids::{generated_id, EdgeId, GraphId, NodeId, SessionId};
use crate::llm::{
    classify_intent, compose_feedback, propose_branch, DecisionSummary, GatewayError, IntentMatch, OutcomeKind,
    ProviderHandle,
};
use crate::validate::{validate, Diagnostic};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Hint given when a strict scene offers nothing to match against.
pub const NO_OPTIONS_HINT: &str = "no options";

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Starts at a fixed instant and advances one second per reading.
#[derive(Debug)]
pub struct SteppingClock {
    next: AtomicI64,
}

impl SteppingClock {
    pub fn starting_at(secs_since_epoch: i64) -> Self {
        Self {
            next: AtomicI64::new(secs_since_epoch),
        }
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> DateTime<Utc> {
        let secs = self.next.fetch_add(1, Ordering::SeqCst);
        Utc.timestamp_opt(secs, 0).single().expect("in range")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Active,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatchDecision {
    Matched { edge_id: EdgeId, confidence: f64 },
    GeneratedBranch { edge_id: EdgeId, node_id: NodeId },
    Rejected { best_confidence: f64, hint: String },
}

impl MatchDecision {
    pub fn kind(&self) -> OutcomeKind {
        match self {
            MatchDecision::Matched { .. } => OutcomeKind::Matched,
            MatchDecision::GeneratedBranch { .. } => OutcomeKind::GeneratedBranch,
            MatchDecision::Rejected { .. } => OutcomeKind::Rejected,
        }
    }

    /// The edge taken, if the turn moved along one.
    pub fn edge_id(&self) -> Option<&EdgeId> {
        match self {
            MatchDecision::Matched { edge_id, .. } | MatchDecision::GeneratedBranch { edge_id, .. } => Some(edge_id),
            MatchDecision::Rejected { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub student_utterance: String,
    pub decision: MatchDecision,
    pub avatar_reply: String,
    pub feedback: String,
    pub from_node: NodeId,
    pub to_node: NodeId,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Session {
    pub id: SessionId,
    pub graph_id: GraphId,
    pub graph_version_at_start: u64,
    pub current_node: NodeId,
    pub transcript: Vec<Turn>,
    pub status: SessionStatus,
    #[serde(rename = "threshold")]
    pub match_threshold: f64,
    pub created_at: DateTime<Utc>,
}

impl Session {
    pub fn is_active(&self) -> bool {
        self.status == SessionStatus::Active
    }

    pub fn to_json(&self) -> String {
        to_canonical_string(self).expect("sessions serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("graph has {} error diagnostic(s)", .0.len())]
    InvalidGraph(Vec<Diagnostic>),
    #[error("graph has no scenes")]
    EmptyGraph,
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("session is already completed")]
    SessionCompleted,
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error("session belongs to graph `{expected}`, not `{found}`")]
    GraphMismatch { expected: GraphId, found: GraphId },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Provider(#[from] GatewayError),
}

/// Outcome of thresholding a ranked match list.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolution {
    Matched(IntentMatch),
    NoMatch(f64),
}

/// Takes the top match if it clears `threshold`; otherwise reports its
/// confidence (0 for an empty list).
pub fn resolve_match(matches: &[IntentMatch], threshold: f64) -> Resolution {
    match matches.first() {
        Some(top) if top.confidence >= threshold => Resolution::Matched(top.clone()),
        Some(top) => Resolution::NoMatch(top.confidence),
        None => Resolution::NoMatch(0.0),
    }
}

/// Runs sessions against one model backend and clock.
pub struct SessionEngine {
    provider: ProviderHandle,
    clock: Box<dyn Clock>,
}

impl std::fmt::Debug for SessionEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionEngine").field("provider", &self.provider).finish_non_exhaustive()
    }
}

impl SessionEngine {
    pub fn new(provider: ProviderHandle) -> Self {
        Self::with_clock(provider, SystemClock)
    }

    pub fn with_clock(provider: ProviderHandle, clock: impl Clock + 'static) -> Self {
        Self {
            provider,
            clock: Box::new(clock),
        }
    }

    pub fn provider(&self) -> &ProviderHandle {
        &self.provider
    }

    /// Opens a session at the graph's start scene and returns the avatar's
    /// opening line.
    pub fn start_session(
        &self,
        graph: &NarrativeGraph,
        threshold: Option<f64>,
    ) -> Result<(Session, String), SessionError> {
        let threshold = threshold.unwrap_or(DEFAULT_THRESHOLD);
        if !(0.0..=1.0).contains(&threshold) {
            return Err(SessionError::InvalidThreshold(threshold));
        }
        if graph.nodes.is_empty() {
            return Err(SessionError::EmptyGraph);
        }
        let errors: Vec<_> = validate(graph).into_iter().filter(Diagnostic::is_error).collect();
        if !errors.is_empty() {
            return Err(SessionError::InvalidGraph(errors));
        }
        let start = graph.start().expect("validated graph has a start scene");
        let session = Session {
            id: SessionId::fresh(),
            graph_id: graph.id.clone(),
            graph_version_at_start: graph.version,
            current_node: start.id.clone(),
            transcript: Vec::new(),
            status: SessionStatus::Active,
            match_threshold: threshold,
            created_at: self.clock.now(),
        };
        Ok((session, start.avatar_utterance.clone()))
    }

    /// Processes one student utterance.
    ///
    /// Returns the updated session, the (possibly extended) graph and the
    /// recorded turn. On error nothing is returned and the inputs are untouched.
    pub fn submit_turn(
        &self,
        session: &Session,
        graph: &NarrativeGraph,
        utterance: &str,
    ) -> Result<(Session, NarrativeGraph, Turn), SessionError> {
        if !session.is_active() {
            return Err(SessionError::SessionCompleted);
        }
        let utterance = utterance.trim();
        if utterance.is_empty() {
            return Err(SessionError::EmptyUtterance);
        }
        if session.graph_id != graph.id {
            return Err(SessionError::GraphMismatch {
                expected: session.graph_id.clone(),
                found: graph.id.clone(),
            });
        }
        let from = session.current_node.clone();
        let scene = graph
            .node(from.as_str())
            .ok_or_else(|| GraphError::UnknownNode(from.clone()))?;
        let outgoing = graph.outgoing_edges(from.as_str())?;
        let labels: Vec<String> = outgoing.iter().map(|e| e.intent.label.clone()).collect();

        let resolution = if outgoing.is_empty() {
            Resolution::NoMatch(0.0)
        } else {
            let candidates: Vec<(EdgeId, ResponseIntent)> =
                outgoing.iter().map(|e| (e.id.clone(), e.intent.clone())).collect();
            let matches = classify_intent(&self.provider, utterance, &candidates)?;
            resolve_match(&matches, session.match_threshold)
        };

        let mut next_graph = graph.clone();
        let (decision, to, avatar_reply, label) = match resolution {
            Resolution::Matched(m) => {
                let edge = graph.edge(m.edge_id.as_str()).expect("classified edge exists");
                let target = graph.node(edge.to.as_str()).ok_or_else(|| GraphError::UnknownNode(edge.to.clone()))?;
                (
                    MatchDecision::Matched {
                        edge_id: m.edge_id,
                        confidence: m.confidence,
                    },
                    target.id.clone(),
                    target.avatar_utterance.clone(),
                    Some(edge.intent.label.clone()),
                )
            }
            Resolution::NoMatch(_) if graph.mode == DialogueMode::Flexible => {
                let proposal = propose_branch(&self.provider, scene, utterance, &labels)?;
                let id = generated_id(graph.next_generated_counter());
                let node_id = NodeId::from(id.as_str());
                let edge_id = EdgeId::from(id.as_str());
                next_graph = graph.apply_all([
                    Mutation::AddNode(
                        SceneNode::new(node_id.clone(), proposal.avatar_reply.clone())
                            .with_description(proposal.scene_description.clone())
                            .terminal(proposal.terminal)
                            .with_provenance(Provenance::Generated),
                    ),
                    Mutation::AddEdge(
                        TransitionEdge::new(
                            edge_id.clone(),
                            from.clone(),
                            node_id.clone(),
                            ResponseIntent::new(proposal.intent_label.clone())
                                .with_description(proposal.intent_description.clone())
                                .with_examples([utterance]),
                        )
                        .with_provenance(Provenance::Generated),
                    ),
                ])?;
                (
                    MatchDecision::GeneratedBranch {
                        edge_id,
                        node_id: node_id.clone(),
                    },
                    node_id,
                    proposal.avatar_reply,
                    Some(proposal.intent_label),
                )
            }
            Resolution::NoMatch(best) => {
                let hint = if labels.is_empty() {
                    NO_OPTIONS_HINT.to_string()
                } else {
                    labels.join(", ")
                };
                (
                    MatchDecision::Rejected {
                        best_confidence: best,
                        hint,
                    },
                    from.clone(),
                    scene.avatar_utterance.clone(),
                    None,
                )
            }
        };

        let summary = DecisionSummary {
            kind: decision.kind(),
            intent_label: label,
            confidence: match &decision {
                MatchDecision::Matched { confidence, .. } => Some(*confidence),
                MatchDecision::Rejected { best_confidence, .. } => Some(*best_confidence),
                MatchDecision::GeneratedBranch { .. } => None,
            },
            hint: match &decision {
                MatchDecision::Rejected { hint, .. } => Some(hint.clone()),
                _ => None,
            },
        };
        let feedback = compose_feedback(&self.provider, scene, utterance, &summary)?;

        let turn = Turn {
            index: session.transcript.len(),
            student_utterance: utterance.to_string(),
            decision,
            avatar_reply,
            feedback,
            from_node: from,
            to_node: to.clone(),
            at: self.clock.now(),
        };
        let mut next = session.clone();
        next.transcript.push(turn.clone());
        let arrived_terminal = next_graph.node(to.as_str()).is_some_and(|n| n.terminal);
        next.current_node = to;
        if arrived_terminal {
            next.status = SessionStatus::Completed;
        }
        Ok((next, next_graph, turn))
    }

    pub fn end_session(&self, session: &Session) -> Result<Session, SessionError> {
        end_session(session)
    }
}

/// Marks an active session completed, leaving its transcript alone.
pub fn end_session(session: &Session) -> Result<Session, SessionError> {
    if !session.is_active() {
        return Err(SessionError::SessionCompleted);
    }
    let mut next = session.clone();
    next.status = SessionStatus::Completed;
    Ok(next)
}
