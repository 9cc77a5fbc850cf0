//! Instructor-in-the-loop social-skills training engine.
//!
//! Instructors author a [`NarrativeGraph`] of scenes and intent-labelled
//! transitions (by hand, from a template, or with a language model); students
//! rehearse it through a [`SessionEngine`] that matches each reply to an
//! outgoing intent, grows the graph when nothing fits, and returns per-turn
//! feedback; the [`analysis`] module turns transcripts into paths, reports
//! and cohort counts for later review.
//!
//! Runnable walkthroughs live in `examples/`.

pub mod analysis;
pub mod authoring;
pub mod canonical;
pub mod graph;
pub mod ids;
pub mod llm;
pub mod path;
pub mod session;
#[cfg(feature = "testkit")]
pub mod testkit;
pub mod validate;

pub use analysis::{cohort_summary, overlay_dot, path_of, session_report, CohortSummary, SessionReport};
pub use authoring::{
    expand_node, from_json, generate_graph, instantiate_template, parse_dsl, render_dot, render_dsl, to_json,
};
pub use graph::{
    DialogueMode, GraphError, Mutation, NarrativeGraph, Provenance, ResponseIntent, SceneNode, TransitionEdge,
};
pub use ids::{EdgeId, GraphId, NodeId, SessionId};
pub use llm::{ProviderConfig, ProviderHandle};
pub use path::Path;
pub use session::{resolve_match, MatchDecision, Session, SessionEngine, SessionError, SessionStatus, Turn};
pub use validate::{validate, Diagnostic, Severity};
