//! Plays a scripted student through a template in both dialogue modes.

use gloss_core::session::SteppingClock;
use gloss_core::{instantiate_template, DialogueMode, MatchDecision, NarrativeGraph, ProviderHandle, SessionEngine};

const STUDENT: [&str; 4] = [
    "I am so sorry about the wait",
    "purple elephants",
    "let me get you a replacement",
    "thank you for your patience",
];

fn play(mode: DialogueMode) -> Result<(), Box<dyn std::error::Error>> {
    let mut graph = NarrativeGraph { mode, ..instantiate_template("customer-service")? };
    let engine = SessionEngine::with_clock(ProviderHandle::mock(), SteppingClock::starting_at(1_700_000_000));
    let (mut session, opening) = engine.start_session(&graph, Some(0.4))?;
    println!("== {} mode ==\navatar: {opening}", mode.as_str());
    for line in STUDENT {
        if !session.is_active() {
            break;
        }
        let (next, next_graph, turn) = engine.submit_turn(&session, &graph, line)?;
        let how = match &turn.decision {
            MatchDecision::Matched { confidence, .. } => format!("matched {confidence:.2}"),
            MatchDecision::GeneratedBranch { node_id, .. } => format!("new branch {node_id}"),
            MatchDecision::Rejected { hint, .. } => format!("rejected, try: {hint}"),
        };
        println!("student: {line}\n  ({how})\navatar: {}\nfeedback: {}", turn.avatar_reply, turn.feedback);
        session = next;
        graph = next_graph;
    }
    println!("graph version {} with {} scenes\n", graph.version, graph.nodes.len());
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    play(DialogueMode::Strict)?;
    play(DialogueMode::Flexible)
}
