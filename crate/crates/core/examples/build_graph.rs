//! Builds a small scenario with mutations and prints its diagnostics.

use gloss_core::{validate, DialogueMode, Mutation, NarrativeGraph, ResponseIntent, SceneNode, TransitionEdge};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let empty = NarrativeGraph::new("Late Delivery", DialogueMode::Strict)?;
    let graph = empty.apply_all([
        Mutation::AddNode(SceneNode::new("open", "Where is my parcel? It was due on Monday.")),
        Mutation::AddNode(SceneNode::new("calm", "Okay, thanks for checking.").terminal(true)),
        Mutation::AddNode(SceneNode::new("angry", "That is not good enough!")),
        Mutation::AddEdge(TransitionEdge::new(
            "e-sorry",
            "open",
            "calm",
            ResponseIntent::new("apologize").with_examples(["I'm sorry, let me look into it"]),
        )),
        Mutation::AddEdge(TransitionEdge::new(
            "e-blame",
            "open",
            "angry",
            ResponseIntent::new("deflect").with_examples(["the courier is responsible"]),
        )),
    ])?;
    println!("{} v{}: {} scenes, {} transitions", graph.title, graph.version, graph.nodes.len(), graph.edges.len());

    // "angry" has no way out and is not terminal.
    for d in validate(&graph) {
        println!("  {d}");
    }

    let fixed = graph.apply(Mutation::UpdateNode(SceneNode::new("angry", "That is not good enough!").terminal(true)))?;
    println!("after fix v{}: {} diagnostic(s)", fixed.version, validate(&fixed).len());

    match fixed.apply(Mutation::RemoveNode("calm".into())) {
        Ok(g) => println!("removed `calm` and its incoming transitions: {} left", g.edges.len()),
        Err(e) => println!("refused: {e}"),
    }
    Ok(())
}
