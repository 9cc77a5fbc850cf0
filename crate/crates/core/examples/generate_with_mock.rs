//! Drafts a scenario from a prompt, then expands one scene.

use gloss_core::{expand_node, generate_graph, validate, ProviderHandle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let provider = ProviderHandle::mock();
    let draft = generate_graph(&provider, "a tenant complaining about a noisy neighbour")?;
    println!("draft `{}`: {} scenes, {} transitions", draft.title, draft.nodes.len(), draft.edges.len());
    for node in draft.nodes.values() {
        println!("  {} [{}] {}", node.id, node.provenance.as_str(), node.avatar_utterance);
    }

    let start = draft.start_node.clone().expect("drafts have a start");
    let expanded = expand_node(&provider, &draft, start.as_str(), "add a response that sets a boundary")?;
    println!(
        "expanded {start}: v{} -> v{}, {} new transition(s), {} diagnostic(s)",
        draft.version,
        expanded.version,
        expanded.edges.len() - draft.edges.len(),
        validate(&expanded).len()
    );
    for d in validate(&expanded) {
        println!("  {d}");
    }
    Ok(())
}
