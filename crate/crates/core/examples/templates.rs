//! Lists the bundled templates and instantiates one.

use gloss_core::authoring::templates::templates;
use gloss_core::{instantiate_template, validate};

fn main() {
    for t in templates() {
        println!("{:<20} {} ({} scenes)", t.id, t.title, t.graph.nodes.len());
    }
    let graph = instantiate_template("coworker-feedback").expect("bundled template");
    println!("instantiated `{}` as {}", graph.title, graph.id);
    println!("diagnostics: {}", validate(&graph).len());
    if let Some(start) = graph.start() {
        println!("opening line: {}", start.avatar_utterance);
    }
}
