//! Parses the text format, reports diagnostics and converts to JSON and DOT.

use gloss_core::{parse_dsl, render_dot, render_dsl, to_json};

const SOURCE: &str = r#"
graph "Asking for a raise" mode=flexible start=ask
node ask avatar="You wanted to talk to me?"
node open avatar="Tell me more about what you have in mind." terminal=true
node closed avatar="Budgets are frozen this year." terminal=true
edge e1 ask -> open intent=evidence examples=["I led the migration project", "here are my results"]
edge e2 ask -> closed intent=demand examples=["I deserve more money"]
"#;

fn main() {
    let (graph, diagnostics) = parse_dsl(SOURCE);
    for d in &diagnostics {
        println!("diagnostic: {d}");
    }
    let Some(graph) = graph else {
        eprintln!("could not parse");
        std::process::exit(1);
    };
    println!("--- canonical text ---\n{}", render_dsl(&graph).expect("renderable"));
    println!("--- JSON ---\n{}", to_json(&graph));
    println!("--- DOT ---\n{}", render_dot(&graph, None).expect("renderable"));

    let (_, broken) = parse_dsl("graph \"Oops\"\nnode a avatar=\"hi\"\nedge e1 a -> b intent=x\n");
    for d in broken {
        println!("broken input: {d}");
    }
}
