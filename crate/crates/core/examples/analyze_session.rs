//! Runs a few sessions, then prints a report, a cohort summary and a path overlay.

use gloss_core::{cohort_summary, instantiate_template, overlay_dot, path_of, session_report, ProviderHandle, SessionEngine};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut graph = instantiate_template("customer-service")?;
    let engine = SessionEngine::new(ProviderHandle::mock());
    let scripts: [&[&str]; 3] = [
        &["I am sorry for the inconvenience", "let me get you a replacement"],
        &["calm down", "that is our policy"],
        &["I understand how frustrating this is", "would a refund help"],
    ];
    let mut sessions = Vec::new();
    for script in scripts {
        let (mut s, _) = engine.start_session(&graph, Some(0.3))?;
        for line in script {
            if !s.is_active() {
                break;
            }
            let (next, next_graph, _) = engine.submit_turn(&s, &graph, line)?;
            s = next;
            graph = next_graph;
        }
        sessions.push(s);
    }

    let first = &sessions[0];
    println!("path: {}", path_of(first, &graph)?.to_ids().join(" -> "));
    println!("report: {}", serde_json::to_string_pretty(&session_report(first))?);

    let cohort = cohort_summary(&graph, &sessions)?;
    for (edge, count) in cohort.edge_traversals.iter().filter(|(_, c)| **c > 0) {
        println!("edge {edge}: {count}");
    }
    println!("{}", overlay_dot(&graph, first)?);
    Ok(())
}
