//! Talks to an OpenAI-compatible endpoint configured through the environment:
//! GLOSS_PROVIDER=remote GLOSS_BASE_URL=... GLOSS_API_KEY=... GLOSS_MODEL=...

use gloss_core::{generate_graph, ProviderConfig, ProviderHandle};

fn main() {
    let config = match ProviderConfig::from_env() {
        Ok(ProviderConfig::Mock) => {
            println!("GLOSS_PROVIDER is not `remote`; nothing to do");
            return;
        }
        Ok(config) => config,
        Err(e) => {
            println!("remote provider not configured: {e}");
            return;
        }
    };
    let provider = ProviderHandle::from_config(&config);
    match generate_graph(&provider, "a student asking a teacher for an extension") {
        Ok(g) => println!("{}: {} scenes, {} transitions", g.title, g.nodes.len(), g.edges.len()),
        Err(e) => eprintln!("generation failed: {e}"),
    }
}
