//! Stores graphs and sessions on disk with optimistic concurrency.

use gloss_core::{instantiate_template, ProviderHandle, SessionEngine};
use gloss_service::{DocumentStore, Kind, StoreError};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let store = DocumentStore::open(dir.path())?;

    let graph = store.put_graph(&instantiate_template("customer-service")?, None)?;
    println!("stored graph {} at version {}", graph.id, graph.version);

    let mut edited = graph.clone();
    edited.title = "Angry Customer (evening shift)".into();
    let edited = store.put_graph(&edited, Some(graph.version))?;
    println!("edit accepted, now version {}", edited.version);

    match store.put_graph(&graph, Some(graph.version)) {
        Err(StoreError::VersionConflict { current, .. }) => println!("stale edit refused, current is {current:?}"),
        other => println!("unexpected: {other:?}"),
    }

    let engine = SessionEngine::new(ProviderHandle::mock());
    let (session, _) = engine.start_session(&edited, None)?;
    let (session, _, _) = engine.submit_turn(&session, &edited, "I am sorry for the inconvenience")?;
    let version = store.put_session(&session, None)?;
    println!("session {} saved at version {version}", session.id);

    for doc in store.list(Kind::Graph)?.iter().chain(&store.list(Kind::Session)?) {
        println!("  {:?} {} v{}", doc.kind, doc.id, doc.version);
    }
    println!("files live under {}", store.root().display());
    Ok(())
}
