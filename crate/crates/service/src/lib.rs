//! Persistence, HTTP API and command line for `gloss-core`.
//!
//! The service keeps one JSON file per graph and per session under a data
//! directory ([`store::DocumentStore`]) and exposes the engine over HTTP
//! ([`api::router`]). The `gloss` binary wraps [`cli::run`].

pub mod api;
pub mod cli;
pub mod store;

pub use api::{router, serve, ApiError, AppState};
pub use store::{DocumentStore, Kind, StoreError, StoredDocument};
