//! Back end of the scenario builder: persistence, text authoring, export,
//! templates and model-assisted generation.

pub mod dot;
pub mod dsl;
pub mod generate;
pub mod json;
pub mod templates;

pub use dot::{render_dot, DotError};
pub use dsl::{parse_dsl, render_dsl, ParseDiagnostic, RenderError};
pub use generate::{expand_node, generate_graph, GenerateError};
pub use json::{from_json, to_json, JsonError};
pub use templates::{instantiate_template, Template, TemplateError};

use crate::graph::NarrativeGraph;

/// Loads a graph from either JSON or scenario text, sniffing the first
/// non-blank character.
pub fn load_graph(text: &str) -> Result<NarrativeGraph, String> {
    if text.trim_start().starts_with('{') {
        return from_json(text).map_err(|e| e.to_string());
    }
    match parse_dsl(text) {
        (Some(g), _) => Ok(g),
        (None, diags) => {
            let lines: Vec<String> = diags.iter().filter(|d| d.is_error()).map(ToString::to_string).collect();
            Err(lines.join("\n"))
        }
    }
}
