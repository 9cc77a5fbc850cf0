//! Bundled, fully scripted scenarios.

use thiserror::Error;

use crate::authoring::dsl::parse_dsl;
use crate::graph::{NarrativeGraph, Provenance};
use crate::ids::GraphId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub id: String,
    pub title: String,
    pub graph: NarrativeGraph,
}

const SOURCES: &[(&str, &str)] = &[
    ("customer-service", include_str!("../../templates/customer-service.gloss")),
    ("coworker-feedback", include_str!("../../templates/coworker-feedback.gloss")),
];

/// Ids of every bundled template, in registry order.
pub fn template_ids() -> impl Iterator<Item = &'static str> {
    SOURCES.iter().map(|(id, _)| *id)
}

pub fn template(id: &str) -> Result<Template, TemplateError> {
    let (_, source) = SOURCES
        .iter()
        .find(|(tid, _)| *tid == id)
        .ok_or_else(|| TemplateError::UnknownTemplate(id.to_string()))?;
    let (graph, diags) = parse_dsl(source);
    let mut graph = graph.unwrap_or_else(|| panic!("bundled template `{id}` does not parse: {diags:?}"));
    for node in graph.nodes.values_mut() {
        node.provenance = Provenance::Template;
    }
    for edge in &mut graph.edges {
        edge.provenance = Provenance::Template;
    }
    graph.metadata.insert("template".into(), id.to_string());
    Ok(Template {
        id: id.to_string(),
        title: graph.title.clone(),
        graph,
    })
}

pub fn templates() -> Vec<Template> {
    template_ids().map(|id| template(id).expect("registry id")).collect()
}

/// A fresh copy of a template graph: new id, version 1, template provenance.
pub fn instantiate_template(id: &str) -> Result<NarrativeGraph, TemplateError> {
    let mut graph = template(id)?.graph;
    graph.id = GraphId::fresh();
    graph.version = 1;
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::{has_errors, validate};

    #[test]
    fn every_template_is_clean() {
        for t in templates() {
            let d = validate(&t.graph);
            assert!(!has_errors(&d), "{}: {d:?}", t.id);
            assert!(d.is_empty(), "{} has warnings: {d:?}", t.id);
        }
    }

    #[test]
    fn customer_service_branches() {
        let g = instantiate_template("customer-service").unwrap();
        let start = g.start_node.clone().unwrap();
        let labels: Vec<_> = g
            .outgoing_edges(start.as_str())
            .unwrap()
            .iter()
            .map(|e| e.intent.label.as_str())
            .collect();
        assert_eq!(labels, ["patient", "rude", "ignore"]);
        assert_eq!(g.version, 1);
        assert!(g.nodes.values().all(|n| n.provenance == Provenance::Template));
        assert!(g.edges.iter().all(|e| e.provenance == Provenance::Template));
    }

    #[test]
    fn unknown_template() {
        assert_eq!(
            instantiate_template("no-such"),
            Err(TemplateError::UnknownTemplate("no-such".into()))
        );
    }

    #[test]
    fn instantiations_are_fresh_but_equal() {
        let a = instantiate_template("customer-service").unwrap();
        let mut b = instantiate_template("customer-service").unwrap();
        assert_ne!(a.id, b.id);
        b.id = a.id.clone();
        assert_eq!(a, b);
    }
}
