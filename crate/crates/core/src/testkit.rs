//! Seeded generators for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

use crate::graph::{DialogueMode, Mutation, NarrativeGraph, Provenance, ResponseIntent, SceneNode, TransitionEdge};
use crate::ids::{EdgeId, GraphId, NodeId};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

const WORDS: &[&str] = &[
    "sorry", "refund", "manager", "wait", "please", "help", "order", "late", "calm", "listen", "understand",
    "replacement", "policy", "thanks", "problem", "today", "again", "really", "never", "fine",
];

const AWKWARD: &[&str] = &[
    "say \"hi\"", "back\\slash", "tab\there", "line\nbreak", "naïve café", "#hash", "a -> b", "x=y", "[list]",
    "comma, here", "emoji 🙂", " padded ", "->", "",
];

#[derive(Debug, Clone)]
pub struct GraphShape {
    pub max_nodes: usize,
    pub max_edges: usize,
    /// Probability of picking a hostile string for free text.
    pub awkward: f64,
}

impl Default for GraphShape {
    fn default() -> Self {
        Self {
            max_nodes: 8,
            max_edges: 16,
            awkward: 0.3,
        }
    }
}

pub fn utterance(rng: &mut TestRng) -> String {
    let n = rng.gen_range(1..=6);
    let words: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
    words.join(" ")
}

fn text(rng: &mut TestRng, awkward: f64, allow_empty: bool) -> String {
    if rng.gen_bool(awkward) {
        let s = AWKWARD.choose(rng).unwrap().to_string();
        if !s.is_empty() || allow_empty {
            return s;
        }
    }
    utterance(rng)
}

fn single_line(rng: &mut TestRng, awkward: f64) -> String {
    let s = text(rng, awkward, false).replace(['\n', '\r'], " ");
    if s.trim().is_empty() {
        utterance(rng)
    } else {
        s
    }
}

/// A graph with no E-class diagnostics; it may still contain unreachable
/// scenes or dead ends.
pub fn graph(rng: &mut TestRng, shape: &GraphShape) -> NarrativeGraph {
    let mut g = NarrativeGraph::new(single_line(rng, shape.awkward), DialogueMode::Flexible).unwrap();
    if rng.gen_bool(0.5) {
        g.mode = DialogueMode::Strict;
    }
    if rng.gen_bool(0.3) {
        g.metadata.insert("owner".into(), text(rng, shape.awkward, true));
    }
    let n = rng.gen_range(1..=shape.max_nodes.max(1));
    let ids: Vec<NodeId> = (0..n)
        .map(|i| {
            if rng.gen_bool(shape.awkward / 2.0) {
                NodeId::new(format!("scene {i} \"q\""))
            } else {
                NodeId::new(format!("n{i}"))
            }
        })
        .collect();
    for id in &ids {
        let node = SceneNode::new(id.clone(), single_line(rng, shape.awkward))
            .with_description(text(rng, shape.awkward, true))
            .terminal(rng.gen_bool(0.2))
            .with_provenance(*[Provenance::Authored, Provenance::Generated, Provenance::Template].choose(rng).unwrap());
        g = g.apply(Mutation::AddNode(node)).unwrap();
    }
    g = g.apply(Mutation::SetStart(ids.choose(rng).unwrap().clone())).unwrap();
    let m = rng.gen_range(0..=shape.max_edges);
    for i in 0..m {
        let from = ids.choose(rng).unwrap().clone();
        let to = ids.choose(rng).unwrap().clone();
        let examples: Vec<String> = (0..rng.gen_range(0..3)).map(|_| text(rng, shape.awkward, true)).collect();
        let intent = ResponseIntent::new(format!("{} {i}", single_line(rng, shape.awkward)))
            .with_description(text(rng, shape.awkward, true))
            .with_examples(examples);
        let edge = TransitionEdge::new(EdgeId::new(format!("e{i}")), from, to, intent);
        g = g.apply(Mutation::AddEdge(edge)).unwrap();
    }
    g.id = GraphId::new(format!("g-{}", rng.gen::<u32>()));
    g.version = rng.gen_range(1..1000);
    g
}

/// A mutation that may or may not apply cleanly to `g`.
pub fn mutation(rng: &mut TestRng, g: &NarrativeGraph) -> Mutation {
    let mut nodes: Vec<NodeId> = g.nodes.keys().cloned().collect();
    nodes.push(NodeId::new(format!("m{}", rng.gen_range(0..20))));
    let mut edges: Vec<EdgeId> = g.edges.iter().map(|e| e.id.clone()).collect();
    edges.push(EdgeId::new(format!("x{}", rng.gen_range(0..20))));
    let node = nodes.choose(rng).unwrap().clone();
    let edge = edges.choose(rng).unwrap().clone();
    let label = WORDS.choose(rng).unwrap().to_string();
    match rng.gen_range(0..8) {
        0 => Mutation::AddNode(SceneNode::new(node, utterance(rng))),
        1 => Mutation::UpdateNode(SceneNode::new(node, utterance(rng)).terminal(rng.gen())),
        2 => Mutation::RemoveNode(node),
        3 => Mutation::AddEdge(TransitionEdge::new(
            edge,
            node,
            nodes.choose(rng).unwrap().clone(),
            ResponseIntent::new(label),
        )),
        4 => Mutation::UpdateEdge(TransitionEdge::new(
            edge,
            node,
            nodes.choose(rng).unwrap().clone(),
            ResponseIntent::new(label),
        )),
        5 => Mutation::RemoveEdge(edge),
        6 => Mutation::SetStart(node),
        _ => Mutation::SetMode(if rng.gen() { DialogueMode::Strict } else { DialogueMode::Flexible }),
    }
}

/// Any graph, including ones with dangling edges, a missing start and
/// duplicate labels; built directly rather than through mutations.
pub fn raw_graph(rng: &mut TestRng, shape: &GraphShape) -> NarrativeGraph {
    let mut g = NarrativeGraph::new("raw", DialogueMode::Flexible).unwrap();
    let n = rng.gen_range(0..=shape.max_nodes);
    let ids: Vec<NodeId> = (0..n).map(|i| NodeId::new(format!("n{i}"))).collect();
    for id in &ids {
        g.nodes.insert(id.clone(), SceneNode::new(id.clone(), "x").terminal(rng.gen_bool(0.2)));
    }
    let pick = |rng: &mut TestRng| -> NodeId {
        if ids.is_empty() || rng.gen_bool(0.1) {
            NodeId::new("ghost")
        } else {
            ids.choose(rng).unwrap().clone()
        }
    };
    g.start_node = if rng.gen_bool(0.1) { None } else { Some(pick(rng)) };
    for i in 0..rng.gen_range(0..=shape.max_edges) {
        let label = WORDS[rng.gen_range(0..4)];
        let id = if rng.gen_bool(0.05) { "dup".to_string() } else { format!("e{i}") };
        g.edges.push(TransitionEdge::new(EdgeId::new(id), pick(rng), pick(rng), ResponseIntent::new(label)));
    }
    g
}
