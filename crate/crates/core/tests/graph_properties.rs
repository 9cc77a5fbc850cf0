use gloss_core::authoring::{from_json, parse_dsl, render_dsl, to_json};
use gloss_core::canonical::to_canonical_string;
use gloss_core::graph::{Mutation, NarrativeGraph, SceneNode};
use gloss_core::testkit::{self, GraphShape};
use gloss_core::validate::{has_errors, validate};
use proptest::prelude::*;

fn shape() -> GraphShape {
    GraphShape {
        max_nodes: 30,
        max_edges: 45,
        awkward: 0.3,
    }
}

fn without_version(g: &NarrativeGraph) -> NarrativeGraph {
    NarrativeGraph { version: 1, ..g.clone() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn json_round_trip(seed in any::<u64>()) {
        let g = testkit::graph(&mut testkit::rng(seed), &shape());
        let text = to_json(&g);
        let back = from_json(&text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(to_json(&back), text);
    }

    #[test]
    fn canonical_json_is_stable(seed in any::<u64>()) {
        let g = testkit::graph(&mut testkit::rng(seed), &shape());
        let text = to_json(&g);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(to_canonical_string(&value).unwrap(), text);
    }

    #[test]
    fn dsl_round_trip(seed in any::<u64>()) {
        let g = testkit::graph(&mut testkit::rng(seed), &shape());
        let text = render_dsl(&g).unwrap();
        let (back, diags) = parse_dsl(&text);
        prop_assert!(diags.is_empty(), "{:?}\n{}", diags, text);
        let back = back.unwrap();
        prop_assert_eq!(without_version(&back), without_version(&g));
        prop_assert_eq!(render_dsl(&back).unwrap(), text);
    }

    #[test]
    fn mutations_keep_graph_consistent(seed in any::<u64>(), steps in 1usize..40) {
        let mut rng = testkit::rng(seed);
        let mut g = testkit::graph(&mut rng, &GraphShape::default());
        for _ in 0..steps {
            let m = testkit::mutation(&mut rng, &g);
            let before = g.clone();
            match g.apply(m) {
                Ok(next) => {
                    prop_assert_eq!(next.version, before.version + 1);
                    prop_assert!(!has_errors(&validate(&next)), "{:?}", validate(&next));
                    g = next;
                }
                Err(_) => prop_assert_eq!(&g, &before),
            }
        }
    }

    #[test]
    fn add_then_remove_node_is_identity(seed in any::<u64>()) {
        let g = testkit::graph(&mut testkit::rng(seed), &GraphShape::default());
        let round = g
            .apply(Mutation::AddNode(SceneNode::new("fresh-node", "hi")))
            .unwrap()
            .apply(Mutation::RemoveNode("fresh-node".into()))
            .unwrap();
        prop_assert_eq!(round.version, g.version + 2);
        prop_assert_eq!(NarrativeGraph { version: g.version, ..round }, g);
    }

    #[test]
    fn outgoing_edges_partition_edge_list(seed in any::<u64>()) {
        let g = testkit::graph(&mut testkit::rng(seed), &shape());
        let mut seen = Vec::new();
        for id in g.nodes.keys() {
            let out = g.outgoing_edges(id.as_str()).unwrap();
            prop_assert!(out.iter().all(|e| &e.from == id));
            seen.extend(out.into_iter().map(|e| e.id.clone()));
        }
        prop_assert_eq!(seen.len(), g.edges.len());
        seen.sort();
        let mut all: Vec<_> = g.edges.iter().map(|e| e.id.clone()).collect();
        all.sort();
        prop_assert_eq!(seen, all);
    }
}
