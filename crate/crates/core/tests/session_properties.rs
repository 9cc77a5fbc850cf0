use gloss_core::authoring::{instantiate_template, to_json};
use gloss_core::graph::{DialogueMode, NarrativeGraph};
use gloss_core::llm::ProviderHandle;
use gloss_core::session::{MatchDecision, Session, SessionEngine, SessionError, SteppingClock};
use gloss_core::testkit::{self, GraphShape, TestRng};
use gloss_core::validate::{has_errors, validate};
use proptest::prelude::*;
use rand::Rng;

fn engine() -> SessionEngine {
    SessionEngine::with_clock(ProviderHandle::mock(), SteppingClock::starting_at(1_700_000_000))
}

fn run(graph: &NarrativeGraph, script: &[String]) -> (Session, NarrativeGraph) {
    let e = engine();
    let (mut s, _) = e.start_session(graph, Some(0.3)).unwrap();
    let mut g = graph.clone();
    for u in script {
        if !s.is_active() {
            break;
        }
        let (ns, ng, _) = e.submit_turn(&s, &g, u).unwrap();
        s = ns;
        g = ng;
    }
    (s, g)
}

fn script(rng: &mut TestRng) -> Vec<String> {
    (0..rng.gen_range(1..15)).map(|_| testkit::utterance(rng)).collect()
}

fn count(s: &Session, f: impl Fn(&MatchDecision) -> bool) -> usize {
    s.transcript.iter().filter(|t| f(&t.decision)).count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn strict_never_mutates(seed in any::<u64>()) {
        let mut rng = testkit::rng(seed);
        let mut g = testkit::graph(&mut rng, &GraphShape::default());
        g.mode = DialogueMode::Strict;
        let (s, after) = run(&g, &script(&mut rng));
        prop_assert_eq!(&after, &g);
        prop_assert_eq!(count(&s, |d| matches!(d, MatchDecision::GeneratedBranch { .. })), 0);
        for t in &s.transcript {
            if let MatchDecision::Rejected { best_confidence, .. } = t.decision {
                prop_assert!(best_confidence < s.match_threshold);
                prop_assert_eq!(&t.from_node, &t.to_node);
            }
        }
    }

    #[test]
    fn flexible_growth_matches_branches(seed in any::<u64>()) {
        let mut rng = testkit::rng(seed);
        let mut g = testkit::graph(&mut rng, &GraphShape::default());
        g.mode = DialogueMode::Flexible;
        let (s, after) = run(&g, &script(&mut rng));
        let generated = count(&s, |d| matches!(d, MatchDecision::GeneratedBranch { .. }));
        prop_assert_eq!(after.nodes.len(), g.nodes.len() + generated);
        prop_assert_eq!(after.edges.len(), g.edges.len() + generated);
        prop_assert_eq!(after.version, g.version + 2 * generated as u64);
        prop_assert_eq!(count(&s, |d| matches!(d, MatchDecision::Rejected { .. })), 0);
        prop_assert!(!has_errors(&validate(&after)));
        prop_assert_eq!(&after.edges[..g.edges.len()], &g.edges[..]);
    }

    #[test]
    fn turns_are_chained(seed in any::<u64>()) {
        let mut rng = testkit::rng(seed);
        let g = testkit::graph(&mut rng, &GraphShape::default());
        let (s, after) = run(&g, &script(&mut rng));
        let mut at = g.start_node.clone().unwrap();
        for (i, t) in s.transcript.iter().enumerate() {
            prop_assert_eq!(t.index, i);
            prop_assert_eq!(&t.from_node, &at);
            if let Some(e) = t.decision.edge_id() {
                let edge = after.edge(e.as_str()).unwrap();
                prop_assert_eq!((&edge.from, &edge.to), (&t.from_node, &t.to_node));
            }
            at = t.to_node.clone();
        }
        prop_assert_eq!(&s.current_node, &at);
        prop_assert_eq!(s.is_active(), !after.nodes[&at].terminal || s.transcript.is_empty());
    }
}

#[test]
fn replay_is_byte_identical() {
    let g = instantiate_template("customer-service").unwrap();
    let script: Vec<String> = [
        "I am so sorry about the wait",
        "whatever",
        "let me offer you a replacement",
        "hello?",
        "I understand, let me help",
        "can I speak to a manager",
        "no",
        "fine",
        "thank you",
        "bye",
    ]
    .map(String::from)
    .to_vec();
    let (a, ga) = run(&g, &script);
    let (b, gb) = run(&g, &script);
    assert_eq!(serde_json::to_string(&a.transcript).unwrap(), serde_json::to_string(&b.transcript).unwrap());
    assert_eq!(to_json(&ga), to_json(&gb));
}

#[test]
fn failed_turn_changes_nothing() {
    let e = engine();
    let g = instantiate_template("customer-service").unwrap();
    let (s, _) = e.start_session(&g, None).unwrap();
    assert_eq!(e.submit_turn(&s, &g, "   "), Err(SessionError::EmptyUtterance));
    let other = instantiate_template("customer-service").unwrap();
    assert!(matches!(e.submit_turn(&s, &other, "hi"), Err(SessionError::GraphMismatch { .. })));
    let done = e.end_session(&s).unwrap();
    assert_eq!(e.submit_turn(&done, &g, "hi"), Err(SessionError::SessionCompleted));
    assert_eq!(e.end_session(&done), Err(SessionError::SessionCompleted));
    assert_eq!(done.transcript, s.transcript);
}

#[test]
fn session_json_round_trip() {
    let g = instantiate_template("customer-service").unwrap();
    let (s, _) = run(&g, &["sorry for the inconvenience".into(), "zzz".into()]);
    let back = Session::from_json(&s.to_json()).unwrap();
    assert_eq!(back, s);
    assert_eq!(back.to_json(), s.to_json());
}
