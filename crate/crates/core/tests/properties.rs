use std::path::PathBuf;

use proptest::prelude::*;

use sola_core::agent::{Agent, AgentError, SideAnswer};
use sola_core::config::DomainConfig;
use sola_core::knowledge::Vote;
use sola_core::matcher::novelty_score;
use sola_core::model::Bindings;
use sola_core::snapshot::{from_snapshot, to_snapshot};
use sola_core::tokenize;
use sola_core::world::WorldState;

fn config() -> DomainConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/smart_home.json");
    DomainConfig::load(&path).unwrap()
}

const UTTERANCES: [&str; 12] = [
    "turn off the light in the kitchen",
    "switch on the light in the hall",
    "make the bedroom dark",
    "light up the office",
    "blorp zap kitchen",
    "change the color of the light",
    "raise the temperature in the hall",
    "Watched Forest Gump yesterday. Liked Tom Hanks' performance.",
    "what is the capital city of us",
    "who acted in forest gump",
    "the weather is nice",
    "kill the lights in the garage",
];

#[derive(Debug, Clone)]
enum Op {
    Utter(usize),
    Choice(Option<usize>),
    Rephrase(usize),
    Slot(&'static str, usize),
    Side(u8),
    Demo(bool),
    NewSession(usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (0..UTTERANCES.len()).prop_map(Op::Utter),
        2 => prop::option::of(0usize..5).prop_map(Op::Choice),
        1 => (0..UTTERANCES.len()).prop_map(Op::Rephrase),
        2 => (prop::sample::select(vec!["X", "C", "T"]), 0usize..4).prop_map(|(a, v)| Op::Slot(a, v)),
        1 => (0u8..4).prop_map(Op::Side),
        1 => any::<bool>().prop_map(Op::Demo),
        1 => (0usize..3).prop_map(Op::NewSession),
    ]
}

const SLOT_VALUES: [&str; 4] = ["kitchen", "hall", "garage", "21"];

fn apply(agent: &mut Agent, world: &mut WorldState, sid: sola_core::model::SessionId, op: &Op) -> Result<(), AgentError> {
    match op {
        Op::Utter(i) => agent.handle_utterance(sid, UTTERANCES[*i], world).map(drop),
        Op::Choice(c) => agent.on_option_choice(sid, *c, world).map(drop),
        Op::Rephrase(i) => agent.on_rephrase(sid, UTTERANCES[*i], world).map(drop),
        Op::Slot(arg, v) => agent.on_slot_answer(sid, arg, SLOT_VALUES[*v], world).map(drop),
        Op::Side(k) => {
            let answer = match k {
                0 => SideAnswer::Vote(Vote::Yes),
                1 => SideAnswer::Vote(Vote::No),
                2 => SideAnswer::Text("washington dc".into()),
                _ => SideAnswer::Skip,
            };
            agent.on_side_answer(sid, answer).map(drop)
        }
        Op::Demo(on) => {
            let mut b = Bindings::new();
            b.insert("X".into(), tokenize("kitchen"));
            let action = if *on { "SwitchOnLight" } else { "SwitchOffLight" };
            agent.on_demonstration(sid, &action.into(), b, world).map(drop)
        }
        Op::NewSession(_) => Ok(()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    /// Any input sequence: no panics, bounded questions, mismatches are
    /// side-effect free, and the end state survives a snapshot round trip.
    #[test]
    fn fsm_fuzz(ops in prop::collection::vec(op(), 1..40)) {
        let cfg = config();
        let rules = cfg.knowledge_rules().unwrap();
        let mut agent = Agent::from_config(&cfg).unwrap();
        let mut world = WorldState::from_config(&cfg.world);
        let users = ["ann", "ben", "cy"];
        let mut sid = agent.open_session("ann".into(), None);
        for op in &ops {
            if let Op::NewSession(u) = op {
                agent.close_session(sid);
                sid = agent.open_session(users[*u].into(), None);
                continue;
            }
            let before_state = agent.state().clone();
            let before_session = agent.session(sid).cloned();
            let before_world = world.clone();
            match apply(&mut agent, &mut world, sid, op) {
                Err(AgentError::PhaseMismatch { .. }) | Err(AgentError::NotPending(_)) | Err(AgentError::NoAbandonedTask) => {
                    prop_assert_eq!(agent.state(), &before_state);
                    prop_assert_eq!(agent.session(sid).cloned(), before_session);
                    prop_assert_eq!(&world, &before_world);
                }
                _ => {}
            }
            let s = agent.session(sid).unwrap();
            prop_assert!(s.questions_asked <= cfg.agent.question_budget);
        }
        let (text, _) = to_snapshot(agent.state(), &rules);
        let (state, _) = from_snapshot(&text).unwrap();
        prop_assert_eq!(&state, agent.state());
        prop_assert_eq!(to_snapshot(&state, &rules).0, text);
    }

    #[test]
    fn novelty_is_bounded_and_order_free(cmd in prop::collection::vec(0usize..UTTERANCES.len(), 1..3), rot in 0usize..13) {
        let cfg = config();
        let agent = Agent::from_config(&cfg).unwrap();
        let store = agent.state().store.commands().to_vec();
        let text: Vec<&str> = cmd.iter().map(|i| UTTERANCES[*i]).collect();
        let tokens = tokenize(&text.join(" "));
        let a = novelty_score(&tokens, &store, |_| true, 0.5, 3);
        let mut rotated = store.clone();
        rotated.rotate_left(rot % store.len());
        let b = novelty_score(&tokens, &rotated, |_| true, 0.5, 3);
        prop_assert!((0.0..=1.0).contains(&a.novelty_score));
        prop_assert_eq!(a.novelty_score.to_bits(), b.novelty_score.to_bits());
        prop_assert_eq!(a.top_k, b.top_k);
        // adding seed commands never makes a command more novel
        let fewer = novelty_score(&tokens, &store[..store.len() / 2], |_| true, 0.5, 3);
        prop_assert!(a.novelty_score <= fewer.novelty_score);
    }
}

#[test]
fn literal_seed_command_has_zero_novelty() {
    let cfg = config();
    let agent = Agent::from_config(&cfg).unwrap();
    let store = agent.state().store.commands();
    let r = novelty_score(&tokenize("change the color of the light"), store, |_| true, 0.5, 3);
    assert_eq!(r.novelty_score, 0.0);
}
