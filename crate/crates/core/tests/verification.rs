//! Cross-verification of user-supplied facts.

use std::collections::BTreeSet;

use proptest::prelude::*;

use sola_core::knowledge::{FactId, FactStatus, KnowledgeBase, KnowledgeError, KnowledgeRules, SessionContext, TripleRule, Vote};
use sola_core::model::UserId;
use sola_core::tokenize;

fn rules() -> KnowledgeRules {
    KnowledgeRules {
        extraction: vec![TripleRule::new("note that $X is $Y", "$X", "is", "$Y").unwrap()],
        ..KnowledgeRules::default()
    }
}

fn state(kb: &mut KnowledgeBase, rules: &KnowledgeRules, source: &UserId, text: &str) -> FactId {
    let ex = kb.extract_facts(&tokenize(text), rules, &mut SessionContext::default(), source);
    ex.new[0]
}

fn user(i: usize) -> UserId {
    format!("u{i}").as_str().into()
}

proptest! {
    #[test]
    fn verified_exactly_at_third_distinct_yes(votes in prop::collection::vec((0usize..7, any::<bool>()), 0..25)) {
        let rules = rules();
        let mut kb = KnowledgeBase::new();
        let source = user(0);
        let id = state(&mut kb, &rules, &source, "note that sky is blue");
        let (mut yes, mut no) = (BTreeSet::new(), BTreeSet::new());
        let mut status = FactStatus::Unverified;
        for (u, v) in votes {
            let who = user(u);
            let vote = if v { Vote::Yes } else { Vote::No };
            let got = kb.verify_fact(id, &who, vote, &rules);
            if status != FactStatus::Unverified {
                prop_assert_eq!(got, Err(KnowledgeError::AlreadyFinal));
            } else if u == 0 {
                prop_assert_eq!(got, Err(KnowledgeError::SelfVerification));
            } else if yes.contains(&u) || no.contains(&u) {
                prop_assert_eq!(got, Err(KnowledgeError::DuplicateVerifier));
            } else {
                if v { yes.insert(u); } else { no.insert(u); }
                status = if yes.len() >= 3 {
                    FactStatus::Verified
                } else if no.len() >= 2 {
                    FactStatus::Rejected
                } else {
                    FactStatus::Unverified
                };
                prop_assert_eq!(got, Ok(status));
            }
            prop_assert_eq!(kb.fact(id).unwrap().status, status);
        }
    }
}

/// Five users, one of whom votes adversarially in every possible way.
#[test]
fn adversary_cannot_verify_false_facts() {
    const USERS: usize = 5;
    const ADVERSARY: usize = 4;
    let rules = rules();
    // (source, statement, true in the world)
    let facts = [
        (0, "note that paris is french", true),
        (1, "note that madrid is french", false),
        (ADVERSARY, "note that lisbon is french", false),
        (ADVERSARY, "note that lyon is french", true),
    ];
    let mut explored = 0u64;
    let mut false_verified = 0u64;
    for (source, text, truth) in facts {
        // every vote sequence of length <= 5 over all users, with every
        // choice of adversary vote
        let mut stack: Vec<Vec<(usize, bool)>> = vec![vec![]];
        while let Some(seq) = stack.pop() {
            let mut kb = KnowledgeBase::new();
            let id = state(&mut kb, &rules, &user(source), text);
            for &(u, v) in &seq {
                let _ = kb.verify_fact(id, &user(u), if v { Vote::Yes } else { Vote::No }, &rules);
            }
            explored += 1;
            let f = kb.fact(id).unwrap();
            if f.status == FactStatus::Verified {
                assert!(f.verifiers.len() >= 3);
                assert!(!f.verifiers.contains(&user(source)));
                if !truth && source != ADVERSARY {
                    false_verified += 1;
                }
                assert!(truth, "false fact {text:?} verified by {seq:?}");
            }
            if seq.len() < 5 {
                for u in 0..USERS {
                    let choices: &[bool] = if u == ADVERSARY { &[true, false] } else { &[truth] };
                    for &v in choices {
                        let mut next = seq.clone();
                        next.push((u, v));
                        stack.push(next);
                    }
                }
            }
        }
    }
    assert_eq!(false_verified, 0);
    assert!(explored > 10_000);
}
