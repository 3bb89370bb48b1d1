use crate::model::{check_pattern, render_pattern, ApiAction, Bindings, PatternElement, Provenance, ScId};
use crate::store::{Domain, SeedStore};
use crate::tokens::Token;

use super::{AgentError, LearningTask, TaskStatus};

/// A seed command pattern induced from a grounded utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Induced {
    pub pattern: Vec<PatternElement>,
    pub always_elicit: Vec<String>,
}

/// Lifts each bound argument value to a variable at its leftmost free
/// verbatim occurrence in `command`. Values that do not occur become
/// always-elicit. Falls back to a literal pattern when the lifted one is
/// not a valid seed command.
pub fn induce_pattern(command: &[Token], action: &ApiAction, bindings: &Bindings) -> Result<Induced, AgentError> {
    let n = command.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut starts: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut always_elicit = Vec::new();
    for (ai, arg) in action.args.iter().enumerate() {
        let value = match bindings.get(&arg.name) {
            Some(v) if !v.is_empty() && v.len() <= n => v,
            _ => {
                always_elicit.push(arg.name.clone());
                continue;
            }
        };
        let hit = (0..=n - value.len())
            .find(|&i| command[i..i + value.len()] == value[..] && owner[i..i + value.len()].iter().all(Option::is_none));
        match hit {
            Some(i) => {
                owner[i..i + value.len()].iter_mut().for_each(|o| *o = Some(ai));
                starts[i] = Some((ai, value.len()));
            }
            None => always_elicit.push(arg.name.clone()),
        }
    }

    let mut pattern = Vec::new();
    let mut i = 0;
    while i < n {
        match starts[i] {
            Some((ai, len)) => {
                let arg = &action.args[ai];
                pattern.push(PatternElement::Variable { name: arg.name.clone(), slot_type: arg.slot_type.clone() });
                i += len;
            }
            None => {
                pattern.push(PatternElement::Literal(command[i].clone()));
                i += 1;
            }
        }
    }
    if check_pattern(&pattern).is_ok() {
        always_elicit.sort_by_key(|name| action.args.iter().position(|a| &a.name == name));
        return Ok(Induced { pattern, always_elicit });
    }

    let literal: Vec<PatternElement> = command.iter().cloned().map(PatternElement::Literal).collect();
    check_pattern(&literal).map_err(|_| AgentError::NothingToLearn)?;
    Ok(Induced { pattern: literal, always_elicit: action.args.iter().map(|a| a.name.clone()).collect() })
}

/// Induces the seed command for a learned task's original command.
pub fn induce_seed_command(task: &LearningTask, domain: &Domain) -> Result<Induced, AgentError> {
    if task.status != TaskStatus::Learned {
        return Err(AgentError::NotLearned);
    }
    let action_id = task.ground_truth_action_id.as_ref().ok_or(AgentError::NotLearned)?;
    let action = domain.action(action_id)?;
    induce_pattern(&task.original_command, action, &task.bindings)
}

/// Adds a seed command for the original command and for every rephrasing of
/// a learned task. Returns the new ids with their patterns; patterns already
/// stored for the action are skipped.
pub fn learn_task(
    store: &mut SeedStore,
    domain: &Domain,
    task: &LearningTask,
    provenance: Provenance,
    created_at: u64,
) -> Result<Vec<(ScId, String)>, AgentError> {
    if task.status != TaskStatus::Learned {
        return Err(AgentError::NotLearned);
    }
    let action_id = task.ground_truth_action_id.as_ref().ok_or(AgentError::NotLearned)?;
    let action = domain.action(action_id)?;
    let mut added = Vec::new();
    for utterance in std::iter::once(&task.original_command).chain(&task.rephrases) {
        let Ok(ind) = induce_pattern(utterance, action, &task.bindings) else {
            continue;
        };
        let text = render_pattern(&ind.pattern);
        if let Some(id) = store.insert(domain, ind.pattern, action_id, provenance.clone(), created_at, ind.always_elicit)? {
            added.push((id, text));
        }
    }
    Ok(added)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::switch_off;
    use crate::tokens::tokenize;

    fn place(v: &str) -> Bindings {
        let mut b = Bindings::new();
        b.insert("X".into(), tokenize(v));
        b
    }

    #[test]
    fn lifts_argument_value() {
        let i = induce_pattern(&tokenize("turn off the light in the kitchen"), &switch_off(), &place("kitchen")).unwrap();
        assert_eq!(render_pattern(&i.pattern), "turn off the light in the $X");
        assert!(i.always_elicit.is_empty());
    }

    #[test]
    fn absent_value_is_always_elicit() {
        let i = induce_pattern(&tokenize("lights off"), &switch_off(), &place("kitchen")).unwrap();
        assert_eq!(render_pattern(&i.pattern), "lights off");
        assert_eq!(i.always_elicit, vec!["X".to_string()]);
    }

    #[test]
    fn leftmost_occurrence_lifted() {
        let i = induce_pattern(&tokenize("kitchen light in the kitchen"), &switch_off(), &place("kitchen")).unwrap();
        assert_eq!(render_pattern(&i.pattern), "$X light in the kitchen");
    }

    #[test]
    fn whole_command_value_falls_back_to_literal() {
        let i = induce_pattern(&tokenize("living room"), &switch_off(), &place("living room")).unwrap();
        assert_eq!(render_pattern(&i.pattern), "living room");
        assert_eq!(i.always_elicit, vec!["X".to_string()]);
    }

    #[test]
    fn requires_learned_task() {
        let mut d = Domain::default();
        d.add_slot_type(crate::model::SlotType { id: "place".into(), lexicon: None }).unwrap();
        d.add_action(switch_off()).unwrap();
        let mut t = LearningTask::new(1, tokenize("lights off"), 2);
        assert!(matches!(induce_seed_command(&t, &d), Err(AgentError::NotLearned)));
        t.status = TaskStatus::Learned;
        t.ground_truth_action_id = Some("SwitchOffLight".into());
        t.bindings = place("kitchen");
        assert!(induce_seed_command(&t, &d).is_ok());

        let mut store = SeedStore::new();
        let added = learn_task(&mut store, &d, &t, Provenance::Developer, 0).unwrap();
        assert_eq!(added, vec![(ScId(1), "lights off".to_string())]);
        assert!(learn_task(&mut store, &d, &t, Provenance::Developer, 1).unwrap().is_empty());
        assert_eq!(store.len(), 1);
    }
}
