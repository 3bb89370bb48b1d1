//! Domain schema and the append-only seed command store.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{
    ActionId, ApiAction, ModelError, PatternElement, Provenance, ScId, SeedCommand, SlotType, SlotTypeId, TaskId,
};

/// Slot types and actions the agent can ground commands to.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub slot_types: BTreeMap<SlotTypeId, SlotType>,
    pub actions: BTreeMap<ActionId, ApiAction>,
}

impl Domain {
    pub fn add_slot_type(&mut self, st: SlotType) -> Result<(), ModelError> {
        if matches!(&st.lexicon, Some(l) if l.is_empty()) {
            return Err(ModelError::EmptyLexicon(st.id));
        }
        self.slot_types.insert(st.id.clone(), st);
        Ok(())
    }

    pub fn add_action(&mut self, action: ApiAction) -> Result<(), ModelError> {
        action.validate()?;
        for a in &action.args {
            if !self.slot_types.contains_key(&a.slot_type) {
                return Err(ModelError::UnknownSlotType(a.slot_type.clone()));
            }
        }
        self.actions.insert(action.id.clone(), action);
        Ok(())
    }

    pub fn action(&self, id: &ActionId) -> Result<&ApiAction, ModelError> {
        self.actions.get(id).ok_or_else(|| ModelError::UnknownAction(id.clone()))
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskId> {
        let mut seen: Vec<&TaskId> = self.actions.values().map(|a| &a.task_id).collect();
        seen.sort();
        seen.dedup();
        seen.into_iter()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedStore {
    commands: Vec<SeedCommand>,
    next_id: u64,
}

impl SeedStore {
    pub fn new() -> Self {
        SeedStore { commands: Vec::new(), next_id: 1 }
    }

    pub fn commands(&self) -> &[SeedCommand] {
        &self.commands
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn get(&self, id: ScId) -> Option<&SeedCommand> {
        // ids are assigned in increasing order
        self.commands
            .binary_search_by_key(&id, |c| c.id)
            .ok()
            .map(|i| &self.commands[i])
    }

    pub fn contains(&self, pattern: &[PatternElement], action: &ActionId) -> bool {
        self.commands
            .iter()
            .any(|c| &c.action_id == action && c.pattern == pattern)
    }

    /// Appends a new seed command with a fresh id. Returns `Ok(None)` when the
    /// same pattern is already stored for the action.
    pub fn insert(
        &mut self,
        domain: &Domain,
        pattern: Vec<PatternElement>,
        action_id: &ActionId,
        provenance: Provenance,
        created_at: u64,
        always_elicit: Vec<String>,
    ) -> Result<Option<ScId>, ModelError> {
        if self.contains(&pattern, action_id) {
            return Ok(None);
        }
        let action = domain.action(action_id)?;
        let sc = SeedCommand {
            id: ScId(self.next_id),
            pattern,
            action_id: action_id.clone(),
            provenance,
            task_id: action.task_id.clone(),
            created_at,
            always_elicit,
        };
        sc.validate(action)?;
        self.next_id += 1;
        let id = sc.id;
        self.commands.push(sc);
        Ok(Some(id))
    }

    /// Rebuilds a store from previously saved commands, re-validating each.
    pub fn restore(domain: &Domain, commands: Vec<SeedCommand>, next_id: u64) -> Result<Self, ModelError> {
        let mut last = None;
        for sc in &commands {
            sc.validate(domain.action(&sc.action_id)?)?;
            if last.is_some_and(|l| sc.id <= l) || sc.id.0 >= next_id {
                return Err(ModelError::IdOrder(sc.id));
            }
            last = Some(sc.id);
        }
        Ok(SeedStore { commands, next_id })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{change_color, switch_off};
    use crate::model::parse_pattern;

    fn domain() -> Domain {
        let mut d = Domain::default();
        d.add_slot_type(SlotType { id: "place".into(), lexicon: None }).unwrap();
        d.add_action(switch_off()).unwrap();
        d.add_action(change_color()).unwrap();
        d
    }

    #[test]
    fn insert_assigns_increasing_ids_and_dedups() {
        let d = domain();
        let mut s = SeedStore::new();
        let p = parse_pattern("switch off the light in the $X", &switch_off()).unwrap();
        let a = s.insert(&d, p.clone(), &"SwitchOffLight".into(), Provenance::Developer, 0, vec![]).unwrap();
        let b = s
            .insert(&d, parse_pattern("change the color of the light", &change_color()).unwrap(), &"ChangeLightColor".into(), Provenance::Developer, 1, vec![])
            .unwrap();
        assert_eq!(a, Some(ScId(1)));
        assert_eq!(b, Some(ScId(2)));
        assert_eq!(s.insert(&d, p, &"SwitchOffLight".into(), Provenance::Developer, 2, vec![]).unwrap(), None);
        assert_eq!(s.len(), 2);
        assert_eq!(s.get(ScId(2)).unwrap().action_id.as_str(), "ChangeLightColor");
    }

    #[test]
    fn insert_rejects_unknown_action() {
        let d = domain();
        let mut s = SeedStore::new();
        let p = parse_pattern("lights off", &switch_off()).unwrap();
        assert!(s.insert(&d, p, &"Nope".into(), Provenance::Developer, 0, vec![]).is_err());
        assert!(s.is_empty());
    }

    #[test]
    fn domain_rejects_unknown_slot_type() {
        let mut d = Domain::default();
        assert!(matches!(d.add_action(switch_off()), Err(ModelError::UnknownSlotType(_))));
        assert!(d.add_slot_type(SlotType { id: "x".into(), lexicon: Some(vec![]) }).is_err());
    }
}
