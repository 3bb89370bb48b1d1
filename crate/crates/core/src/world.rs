//! The environment actions run against.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{EffectConfig, WorldConfig};
use crate::model::{ActionId, ApiAction, Bindings};
use crate::tokens::{join, tokenize, Token};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("there is no room called {value:?}")]
    UnknownRoom { arg: String, value: String },
    #[error("argument {0} is missing")]
    MissingArg(String),
    #[error("{value:?} is not a number")]
    NotANumber { arg: String, value: String },
}

impl ExecError {
    /// The argument the world rejected.
    pub fn arg(&self) -> &str {
        match self {
            ExecError::UnknownRoom { arg, .. } | ExecError::NotANumber { arg, .. } | ExecError::MissingArg(arg) => arg,
        }
    }
}

/// Performs API actions.
pub trait Executor {
    fn execute(&mut self, action: &ApiAction, args: &Bindings) -> Result<(), ExecError>;
}

const COLORS: [&str; 5] = ["white", "red", "green", "blue", "yellow"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Device {
    pub light_on: bool,
    pub color: String,
    pub temperature: i64,
}

impl Default for Device {
    fn default() -> Self {
        Device { light_on: true, color: COLORS[0].to_string(), temperature: 20 }
    }
}

pub type Triple = (Vec<Token>, String, Vec<Token>);

/// A smart home: one light and thermostat per room, plus the facts that are
/// actually true in the simulation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorldState {
    pub devices: BTreeMap<String, Device>,
    pub fact_ground_truth: BTreeSet<Triple>,
    effects: BTreeMap<ActionId, EffectConfig>,
}

impl WorldState {
    pub fn from_config(cfg: &WorldConfig) -> Self {
        WorldState {
            devices: cfg
                .rooms
                .iter()
                .map(|r| (join(&tokenize(r)), Device::default()))
                .collect(),
            fact_ground_truth: cfg
                .truth
                .iter()
                .map(|[h, r, t]| (tokenize(h), r.clone(), tokenize(t)))
                .collect(),
            effects: cfg.effects.clone(),
        }
    }

    pub fn is_true(&self, head: &[Token], relation: &str, tail: &[Token]) -> bool {
        self.fact_ground_truth
            .iter()
            .any(|(h, r, t)| h == head && r == relation && t == tail)
    }

    fn room<'a>(&'a mut self, args: &Bindings, arg: &str) -> Result<&'a mut Device, ExecError> {
        let name = join(args.get(arg).ok_or_else(|| ExecError::MissingArg(arg.to_string()))?);
        self.devices
            .get_mut(&name)
            .ok_or_else(|| ExecError::UnknownRoom { arg: arg.to_string(), value: name })
    }
}

impl Executor for WorldState {
    fn execute(&mut self, action: &ApiAction, args: &Bindings) -> Result<(), ExecError> {
        let Some(effect) = self.effects.get(&action.id).cloned() else {
            return Ok(());
        };
        match effect {
            EffectConfig::SetLight { place, on } => self.room(args, &place)?.light_on = on,
            EffectConfig::CycleColor => {
                for d in self.devices.values_mut() {
                    let i = COLORS.iter().position(|c| *c == d.color).unwrap_or(0);
                    d.color = COLORS[(i + 1) % COLORS.len()].to_string();
                }
            }
            EffectConfig::SetColor { place, color } => {
                let c = join(args.get(&color).ok_or_else(|| ExecError::MissingArg(color.clone()))?);
                self.room(args, &place)?.color = c;
            }
            EffectConfig::SetTemperature { place, value } => {
                let v = join(args.get(&value).ok_or_else(|| ExecError::MissingArg(value.clone()))?);
                let n = v.parse::<i64>().map_err(|_| ExecError::NotANumber { arg: value.clone(), value: v })?;
                self.room(args, &place)?.temperature = n;
            }
            EffectConfig::AdjustTemperature { place, delta } => self.room(args, &place)?.temperature += delta,
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::switch_off;

    fn world() -> WorldState {
        let mut effects = BTreeMap::new();
        effects.insert("SwitchOffLight".into(), EffectConfig::SetLight { place: "X".into(), on: false });
        WorldState::from_config(&WorldConfig {
            rooms: vec!["kitchen".into(), "Living Room".into()],
            effects,
            truth: vec![["us".into(), "capital_city".into(), "washington dc".into()]],
        })
    }

    #[test]
    fn switch_off_kitchen() {
        let mut w = world();
        let mut b = Bindings::new();
        b.insert("X".into(), tokenize("kitchen"));
        w.execute(&switch_off(), &b).unwrap();
        assert!(!w.devices["kitchen"].light_on);
        assert!(w.devices["living room"].light_on);
    }

    #[test]
    fn unknown_room_and_missing_arg() {
        let mut w = world();
        let mut b = Bindings::new();
        assert_eq!(w.execute(&switch_off(), &b), Err(ExecError::MissingArg("X".into())));
        b.insert("X".into(), tokenize("garden"));
        assert_eq!(w.execute(&switch_off(), &b), Err(ExecError::UnknownRoom { arg: "X".into(), value: "garden".into() }));
    }

    #[test]
    fn ground_truth_lookup() {
        let w = world();
        assert!(w.is_true(&tokenize("us"), "capital_city", &tokenize("washington dc")));
        assert!(!w.is_true(&tokenize("us"), "capital_city", &tokenize("paris")));
    }
}
