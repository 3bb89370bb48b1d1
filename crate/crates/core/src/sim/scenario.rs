use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, DomainConfig};
use crate::model::{ActionId, TaskId, UserId};

use super::user::stream;
use super::SimError;

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SimUserProfile {
    pub user_id: UserId,
    /// Chance of picking the right option when it is listed.
    #[serde(default = "one")]
    pub cooperativeness: f64,
    /// Chance of a false vote or answer to a side question.
    #[serde(default)]
    pub lie_probability: f64,
    /// `[head, relation, tail]` triples this user can answer with.
    #[serde(default)]
    pub knowledge: Vec<[String; 3]>,
    #[serde(default)]
    pub demonstrates: bool,
    #[serde(default)]
    pub rng_seed: u64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Intent {
    pub action_id: ActionId,
    #[serde(default)]
    pub args: BTreeMap<String, String>,
    /// Fixed wording instead of a paraphrase; repeated verbatim when asked to rephrase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Step {
    Intent(Intent),
    Statement(String),
    Question(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Episode {
    pub profile: UserId,
    #[serde(flatten)]
    pub step: Step,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Domain ids are never passed to the agent.
    #[default]
    Ccl,
    /// Matching is restricted to the intent's skill domain.
    Tcl,
}

/// Randomly drawn intents appended after the scripted episodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RandomIntents {
    pub count: usize,
    /// Empty means every action with a grammar.
    #[serde(default)]
    pub actions: Vec<ActionId>,
    /// Empty means every profile.
    #[serde(default)]
    pub profiles: Vec<UserId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    /// Domain config path, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<String>,
    #[serde(default)]
    pub mode: Mode,
    pub profiles: Vec<SimUserProfile>,
    #[serde(default)]
    pub episodes: Vec<Episode>,
    /// Episode index at which each skill domain becomes available. Domains
    /// not listed are available from the start.
    #[serde(default)]
    pub task_arrival: BTreeMap<usize, TaskId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_intents: Option<RandomIntents>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        match raw.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCENARIO_VERSION) => {}
            Some(v) => return Err(SimError::Invalid(format!("scenario version {v} is not supported"))),
            None => return Err(SimError::Invalid("missing numeric `version` field".into())),
        }
        Ok(serde_json::from_value(raw)?)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SimError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub(crate) fn arrival_of(&self, task: &TaskId) -> usize {
        self.task_arrival.iter().find(|(_, t)| *t == task).map_or(0, |(i, _)| *i)
    }

    /// Domains available before the first episode.
    pub fn initially_enabled(&self, task: &TaskId) -> bool {
        self.arrival_of(task) == 0
    }

    /// Scripted episodes followed by the random ones, checked against `cfg`.
    pub fn expand(&self, cfg: &DomainConfig, master_seed: u64) -> Result<Vec<Episode>, SimError> {
        let domain = cfg.domain()?;
        let mut ids = BTreeSet::new();
        for p in &self.profiles {
            if !ids.insert(&p.user_id) {
                return Err(SimError::Invalid(format!("duplicate profile {}", p.user_id)));
            }
            if !(0.0..=1.0).contains(&p.cooperativeness) || !(0.0..=1.0).contains(&p.lie_probability) {
                return Err(SimError::Invalid(format!("profile {}: probabilities must be in [0, 1]", p.user_id)));
            }
        }
        for t in self.task_arrival.values() {
            if !domain.tasks().any(|d| d == t) {
                return Err(SimError::Invalid(format!("unknown skill domain {t}")));
            }
        }

        let mut episodes = self.episodes.clone();
        if let Some(r) = &self.random_intents {
            let mut rng = stream(master_seed, "episodes", 0);
            let actions: Vec<&ActionId> = if r.actions.is_empty() {
                cfg.grammars.keys().collect()
            } else {
                r.actions.iter().collect()
            };
            let profiles: Vec<&UserId> = if r.profiles.is_empty() {
                self.profiles.iter().map(|p| &p.user_id).collect()
            } else {
                r.profiles.iter().collect()
            };
            if profiles.is_empty() {
                return Err(SimError::Invalid("random intents need at least one profile".into()));
            }
            for _ in 0..r.count {
                let idx = episodes.len();
                let open: Vec<&ActionId> = actions
                    .iter()
                    .copied()
                    .filter(|a| domain.action(a).is_ok_and(|a| self.arrival_of(&a.task_id) <= idx))
                    .collect();
                if open.is_empty() {
                    return Err(SimError::Invalid(format!("no action available at episode {idx}")));
                }
                let action = domain.action(open[rng.gen_range(0..open.len())]).map_err(ConfigError::from)?;
                let mut args = BTreeMap::new();
                for arg in &action.args {
                    let lexicon = domain
                        .slot_types
                        .get(&arg.slot_type)
                        .and_then(|s| s.lexicon.as_ref())
                        .ok_or_else(|| SimError::Invalid(format!("slot type {} has no lexicon to draw from", arg.slot_type)))?;
                    let value = &lexicon[rng.gen_range(0..lexicon.len())];
                    args.insert(arg.name.clone(), crate::tokens::join(value));
                }
                let profile = profiles[rng.gen_range(0..profiles.len())].clone();
                episodes.push(Episode {
                    profile,
                    step: Step::Intent(Intent { action_id: action.id.clone(), args, utterance: None }),
                });
            }
        }

        for (i, e) in episodes.iter().enumerate() {
            if !ids.contains(&e.profile) {
                return Err(SimError::Invalid(format!("episode {i}: unknown profile {}", e.profile)));
            }
            if let Step::Intent(intent) = &e.step {
                let action = domain
                    .action(&intent.action_id)
                    .map_err(|_| SimError::Invalid(format!("episode {i}: unknown action {}", intent.action_id)))?;
                if self.arrival_of(&action.task_id) > i {
                    return Err(SimError::Invalid(format!("episode {i}: domain {} is not available yet", action.task_id)));
                }
                if let Some(a) = action.args.iter().find(|a| !intent.args.contains_key(&a.name)) {
                    return Err(SimError::Invalid(format!("episode {i}: argument {} missing", a.name)));
                }
                if intent.utterance.is_none() && !cfg.grammars.contains_key(&intent.action_id) {
                    return Err(SimError::NoGrammar(intent.action_id.clone()));
                }
            }
        }
        Ok(episodes)
    }
}
