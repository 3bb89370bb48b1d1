//! Domain config file.
//!
//! One versioned JSON document describes slot types, actions, developer seed
//! commands, knowledge rules, agent thresholds, paraphrase grammars for the
//! simulator and the simulated world. Field names are documented in the README.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{KnowledgeError, KnowledgeRules, PropertySpec, TripleRule};
use crate::matcher::{Thresholds, DEFAULT_ALPHA};
use crate::model::{parse_pattern, ActionId, ApiAction, ModelError, PatternError, SlotType, SlotTypeId};
use crate::tokens::tokenize;

pub const CONFIG_VERSION: u32 = 1;

/// Environment variable naming the default config path for the CLI.
pub const CONFIG_ENV: &str = "SOLA_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config version {found} is not supported (expected {CONFIG_VERSION})")]
    Version { found: u32 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("seed command {pattern:?}: {source}")]
    Pattern {
        pattern: String,
        #[source]
        source: PatternError,
    },
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error("invalid thresholds: need 0 < gammaLow < gammaHigh < 1 and k >= 1")]
    Thresholds,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DomainConfig {
    pub version: u32,
    #[serde(default)]
    pub slot_types: Vec<SlotTypeConfig>,
    #[serde(default)]
    pub actions: Vec<ApiAction>,
    #[serde(default)]
    pub seed_commands: Vec<SeedCommandConfig>,
    #[serde(default)]
    pub knowledge: KnowledgeConfig,
    #[serde(default)]
    pub agent: AgentSettings,
    #[serde(default)]
    pub grammars: BTreeMap<ActionId, GrammarConfig>,
    #[serde(default)]
    pub world: WorldConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SlotTypeConfig {
    pub id: SlotTypeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SeedCommandConfig {
    pub action: ActionId,
    /// Pattern text with `$NAME` markers.
    pub pattern: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RuleConfig {
    pub pattern: String,
    pub head: String,
    pub relation: String,
    pub tail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ask: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct KnowledgeConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_expiry")]
    pub deferred_expiry: u32,
    #[serde(default)]
    pub extraction_rules: Vec<RuleConfig>,
    #[serde(default)]
    pub question_rules: Vec<RuleConfig>,
    #[serde(default)]
    pub properties: BTreeMap<String, Vec<PropertySpec>>,
    /// Trusted `[head, relation, tail]` triples.
    #[serde(default)]
    pub facts: Vec<[String; 3]>,
}

fn default_k() -> usize {
    3
}
fn default_m() -> usize {
    2
}
fn default_expiry() -> u32 {
    5
}

impl Default for KnowledgeConfig {
    fn default() -> Self {
        KnowledgeConfig {
            k: default_k(),
            m: default_m(),
            deferred_expiry: default_expiry(),
            extraction_rules: vec![],
            question_rules: vec![],
            properties: BTreeMap::new(),
            facts: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AgentSettings {
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_budget")]
    pub question_budget: u32,
    #[serde(default = "default_rephrase")]
    pub rephrase_attempts: u32,
    /// Minimum similarity for a candidate to be listed as an option.
    #[serde(default = "default_floor")]
    pub option_floor: f64,
    /// Empty means every input is relevant.
    #[serde(default)]
    pub relevance_keywords: Vec<String>,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_budget() -> u32 {
    3
}
fn default_rephrase() -> u32 {
    2
}
fn default_floor() -> f64 {
    0.2
}

impl Default for AgentSettings {
    fn default() -> Self {
        AgentSettings {
            thresholds: Thresholds::default(),
            alpha: default_alpha(),
            question_budget: default_budget(),
            rephrase_attempts: default_rephrase(),
            option_floor: default_floor(),
            relevance_keywords: vec![],
        }
    }
}

/// Paraphrase grammar: templates with `{arg}` placeholders; any template word
/// that is a key of `synonyms` is replaced by one of its alternatives.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GrammarConfig {
    pub templates: Vec<String>,
    #[serde(default)]
    pub synonyms: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EffectConfig {
    #[serde(rename_all = "camelCase")]
    SetLight { place: String, on: bool },
    CycleColor,
    #[serde(rename_all = "camelCase")]
    SetColor { place: String, color: String },
    #[serde(rename_all = "camelCase")]
    SetTemperature { place: String, value: String },
    #[serde(rename_all = "camelCase")]
    AdjustTemperature { place: String, delta: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WorldConfig {
    #[serde(default)]
    pub rooms: Vec<String>,
    #[serde(default)]
    pub effects: BTreeMap<ActionId, EffectConfig>,
    /// The simulation's true world knowledge.
    #[serde(default)]
    pub truth: Vec<[String; 3]>,
}

impl DomainConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let found = raw
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ConfigError::Invalid("missing numeric `version` field".into()))?;
        if found != u64::from(CONFIG_VERSION) {
            return Err(ConfigError::Version { found: found as u32 });
        }
        let cfg: DomainConfig = serde_json::from_value(raw)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !self.agent.thresholds.is_valid() {
            return Err(ConfigError::Thresholds);
        }
        self.domain()?;
        self.knowledge_rules()?;
        for (id, g) in &self.grammars {
            if !self.actions.iter().any(|a| &a.id == id) {
                return Err(ConfigError::Model(ModelError::UnknownAction(id.clone())));
            }
            if g.templates.is_empty() {
                return Err(ConfigError::Invalid(format!("grammar for {id} has no templates")));
            }
        }
        Ok(())
    }

    pub fn slot_types(&self) -> Vec<SlotType> {
        self.slot_types
            .iter()
            .map(|s| SlotType {
                id: s.id.clone(),
                lexicon: s.lexicon.as_ref().map(|l| l.iter().map(|v| tokenize(v)).collect()),
            })
            .collect()
    }

    pub fn domain(&self) -> Result<crate::store::Domain, ConfigError> {
        let mut d = crate::store::Domain::default();
        for st in self.slot_types() {
            d.add_slot_type(st)?;
        }
        for a in &self.actions {
            d.add_action(a.clone())?;
        }
        for sc in &self.seed_commands {
            let action = d.action(&sc.action)?;
            parse_pattern(&sc.pattern, action).map_err(|source| ConfigError::Pattern {
                pattern: sc.pattern.clone(),
                source,
            })?;
        }
        Ok(d)
    }

    pub fn knowledge_rules(&self) -> Result<KnowledgeRules, ConfigError> {
        let k = &self.knowledge;
        if k.k == 0 || k.m == 0 || k.deferred_expiry == 0 {
            return Err(ConfigError::Invalid("k, m and deferredExpiry must be positive".into()));
        }
        let rule = |r: &RuleConfig| TripleRule::new(&r.pattern, &r.head, &r.relation, &r.tail).map(|t| t.with_ask(r.ask.clone()));
        let extraction = k.extraction_rules.iter().map(rule).collect::<Result<Vec<_>, _>>()?;
        let questions = k.question_rules.iter().map(rule).collect::<Result<Vec<_>, _>>()?;
        for q in &k.question_rules {
            if [&q.head, &q.tail].iter().filter(|t| t.trim() == "?").count() != 1 {
                return Err(KnowledgeError::BadQuestionRule.into());
            }
        }
        Ok(KnowledgeRules {
            extraction,
            questions,
            properties: k.properties.clone(),
            k: k.k,
            m: k.m,
            deferred_expiry: k.deferred_expiry,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "version": 1,
        "slotTypes": [{"id": "place", "lexicon": ["kitchen", "living room"]}],
        "actions": [{"id": "SwitchOffLight", "name": "SwitchOffLight", "taskId": "lights",
                     "args": [{"name": "X", "slotType": "place", "prompt": "Which room?"}],
                     "gloss": "switch off the light in the {X}"}],
        "seedCommands": [{"action": "SwitchOffLight", "pattern": "switch off the light in the $X"}]
    }"#;

    #[test]
    fn loads_minimal_config() {
        let cfg = DomainConfig::from_json(MINIMAL).unwrap();
        let d = cfg.domain().unwrap();
        assert_eq!(d.actions.len(), 1);
        assert_eq!(cfg.slot_types()[0].lexicon.as_ref().unwrap()[1], tokenize("living room"));
        assert_eq!(cfg.agent.question_budget, 3);
        assert_eq!(cfg.knowledge.k, 3);
    }

    #[test]
    fn version_is_mandatory() {
        let no_version = MINIMAL.replacen("\"version\": 1,", "", 1);
        assert!(matches!(DomainConfig::from_json(&no_version), Err(ConfigError::Invalid(_))));
        let v2 = MINIMAL.replacen("\"version\": 1", "\"version\": 2", 1);
        assert!(matches!(DomainConfig::from_json(&v2), Err(ConfigError::Version { found: 2 })));
    }

    #[test]
    fn bad_seed_pattern_rejected() {
        let bad = MINIMAL.replace("switch off the light in the $X\"", "$X\"");
        assert!(matches!(DomainConfig::from_json(&bad), Err(ConfigError::Pattern { .. })));
    }
}
