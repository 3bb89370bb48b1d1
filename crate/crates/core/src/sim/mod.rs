//! Deterministic multi-user simulation: scripted scenarios, simulated users
//! with paraphrase grammars, and per-episode metrics.

mod forgetting;
mod paraphrase;
mod run;
mod scenario;
mod user;

use thiserror::Error;

use crate::agent::AgentError;
use crate::config::ConfigError;
use crate::model::ActionId;

pub use forgetting::{evaluate_forgetting, ForgettingReport, RegressionPair, RegressionResult};
pub use paraphrase::paraphrase;
pub use run::{run_scenario, run_with, sweep, EpisodeRecord, MetricsLog, SimRun, Summary};
pub use scenario::{Episode, Intent, Mode, RandomIntents, Scenario, SimUserProfile, Step, SCENARIO_VERSION};
pub use user::{profile_rng, sim_respond, RespondCtx, UserMessage};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("no paraphrase grammar for {0}")]
    NoGrammar(ActionId),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("malformed scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
