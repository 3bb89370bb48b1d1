//! Subcommand implementations behind the `sola` binary.

pub mod report;
pub mod repl;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sola_core::agent::{Agent, AgentConfig};
use sola_core::config::DomainConfig;
use sola_core::knowledge::FactStatus;
use sola_core::model::{render_pattern, Provenance};
use sola_core::sim::{run_scenario, Scenario, Summary};
use sola_core::snapshot::{load_snapshot, save_snapshot, Header};
use sola_core::world::WorldState;

pub fn load_config(path: &Path) -> Result<DomainConfig> {
    DomainConfig::load(path).with_context(|| format!("loading config {}", path.display()))
}

/// Agent from a snapshot when `snapshot` names an existing file, else fresh
/// from the config.
pub fn load_agent(cfg: &DomainConfig, snapshot: Option<&Path>) -> Result<Agent> {
    match snapshot {
        Some(p) if p.exists() => {
            let (state, _) = load_snapshot(p).with_context(|| format!("loading snapshot {}", p.display()))?;
            let config = AgentConfig { settings: cfg.agent.clone(), knowledge: cfg.knowledge_rules()? };
            Ok(Agent::new(config, state))
        }
        _ => Ok(Agent::from_config(cfg)?),
    }
}

/// Config path for a scenario: its own `config` field (relative to the
/// scenario file) wins over `fallback`.
pub fn scenario_config(scenario: &Scenario, scenario_path: &Path, fallback: Option<&Path>) -> Result<PathBuf> {
    if let Some(rel) = &scenario.config {
        let base = scenario_path.parent().unwrap_or(Path::new("."));
        return Ok(base.join(rel));
    }
    match fallback {
        Some(p) => Ok(p.to_path_buf()),
        None => bail!("scenario names no config; pass --config or set SOLA_CONFIG"),
    }
}

pub struct SimulateArgs<'a> {
    pub scenario: &'a Path,
    pub config: Option<&'a Path>,
    pub seed: u64,
    pub out: &'a Path,
    pub snapshot_out: Option<&'a Path>,
    pub window: usize,
}

pub fn simulate(args: &SimulateArgs) -> Result<Summary> {
    let scenario = Scenario::load(args.scenario).with_context(|| format!("loading scenario {}", args.scenario.display()))?;
    let cfg = load_config(&scenario_config(&scenario, args.scenario, args.config)?)?;
    let run = run_scenario(&scenario, &cfg, args.seed)?;
    std::fs::write(args.out, run.metrics.to_jsonl()).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(p) = args.snapshot_out {
        save_snapshot(run.agent.state(), &run.agent.config().knowledge, p)?;
    }
    Ok(run.metrics.summary(args.window))
}

pub fn summary_line(s: &Summary) -> String {
    format!(
        "episodes {}  intents {}  first-try {:.3}  last-{} {:.3}  questions/intent {:.3}  contamination {:.3}",
        s.episodes, s.intents, s.first_try_rate, s.window, s.last_window_rate, s.mean_questions, s.contamination_rate
    )
}

/// Tables of seed commands, facts and open questions in a snapshot.
pub fn inspect(path: &Path) -> Result<String> {
    let (state, header): (_, Header) = load_snapshot(path).with_context(|| format!("loading snapshot {}", path.display()))?;
    let mut out = String::new();
    let c = header.counts;
    writeln!(
        out,
        "format v{}  seed commands {}  facts {}  questions {}  metrics points {}",
        header.format_version, c.seed_commands, c.facts, c.deferred_questions, c.metrics_points
    )?;
    writeln!(out, "\nSEED COMMANDS")?;
    writeln!(out, "{:<6} {:<18} {:<10} {:<16} pattern", "id", "action", "task", "provenance")?;
    for sc in state.store.commands() {
        let prov = match &sc.provenance {
            Provenance::Developer => "developer".to_string(),
            Provenance::Learned { user_id, .. } => format!("learned:{user_id}"),
        };
        writeln!(out, "{:<6} {:<18} {:<10} {:<16} {}", sc.id.to_string(), sc.action_id.as_str(), sc.task_id.as_str(), prov, render_pattern(&sc.pattern))?;
    }
    writeln!(out, "\nFACTS")?;
    writeln!(out, "{:<6} {:<11} {:>3} {:>3}  triple", "id", "status", "yes", "no")?;
    for f in state.kb.facts() {
        let status = match f.status {
            FactStatus::Unverified => "unverified",
            FactStatus::Verified => "verified",
            FactStatus::Rejected => "rejected",
        };
        writeln!(out, "{:<6} {:<11} {:>3} {:>3}  {}", f.id.to_string(), status, f.count(), f.neg_count(), f.text())?;
    }
    writeln!(out, "\nDEFERRED QUESTIONS")?;
    for q in state.kb.questions() {
        writeln!(out, "{:<6} {:<9} {}", q.id.to_string(), format!("{:?}", q.status).to_lowercase(), q.question_text)?;
    }
    Ok(out)
}

pub fn world_for(cfg: &DomainConfig) -> WorldState {
    WorldState::from_config(&cfg.world)
}
