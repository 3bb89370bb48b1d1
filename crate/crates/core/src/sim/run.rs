use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentReply, Outcome, Phase, Turn};
use crate::config::DomainConfig;
use crate::knowledge::{FactSource, FactStatus, KbCounts};
use crate::model::{ActionId, SessionId, UserId};
use crate::world::WorldState;

use super::user::intent_bindings;
use super::{paraphrase, profile_rng, sim_respond, Intent, Mode, RespondCtx, Scenario, SimError, SimUserProfile, Step, UserMessage};

/// Safety cap on dialogue turns within one episode.
const MAX_TURNS: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpisodeRecord {
    pub episode: usize,
    pub user_id: UserId,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_id: Option<ActionId>,
    pub utterance: String,
    /// Right action and arguments, executed with no clarification question.
    pub first_try_success: bool,
    pub correct: bool,
    pub question_count: u32,
    pub outcome: Outcome,
    pub demonstrated: bool,
    pub store_size: usize,
    pub kb_counts: KbCounts,
    /// Crowd-verified facts that are false in the simulated world.
    pub verified_false: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub records: Vec<EpisodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Summary {
    pub episodes: usize,
    pub intents: usize,
    pub first_try_rate: f64,
    pub window: usize,
    /// First-try rate over the intent episodes among the last `window` episodes.
    pub last_window_rate: f64,
    /// Sliding-window first-try rate, one point per intent episode.
    pub curve: Vec<f64>,
    pub mean_questions: f64,
    /// Verified-but-false over verified, at the end of the run.
    pub contamination_rate: f64,
}

fn rate(records: &[&EpisodeRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().filter(|r| r.first_try_success).count() as f64 / records.len() as f64
}

impl MetricsLog {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(MetricsLog { records })
    }

    pub fn summary(&self, window: usize) -> Summary {
        let window = window.max(1);
        let intents: Vec<&EpisodeRecord> = self.records.iter().filter(|r| r.kind == "intent").collect();
        let tail_start = self.records.len().saturating_sub(window);
        let tail: Vec<&EpisodeRecord> = intents.iter().copied().filter(|r| r.episode >= tail_start).collect();
        let curve = (0..intents.len())
            .map(|i| rate(&intents[(i + 1).saturating_sub(window)..=i]))
            .collect();
        let questions: u32 = intents.iter().map(|r| r.question_count).sum();
        let (verified, false_) = self
            .records
            .last()
            .map_or((0, 0), |r| (r.kb_counts.verified, r.verified_false));
        Summary {
            episodes: self.records.len(),
            intents: intents.len(),
            first_try_rate: rate(&intents),
            window,
            last_window_rate: rate(&tail),
            curve,
            mean_questions: if intents.is_empty() { 0.0 } else { f64::from(questions) / intents.len() as f64 },
            contamination_rate: if verified == 0 { 0.0 } else { false_ as f64 / verified as f64 },
        }
    }
}

/// End state of a simulation run.
pub struct SimRun {
    pub agent: Agent,
    pub world: WorldState,
    pub metrics: MetricsLog,
}

/// Runs `scenario` on a fresh agent built from `cfg`.
pub fn run_scenario(scenario: &Scenario, cfg: &DomainConfig, master_seed: u64) -> Result<SimRun, SimError> {
    let agent = Agent::from_config_with(cfg, |t| scenario.initially_enabled(t))?;
    run_with(agent, WorldState::from_config(&cfg.world), scenario, cfg, master_seed)
}

/// Runs the same scenario under several seeds in parallel.
pub fn sweep(scenario: &Scenario, cfg: &DomainConfig, seeds: &[u64]) -> Vec<Result<MetricsLog, SimError>> {
    crate::parallel::map(seeds, |seed| run_scenario(scenario, cfg, *seed).map(|r| r.metrics))
}

struct Runner<'a> {
    agent: Agent,
    world: WorldState,
    cfg: &'a DomainConfig,
}

impl Runner<'_> {
    fn ctx_respond(
        &self,
        sid: SessionId,
        profile: &SimUserProfile,
        reply: &AgentReply,
        intent: Option<&Intent>,
        rng: &mut ChaCha8Rng,
        used: &mut Vec<usize>,
    ) -> Result<UserMessage, SimError> {
        let candidates = match self.agent.session(sid).map(|s| &s.phase) {
            Some(Phase::AwaitOptionChoice { candidates }) => candidates.as_slice(),
            _ => &[],
        };
        let ctx = RespondCtx {
            grammars: &self.cfg.grammars,
            domain: &self.agent.state().domain,
            kb: &self.agent.state().kb,
            world: &self.world,
            candidates,
        };
        sim_respond(profile, reply, intent, rng, &ctx, used)
    }

    fn side_question(&mut self, sid: SessionId, profile: &SimUserProfile, turn: &Turn, rng: &mut ChaCha8Rng) -> Result<(), SimError> {
        if let Some(f) = &turn.follow_up {
            if let UserMessage::Side(answer) = self.ctx_respond(sid, profile, f, None, rng, &mut Vec::new())? {
                self.agent.on_side_answer(sid, answer)?;
            }
        }
        Ok(())
    }

    /// Returns (executed, question count, demonstrated, utterance).
    fn intent(
        &mut self,
        sid: SessionId,
        profile: &SimUserProfile,
        intent: &Intent,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Option<crate::agent::Executed>, u32, bool, String), SimError> {
        let mut used = Vec::new();
        let text = match &intent.utterance {
            Some(u) => u.clone(),
            None => {
                let (idx, text) = paraphrase(intent, &self.cfg.grammars, rng, &used)?;
                used.push(idx);
                text
            }
        };
        let mut turn = self.agent.handle_utterance(sid, &text, &mut self.world)?;
        let mut questions = 0;
        for _ in 0..MAX_TURNS {
            if !turn.reply.is_task_question() {
                break;
            }
            questions += 1;
            turn = match self.ctx_respond(sid, profile, &turn.reply, Some(intent), rng, &mut used)? {
                UserMessage::Choice(c) => self.agent.on_option_choice(sid, c, &mut self.world)?,
                UserMessage::Rephrase(t) => self.agent.on_rephrase(sid, &t, &mut self.world)?,
                UserMessage::Slot { arg_name, text } => self.agent.on_slot_answer(sid, &arg_name, &text, &mut self.world)?,
                UserMessage::Side(_) | UserMessage::Done => break,
            };
        }
        let mut executed = turn.executed.clone();
        self.side_question(sid, profile, &turn, rng)?;

        let mut demonstrated = false;
        let abandoned = self.agent.session(sid).is_some_and(|s| s.last_abandoned.is_some());
        if executed.is_none() && profile.demonstrates && abandoned {
            let turn = self
                .agent
                .on_demonstration(sid, &intent.action_id, intent_bindings(intent), &mut self.world)?;
            demonstrated = true;
            executed = turn.executed.clone();
            self.side_question(sid, profile, &turn, rng)?;
        }
        Ok((executed, questions, demonstrated, text))
    }
}

/// Runs `scenario` on the given agent and world.
pub fn run_with(
    agent: Agent,
    world: WorldState,
    scenario: &Scenario,
    cfg: &DomainConfig,
    master_seed: u64,
) -> Result<SimRun, SimError> {
    let episodes = scenario.expand(cfg, master_seed)?;
    let profiles: BTreeMap<&UserId, &SimUserProfile> = scenario.profiles.iter().map(|p| (&p.user_id, p)).collect();
    let mut rngs: BTreeMap<&UserId, ChaCha8Rng> =
        scenario.profiles.iter().map(|p| (&p.user_id, profile_rng(master_seed, p))).collect();
    let mut run = Runner { agent, world, cfg };
    let mut metrics = MetricsLog::default();

    for (i, ep) in episodes.iter().enumerate() {
        if i > 0 {
            if let Some(task) = scenario.task_arrival.get(&i) {
                run.agent.install_domain(cfg, task)?;
            }
        }
        let profile = profiles[&ep.profile];
        let rng = rngs.get_mut(&ep.profile).expect("profiles validated");
        let filter = match (&ep.step, scenario.mode) {
            (Step::Intent(intent), Mode::Tcl) => Some(run.agent.state().domain.action(&intent.action_id).map_err(crate::agent::AgentError::from)?.task_id.clone()),
            _ => None,
        };
        let sid = run.agent.open_session(ep.profile.clone(), filter);
        let record_from = run.agent.state().metrics.len();

        let (kind, action_id, utterance, executed, questions, demonstrated) = match &ep.step {
            Step::Intent(intent) => {
                let (executed, q, demo, text) = run.intent(sid, profile, intent, rng)?;
                ("intent", Some(intent.action_id.clone()), text, executed, q, demo)
            }
            Step::Statement(text) | Step::Question(text) => {
                let kind = if matches!(ep.step, Step::Statement(_)) { "statement" } else { "question" };
                run.agent.handle_utterance(sid, text, &mut run.world)?;
                (kind, None, text.clone(), None, 0, false)
            }
        };
        run.agent.close_session(sid);

        let correct = match (&ep.step, &executed) {
            (Step::Intent(intent), Some(ex)) => ex.action_id == intent.action_id && ex.bindings == intent_bindings(intent),
            _ => false,
        };
        let state = run.agent.state();
        let outcome = state.metrics[record_from..]
            .last()
            .map(|r| r.outcome)
            .unwrap_or(Outcome::Abandoned);
        let verified_false = state
            .kb
            .facts()
            .iter()
            .filter(|f| f.status == FactStatus::Verified && f.source != FactSource::Seeded)
            .filter(|f| !run.world.is_true(&f.head, &f.relation, &f.tail))
            .count();
        metrics.records.push(EpisodeRecord {
            episode: i,
            user_id: ep.profile.clone(),
            kind: kind.to_string(),
            action_id,
            utterance,
            first_try_success: correct && questions == 0 && !demonstrated,
            correct,
            question_count: questions,
            outcome,
            demonstrated,
            store_size: state.store.len(),
            kb_counts: state.kb.counts(),
            verified_false,
        });
    }
    Ok(SimRun { agent: run.agent, world: run.world, metrics })
}
