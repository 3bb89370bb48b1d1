//! The grounding loop: score a command against the seed store, execute what
//! is known, ask about what is not, and learn from the answers.

mod induce;
mod reply;
mod session;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{AgentSettings, ConfigError, DomainConfig};
use crate::knowledge::{KnowledgeBase, KnowledgeRules, QueryOutcome, SideQuestion, Vote};
use crate::matcher::{classify_novelty, novelty_score, NoveltyBand};
use crate::model::{
    parse_pattern, render_done_text, render_option_text, ActionId, ApiAction, Bindings, ModelError, Provenance, ScId,
    SessionId, TaskId, UserId,
};
use crate::store::{Domain, SeedStore};
use crate::tokens::{join, tokenize, Token};
use crate::world::{ExecError, Executor};

pub use induce::{induce_pattern, induce_seed_command, learn_task, Induced};
pub use reply::{AgentReply, Executed, Turn};
pub use session::{Event, EventPayload, LearningTask, OptionCandidate, Phase, Session, TaskStatus};

pub const REPHRASE_TEXT: &str = "Can you say it again in another way?";
const GIVE_UP_TEXT: &str = "Sorry, I could not work out what you meant. You can show me by picking the action yourself.";
const ACK_TEXT: &str = "Okay.";

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("no session {0}")]
    UnknownSession(SessionId),
    #[error("session is in phase {found}, expected {expected}")]
    PhaseMismatch { expected: &'static str, found: &'static str },
    #[error("option {index} is out of range (1..={len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("argument {0} is not pending")]
    NotPending(String),
    #[error("no abandoned task to demonstrate")]
    NoAbandonedTask,
    #[error("task has not been learned")]
    NotLearned,
    #[error("nothing to learn from an empty command")]
    NothingToLearn,
    #[error("unknown action {0}")]
    UnknownAction(ActionId),
    #[error("argument {0} is not bound")]
    MissingArg(String),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Model(ModelError),
}

impl From<ModelError> for AgentError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::UnknownAction(id) => AgentError::UnknownAction(id),
            other => AgentError::Model(other),
        }
    }
}

/// The user's reply to a side question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "camelCase")]
pub enum SideAnswer {
    Vote(Vote),
    Text(String),
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Outcome {
    /// Grounded without help.
    Executed,
    /// Grounded with the user's help and learned.
    Learned,
    Demonstrated,
    Abandoned,
    /// Grounded but the action failed in the world.
    Failed,
    Answered,
    Deferred,
    Noted,
    Irrelevant,
}

/// One interaction as seen by the agent. Scores are not kept, only the band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskRecord {
    pub task_id: u64,
    pub session_id: SessionId,
    pub user_id: UserId,
    pub ts: u64,
    pub command: String,
    pub band: Option<NoveltyBand>,
    pub questions: u32,
    pub outcome: Outcome,
    pub action_id: Option<ActionId>,
    pub learned: Vec<ScId>,
    pub store_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub settings: AgentSettings,
    pub knowledge: KnowledgeRules,
}

/// Everything the agent has learned, plus its counters.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub domain: Domain,
    pub store: SeedStore,
    pub kb: KnowledgeBase,
    pub metrics: Vec<TaskRecord>,
    /// Logical clock, advanced on every event.
    pub clock: u64,
    pub next_session: u64,
    pub next_task: u64,
}

impl AgentState {
    pub fn new(domain: Domain) -> Self {
        AgentState {
            domain,
            store: SeedStore::new(),
            kb: KnowledgeBase::new(),
            metrics: Vec::new(),
            clock: 0,
            next_session: 1,
            next_task: 1,
        }
    }
}

const QUESTION_WORDS: &[&str] = &["what", "who", "whom", "whose", "which", "where", "when", "why", "how", "do", "does", "is"];

pub fn is_question(tokens: &[Token]) -> bool {
    tokens.first().is_some_and(|t| QUESTION_WORDS.contains(&t.as_str()))
}

fn yes_no(tokens: &[Token]) -> Option<Vote> {
    match tokens.first()?.as_str() {
        "yes" | "yeah" | "yep" | "yup" | "sure" | "right" | "correct" | "true" => Some(Vote::Yes),
        "no" | "nope" | "nah" | "wrong" | "false" | "incorrect" => Some(Vote::No),
        _ => None,
    }
}

fn declines(tokens: &[Token]) -> bool {
    let text = join(tokens);
    tokens.is_empty()
        || ["no", "nope", "skip", "pass", "dunno", "no idea", "not sure", "i don t know", "i do not know", "i have no idea"]
            .iter()
            .any(|d| text == *d || text.starts_with(&format!("{d} ")))
}

pub struct Agent {
    config: AgentConfig,
    state: AgentState,
    sessions: BTreeMap<SessionId, Session>,
}

impl Agent {
    pub fn new(config: AgentConfig, state: AgentState) -> Self {
        Agent { config, state, sessions: BTreeMap::new() }
    }

    /// A fresh agent with the config's developer seed commands and facts.
    pub fn from_config(cfg: &DomainConfig) -> Result<Self, ConfigError> {
        Self::from_config_with(cfg, |_| true)
    }

    /// Like `from_config`, but installs developer seed commands only for the
    /// skill domains `enabled` accepts.
    pub fn from_config_with(cfg: &DomainConfig, enabled: impl Fn(&TaskId) -> bool) -> Result<Self, ConfigError> {
        let domain = cfg.domain()?;
        let knowledge = cfg.knowledge_rules()?;
        let mut agent = Agent::new(AgentConfig { settings: cfg.agent.clone(), knowledge }, AgentState::new(domain));
        agent.install_seed_commands(cfg, enabled)?;
        for [h, r, t] in &cfg.knowledge.facts {
            agent.state.kb.seed_fact(tokenize(h), r, tokenize(t));
        }
        Ok(agent)
    }

    /// Adds the developer seed commands of one skill domain. Returns the new ids.
    pub fn install_domain(&mut self, cfg: &DomainConfig, task: &TaskId) -> Result<Vec<ScId>, ConfigError> {
        self.install_seed_commands(cfg, |t| t == task)
    }

    fn install_seed_commands(&mut self, cfg: &DomainConfig, enabled: impl Fn(&TaskId) -> bool) -> Result<Vec<ScId>, ConfigError> {
        let mut added = Vec::new();
        for sc in &cfg.seed_commands {
            let action = self.state.domain.action(&sc.action)?;
            if !enabled(&action.task_id) {
                continue;
            }
            let pattern = parse_pattern(&sc.pattern, action)
                .map_err(|source| ConfigError::Pattern { pattern: sc.pattern.clone(), source })?;
            let at = self.state.clock;
            added.extend(self.state.store.insert(&self.state.domain, pattern, &sc.action, Provenance::Developer, at, vec![])?);
        }
        Ok(added)
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn into_state(self) -> AgentState {
        self.state
    }

    pub fn session(&self, id: SessionId) -> Option<&Session> {
        self.sessions.get(&id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.values()
    }

    pub fn open_session(&mut self, user_id: UserId, task_filter: Option<TaskId>) -> SessionId {
        let id = SessionId(self.state.next_session);
        self.state.next_session += 1;
        self.sessions.insert(id, Session::new(id, user_id, task_filter));
        id
    }

    pub fn close_session(&mut self, id: SessionId) -> Option<Session> {
        self.sessions.remove(&id)
    }

    /// True when no keyword rules are configured or some token contains a keyword.
    pub fn relevance(&self, text: &str) -> bool {
        let keys = &self.config.settings.relevance_keywords;
        if keys.is_empty() {
            return true;
        }
        let tokens = tokenize(text);
        keys.iter()
            .map(|k| k.to_lowercase())
            .any(|k| tokens.iter().any(|t| t.as_str().contains(k.as_str())))
    }

    /// Runs an action in the world and renders its past-tense result text.
    pub fn execute_action(
        &self,
        action_id: &ActionId,
        bindings: &Bindings,
        exec: &mut dyn Executor,
    ) -> Result<String, AgentError> {
        let action = self.state.domain.action(action_id)?;
        if let Some(a) = action.args.iter().find(|a| bindings.get(&a.name).is_none_or(|v| v.is_empty())) {
            return Err(AgentError::MissingArg(a.name.clone()));
        }
        exec.execute(action, bindings)?;
        Ok(render_done_text(action, bindings))
    }

    pub fn handle_utterance(&mut self, sid: SessionId, text: &str, exec: &mut dyn Executor) -> Result<Turn, AgentError> {
        self.with_session(sid, |agent, s| {
            match &s.phase {
                Phase::Idle => {}
                Phase::AwaitSideAnswer { .. } => {
                    agent.resolve_side(s, SideAnswer::Skip);
                }
                other => return Err(mismatch("Idle", other)),
            }
            agent.log(s, EventPayload::Utterance { text: text.to_string() });
            let tokens = tokenize(text);

            if !agent.relevance(text) {
                agent.log(s, EventPayload::Irrelevant);
                agent.record_simple(s, &tokens, Outcome::Irrelevant);
                return Ok(agent.say(s, AgentReply::Answer { text: ACK_TEXT.into() }));
            }
            if tokens.is_empty() {
                return Ok(agent.say(s, AgentReply::Apology { text: "Sorry, I didn't catch that.".into() }));
            }

            if is_question(&tokens) {
                let user = s.user_id.clone();
                match agent.state.kb.answer_query(&tokens, &agent.config.knowledge, &user, text) {
                    QueryOutcome::Answer { text, .. } => {
                        agent.record_simple(s, &tokens, Outcome::Answered);
                        return Ok(agent.say(s, AgentReply::Answer { text }));
                    }
                    QueryOutcome::Unknown(_) => {
                        agent.record_simple(s, &tokens, Outcome::Deferred);
                        let text = "I don't know yet. I'll ask around and let you know.".to_string();
                        return Ok(agent.say(s, AgentReply::Answer { text }));
                    }
                    QueryOutcome::Unparseable => {}
                }
            }

            let user = s.user_id.clone();
            let ex = agent.state.kb.extract_facts(&tokens, &agent.config.knowledge, &mut s.context, &user);
            if ex.fired {
                return Ok(agent.noted(s, &tokens, ex.new));
            }

            let mut task = LearningTask::new(agent.state.next_task, tokens.clone(), agent.config.settings.rephrase_attempts);
            agent.state.next_task += 1;
            task.status = TaskStatus::Open;
            s.task = Some(task);
            s.question_budget = agent.config.settings.question_budget;
            s.questions_asked = 0;
            agent.ground(s, &tokens, None, exec)
        })
    }

    /// `choice` is 1-based; `None` means none of the options.
    pub fn on_option_choice(
        &mut self,
        sid: SessionId,
        choice: Option<usize>,
        exec: &mut dyn Executor,
    ) -> Result<Turn, AgentError> {
        self.with_session(sid, |agent, s| {
            let Phase::AwaitOptionChoice { candidates } = &s.phase else {
                return Err(mismatch("AwaitOptionChoice", &s.phase));
            };
            let picked = match choice {
                Some(i) if i == 0 || i > candidates.len() => {
                    return Err(AgentError::IndexOutOfRange { index: i, len: candidates.len() })
                }
                Some(i) => Some(candidates[i - 1].clone()),
                None => None,
            };
            let seq = agent.log(
                s,
                EventPayload::OptionChosen { index: choice, action_id: picked.as_ref().map(|c| c.action_id.clone()) },
            );
            match picked {
                Some(c) => {
                    if let Some(t) = s.task.as_mut() {
                        t.confirmed_by = Some(seq);
                        t.needs_learning = true;
                    }
                    agent.proceed(s, c.action_id, c.bindings, exec)
                }
                None => Ok(agent.ask_rephrase(s)),
            }
        })
    }

    pub fn on_rephrase(&mut self, sid: SessionId, text: &str, exec: &mut dyn Executor) -> Result<Turn, AgentError> {
        self.with_session(sid, |agent, s| {
            if !matches!(s.phase, Phase::AwaitRephrase { .. }) {
                return Err(mismatch("AwaitRephrase", &s.phase));
            }
            let seq = agent.log(s, EventPayload::Rephrase { text: text.to_string() });
            let tokens = tokenize(text);
            if let Some(t) = s.task.as_mut() {
                t.rephrases_left = t.rephrases_left.saturating_sub(1);
                if !tokens.is_empty() && tokens != t.original_command {
                    t.rephrases.push(tokens.clone());
                }
            }
            if tokens.is_empty() {
                return Ok(agent.ask_rephrase(s));
            }
            agent.ground(s, &tokens, Some(seq), exec)
        })
    }

    pub fn on_slot_answer(
        &mut self,
        sid: SessionId,
        arg_name: &str,
        text: &str,
        exec: &mut dyn Executor,
    ) -> Result<Turn, AgentError> {
        self.with_session(sid, |agent, s| {
            let Phase::AwaitSlot { action_id, pending, bindings } = &s.phase else {
                return Err(mismatch("AwaitSlot", &s.phase));
            };
            if !pending.iter().any(|p| p == arg_name) {
                return Err(AgentError::NotPending(arg_name.to_string()));
            }
            let (action_id, mut bindings) = (action_id.clone(), bindings.clone());
            agent.log(s, EventPayload::SlotAnswer { arg_name: arg_name.to_string(), text: text.to_string() });
            let tokens = tokenize(text);
            let action = agent.state.domain.action(&action_id)?.clone();
            if tokens.is_empty() {
                return Ok(agent.ask_slot(s, &action, bindings));
            }
            let known = action
                .arg(arg_name)
                .and_then(|a| agent.state.domain.slot_types.get(&a.slot_type))
                .is_none_or(|st| st.knows(&tokens));
            if !known {
                agent.log(s, EventPayload::LowConfidenceSlot { arg_name: arg_name.to_string(), value: join(&tokens) });
            }
            bindings.insert(arg_name.to_string(), tokens);
            agent.proceed(s, action_id, bindings, exec)
        })
    }

    pub fn on_side_answer(&mut self, sid: SessionId, answer: SideAnswer) -> Result<Turn, AgentError> {
        self.with_session(sid, |agent, s| {
            if !matches!(s.phase, Phase::AwaitSideAnswer { .. }) {
                return Err(mismatch("AwaitSideAnswer", &s.phase));
            }
            Ok(agent.resolve_side(s, answer))
        })
    }

    /// Resolves the session's last abandoned task by the user performing the
    /// action directly.
    pub fn on_demonstration(
        &mut self,
        sid: SessionId,
        action_id: &ActionId,
        bindings: Bindings,
        exec: &mut dyn Executor,
    ) -> Result<Turn, AgentError> {
        self.with_session(sid, |agent, s| {
            if !matches!(s.phase, Phase::Idle) {
                return Err(mismatch("Idle", &s.phase));
            }
            if s.last_abandoned.is_none() {
                return Err(AgentError::NoAbandonedTask);
            }
            let action = agent.state.domain.action(action_id)?.clone();
            if let Some(a) = action.args.iter().find(|a| bindings.get(&a.name).is_none_or(|v| v.is_empty())) {
                return Err(AgentError::MissingArg(a.name.clone()));
            }
            let seq = agent.log(
                s,
                EventPayload::Demonstration { action_id: action_id.clone(), bindings: bindings.clone() },
            );
            let mut task = s.last_abandoned.take().expect("checked above");
            task.status = TaskStatus::Open;
            task.confirmed_by = Some(seq);
            task.needs_learning = true;
            task.ground_truth_action_id = Some(action_id.clone());
            task.bindings = bindings.clone();
            s.task = Some(task);
            agent.finish(s, &action, bindings, exec)
        })
    }

    fn with_session<R>(
        &mut self,
        sid: SessionId,
        f: impl FnOnce(&mut Self, &mut Session) -> Result<R, AgentError>,
    ) -> Result<R, AgentError> {
        let mut s = self.sessions.remove(&sid).ok_or(AgentError::UnknownSession(sid))?;
        let r = f(self, &mut s);
        self.sessions.insert(sid, s);
        r
    }

    fn log(&mut self, s: &mut Session, payload: EventPayload) -> u64 {
        self.state.clock += 1;
        let seq = s.transcript.len() as u64 + 1;
        s.transcript.push(Event { seq, ts: self.state.clock, session_id: s.id, user_id: s.user_id.clone(), payload });
        seq
    }

    fn say(&mut self, s: &mut Session, reply: AgentReply) -> Turn {
        let turn = Turn::new(reply);
        self.log(s, EventPayload::Reply { reply: turn.reply.clone() });
        turn
    }

    /// Asks a clarification question if the task budget allows, else gives up.
    fn ask(&mut self, s: &mut Session, reply: AgentReply, phase: Phase) -> Turn {
        if s.question_budget == 0 {
            return self.abandon(s, "question budget exhausted", Outcome::Abandoned, GIVE_UP_TEXT.into());
        }
        s.question_budget -= 1;
        s.questions_asked += 1;
        s.phase = phase;
        self.say(s, reply)
    }

    fn ask_rephrase(&mut self, s: &mut Session) -> Turn {
        let left = s.task.as_ref().map_or(0, |t| t.rephrases_left);
        if left == 0 {
            return self.abandon(s, "no rephrase attempts left", Outcome::Abandoned, GIVE_UP_TEXT.into());
        }
        self.ask(s, AgentReply::AskRephrase { text: REPHRASE_TEXT.into() }, Phase::AwaitRephrase { attempts_left: left })
    }

    fn ask_slot(&mut self, s: &mut Session, action: &ApiAction, bindings: Bindings) -> Turn {
        let pending: Vec<String> = action
            .args
            .iter()
            .filter(|a| bindings.get(&a.name).is_none_or(|v| v.is_empty()))
            .map(|a| a.name.clone())
            .collect();
        let arg = action.arg(&pending[0]).expect("pending args come from the schema");
        let reply = AgentReply::AskSlot { arg_name: arg.name.clone(), prompt: arg.prompt.clone() };
        self.ask(s, reply, Phase::AwaitSlot { action_id: action.id.clone(), pending, bindings })
    }

    fn ground(
        &mut self,
        s: &mut Session,
        tokens: &[Token],
        via_rephrase: Option<u64>,
        exec: &mut dyn Executor,
    ) -> Result<Turn, AgentError> {
        let settings = &self.config.settings;
        let filter = s.task_filter.clone();
        let report = novelty_score(
            tokens,
            self.state.store.commands(),
            |sc| filter.as_ref().is_none_or(|t| &sc.task_id == t),
            settings.alpha,
            settings.thresholds.k,
        );
        let band = classify_novelty(&report, &settings.thresholds);
        let floor = settings.option_floor;
        let k = settings.thresholds.k;
        self.log(
            s,
            EventPayload::Novelty {
                score: report.novelty_score,
                band,
                top_k: report.top_k.iter().map(|c| c.sc_id).collect(),
            },
        );
        if let Some(t) = s.task.as_mut() {
            if t.novelty.is_none() {
                t.novelty = Some(report.novelty_score);
                t.band = Some(band);
            }
        }

        match band {
            NoveltyBand::Known => {
                let best = report.ranked[0].clone();
                if let (Some(seq), Some(t)) = (via_rephrase, s.task.as_mut()) {
                    t.confirmed_by = Some(seq);
                    t.needs_learning = true;
                }
                self.proceed(s, best.action_id, best.bindings, exec)
            }
            NoveltyBand::AmbiguousNovel => {
                let mut candidates: Vec<OptionCandidate> = Vec::new();
                for c in report.ranked.iter().filter(|c| c.similarity > floor) {
                    if candidates.len() == k {
                        break;
                    }
                    if candidates.iter().all(|o| o.action_id != c.action_id) {
                        candidates.push(OptionCandidate {
                            sc_id: c.sc_id,
                            action_id: c.action_id.clone(),
                            bindings: c.bindings.clone(),
                        });
                    }
                }
                if candidates.len() < 2 {
                    return Ok(self.ask_rephrase(s));
                }
                let options = candidates
                    .iter()
                    .map(|c| {
                        let action = self.state.domain.action(&c.action_id)?;
                        Ok(render_option_text(action, &c.bindings))
                    })
                    .collect::<Result<Vec<_>, AgentError>>()?;
                Ok(self.ask(s, AgentReply::Options { options }, Phase::AwaitOptionChoice { candidates }))
            }
            NoveltyBand::StrongNovel => Ok(self.ask_rephrase(s)),
        }
    }

    /// Executes once every argument is bound, asking for the rest first.
    fn proceed(
        &mut self,
        s: &mut Session,
        action_id: ActionId,
        bindings: Bindings,
        exec: &mut dyn Executor,
    ) -> Result<Turn, AgentError> {
        let action = self.state.domain.action(&action_id)?.clone();
        if let Some(t) = s.task.as_mut() {
            t.ground_truth_action_id = Some(action_id);
            t.bindings = bindings.clone();
        }
        if action.args.iter().any(|a| bindings.get(&a.name).is_none_or(|v| v.is_empty())) {
            return Ok(self.ask_slot(s, &action, bindings));
        }
        self.finish(s, &action, bindings, exec)
    }

    fn finish(
        &mut self,
        s: &mut Session,
        action: &ApiAction,
        bindings: Bindings,
        exec: &mut dyn Executor,
    ) -> Result<Turn, AgentError> {
        let text = match self.execute_action(&action.id, &bindings, exec) {
            Ok(text) => text,
            Err(AgentError::Exec(e)) => {
                if s.question_budget == 0 || s.task.is_none() || action.arg(e.arg()).is_none() {
                    return Ok(self.abandon(s, &e.to_string(), Outcome::Failed, format!("Sorry, I couldn't do that: {e}.")));
                }
                self.log(s, EventPayload::Rejected { arg_name: e.arg().to_string(), reason: e.to_string() });
                let mut bindings = bindings;
                bindings.remove(e.arg());
                if let Some(t) = s.task.as_mut() {
                    t.bindings = bindings.clone();
                }
                return Ok(self.ask_slot(s, action, bindings));
            }
            Err(e) => return Err(e),
        };
        self.log(s, EventPayload::Executed { action_id: action.id.clone(), bindings: bindings.clone() });

        if let Some(mut task) = s.task.take() {
            let mut outcome = Outcome::Executed;
            let mut learned = Vec::new();
            if task.needs_learning {
                task.status = TaskStatus::Learned;
                let confirmed_by = task.confirmed_by.expect("learning tasks are confirmed by the user");
                let demonstrated = s
                    .transcript
                    .get(confirmed_by as usize - 1)
                    .is_some_and(|e| matches!(e.payload, EventPayload::Demonstration { .. }));
                outcome = if demonstrated { Outcome::Demonstrated } else { Outcome::Learned };
                self.state.clock += 1;
                let provenance = Provenance::Learned { user_id: s.user_id.clone(), session_id: s.id };
                let added = learn_task(&mut self.state.store, &self.state.domain, &task, provenance, self.state.clock)?;
                for (sc_id, pattern) in added {
                    self.log(s, EventPayload::Learned { sc_id, pattern, confirmed_by });
                    learned.push(sc_id);
                }
            }
            self.record(s, &task, outcome, Some(action.id.clone()), learned);
        }
        s.phase = Phase::Idle;

        let mut turn = Turn::new(AgentReply::ExecuteResult { text });
        turn.executed = Some(Executed { action_id: action.id.clone(), bindings });
        if !s.side_question_asked {
            if let Some(q) = self.state.kb.next_side_question(&s.user_id) {
                s.side_question_asked = true;
                turn.follow_up = Some(match &q {
                    SideQuestion::Verify { fact_id, question } => {
                        AgentReply::AskVerify { fact_id: *fact_id, question: question.clone() }
                    }
                    SideQuestion::Deferred { question_id, question } => {
                        AgentReply::AskDeferred { question_id: *question_id, question: question.clone() }
                    }
                });
                s.phase = Phase::AwaitSideAnswer { question: q };
            }
        }
        self.log(s, EventPayload::Reply { reply: turn.reply.clone() });
        if let Some(f) = &turn.follow_up {
            self.log(s, EventPayload::Reply { reply: f.clone() });
        }
        Ok(turn)
    }

    fn abandon(&mut self, s: &mut Session, reason: &str, outcome: Outcome, text: String) -> Turn {
        self.log(s, EventPayload::Abandoned { reason: reason.to_string() });
        if let Some(mut task) = s.task.take() {
            task.status = TaskStatus::Abandoned;
            let action = task.ground_truth_action_id.clone().filter(|_| outcome == Outcome::Failed);
            self.record(s, &task, outcome, action, vec![]);
            s.last_abandoned = Some(task);
        }
        s.phase = Phase::Idle;
        self.say(s, AgentReply::Apology { text })
    }

    fn noted(&mut self, s: &mut Session, tokens: &[Token], new: Vec<crate::knowledge::FactId>) -> Turn {
        self.log(s, EventPayload::FactsExtracted { facts: new.clone() });
        self.record_simple(s, tokens, Outcome::Noted);
        if new.is_empty() {
            return self.say(s, AgentReply::Answer { text: "I already knew that.".into() });
        }
        let mut said = Vec::new();
        for id in &new {
            if let Some(f) = self.state.kb.fact(*id) {
                said.push(f.text());
            }
            if let Some((text, target)) = self.state.kb.propose_property_question(*id, &self.config.knowledge) {
                self.state.kb.enqueue_property_question(text, target);
            }
        }
        self.say(s, AgentReply::Answer { text: format!("Thanks, noted: {}.", said.join("; ")) })
    }

    fn resolve_side(&mut self, s: &mut Session, answer: SideAnswer) -> Turn {
        let Phase::AwaitSideAnswer { question } = std::mem::replace(&mut s.phase, Phase::Idle) else {
            unreachable!("callers check the phase");
        };
        let user = s.user_id.clone();
        let rules = &self.config.knowledge;
        let text = match question {
            SideQuestion::Verify { fact_id, .. } => {
                let vote = match &answer {
                    SideAnswer::Vote(v) => Some(*v),
                    SideAnswer::Text(t) => yes_no(&tokenize(t)),
                    SideAnswer::Skip => None,
                };
                match vote {
                    Some(vote) => {
                        let status = self.state.kb.verify_fact(fact_id, &user, vote, rules).ok();
                        self.log(s, EventPayload::Vote { fact_id, vote, status });
                        "Thanks for letting me know."
                    }
                    None => "No problem.",
                }
            }
            SideQuestion::Deferred { question_id, .. } => {
                let tokens = match &answer {
                    SideAnswer::Text(t) => tokenize(t),
                    _ => Vec::new(),
                };
                let recorded = if declines(&tokens) {
                    None
                } else {
                    self.state.kb.record_deferred_answer(question_id, &tokens, &user).ok()
                };
                match recorded {
                    Some(fact_id) => {
                        self.log(s, EventPayload::DeferredAnswered { question_id, fact_id: Some(fact_id) });
                        "Thanks, I'll remember that."
                    }
                    None => {
                        let _ = self.state.kb.decline_deferred(question_id, rules);
                        self.log(s, EventPayload::DeferredDeclined { question_id });
                        "No problem."
                    }
                }
            }
        };
        self.say(s, AgentReply::Answer { text: text.into() })
    }

    fn record(&mut self, s: &Session, task: &LearningTask, outcome: Outcome, action_id: Option<ActionId>, learned: Vec<ScId>) {
        self.state.metrics.push(TaskRecord {
            task_id: task.id,
            session_id: s.id,
            user_id: s.user_id.clone(),
            ts: self.state.clock,
            command: join(&task.original_command),
            band: task.band,
            questions: s.questions_asked,
            outcome,
            action_id,
            learned,
            store_size: self.state.store.len(),
        });
    }

    fn record_simple(&mut self, s: &Session, tokens: &[Token], outcome: Outcome) {
        let task = LearningTask::new(self.state.next_task, tokens.to_vec(), 0);
        self.state.next_task += 1;
        self.state.metrics.push(TaskRecord {
            task_id: task.id,
            session_id: s.id,
            user_id: s.user_id.clone(),
            ts: self.state.clock,
            command: join(tokens),
            band: None,
            questions: 0,
            outcome,
            action_id: None,
            learned: vec![],
            store_size: self.state.store.len(),
        });
    }
}

fn mismatch(expected: &'static str, found: &Phase) -> AgentError {
    AgentError::PhaseMismatch { expected, found: found.name() }
}
