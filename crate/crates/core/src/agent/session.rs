use serde::{Deserialize, Serialize};

use crate::knowledge::{FactId, FactStatus, QuestionId, SessionContext, SideQuestion, Vote};
use crate::matcher::NoveltyBand;
use crate::model::{ActionId, Bindings, ScId, SessionId, TaskId, UserId};
use crate::tokens::Token;

use super::AgentReply;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OptionCandidate {
    pub sc_id: ScId,
    pub action_id: ActionId,
    pub bindings: Bindings,
}

/// Dialogue phase of a session. Only the agent's operations move between
/// phases; every other input is a phase mismatch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "camelCase")]
pub enum Phase {
    Idle,
    AwaitOptionChoice { candidates: Vec<OptionCandidate> },
    #[serde(rename_all = "camelCase")]
    AwaitRephrase { attempts_left: u32 },
    #[serde(rename_all = "camelCase")]
    AwaitSlot { action_id: ActionId, pending: Vec<String>, bindings: Bindings },
    AwaitSideAnswer { question: SideQuestion },
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Idle => "Idle",
            Phase::AwaitOptionChoice { .. } => "AwaitOptionChoice",
            Phase::AwaitRephrase { .. } => "AwaitRephrase",
            Phase::AwaitSlot { .. } => "AwaitSlot",
            Phase::AwaitSideAnswer { .. } => "AwaitSideAnswer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskStatus {
    Open,
    Learned,
    Abandoned,
}

/// A command being grounded, and what was learned about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LearningTask {
    pub id: u64,
    pub original_command: Vec<Token>,
    /// Rephrasings given during the task; taught alongside the original.
    pub rephrases: Vec<Vec<Token>>,
    pub ground_truth_action_id: Option<ActionId>,
    pub bindings: Bindings,
    pub status: TaskStatus,
    /// Transcript `seq` of the user input that confirmed the ground truth.
    pub confirmed_by: Option<u64>,
    /// False when the command was grounded without help.
    pub needs_learning: bool,
    pub rephrases_left: u32,
    /// Novelty of the original command when first scored.
    #[serde(default)]
    pub novelty: Option<f64>,
    #[serde(default)]
    pub band: Option<NoveltyBand>,
}

impl LearningTask {
    pub fn new(id: u64, command: Vec<Token>, rephrases_left: u32) -> Self {
        LearningTask {
            id,
            original_command: command,
            rephrases: Vec::new(),
            ground_truth_action_id: None,
            bindings: Bindings::new(),
            status: TaskStatus::Open,
            confirmed_by: None,
            needs_learning: false,
            rephrases_left,
            novelty: None,
            band: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum EventPayload {
    Utterance { text: String },
    Irrelevant,
    #[serde(rename_all = "camelCase")]
    Novelty { score: f64, band: NoveltyBand, top_k: Vec<ScId> },
    Reply { reply: AgentReply },
    #[serde(rename_all = "camelCase")]
    OptionChosen { index: Option<usize>, action_id: Option<ActionId> },
    Rephrase { text: String },
    #[serde(rename_all = "camelCase")]
    SlotAnswer { arg_name: String, text: String },
    /// Slot filler outside the slot type's lexicon; accepted anyway.
    #[serde(rename_all = "camelCase")]
    LowConfidenceSlot { arg_name: String, value: String },
    /// The world refused a bound value; the slot is asked again.
    #[serde(rename_all = "camelCase")]
    Rejected { arg_name: String, reason: String },
    #[serde(rename_all = "camelCase")]
    Demonstration { action_id: ActionId, bindings: Bindings },
    #[serde(rename_all = "camelCase")]
    Executed { action_id: ActionId, bindings: Bindings },
    #[serde(rename_all = "camelCase")]
    Learned { sc_id: ScId, pattern: String, confirmed_by: u64 },
    Abandoned { reason: String },
    FactsExtracted { facts: Vec<FactId> },
    #[serde(rename_all = "camelCase")]
    Vote { fact_id: FactId, vote: Vote, status: Option<FactStatus> },
    #[serde(rename_all = "camelCase")]
    DeferredAnswered { question_id: QuestionId, fact_id: Option<FactId> },
    #[serde(rename_all = "camelCase")]
    DeferredDeclined { question_id: QuestionId },
}

/// One transcript line. `seq` counts events within the session; `ts` is the
/// agent's logical clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Event {
    pub seq: u64,
    pub ts: u64,
    pub session_id: SessionId,
    pub user_id: UserId,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: SessionId,
    pub user_id: UserId,
    pub phase: Phase,
    /// Remaining clarification questions for the current task.
    pub question_budget: u32,
    /// Clarification questions asked in the current task.
    pub questions_asked: u32,
    pub transcript: Vec<Event>,
    pub task: Option<LearningTask>,
    /// Most recent abandoned task, kept so a demonstration can resolve it.
    pub last_abandoned: Option<LearningTask>,
    pub side_question_asked: bool,
    pub context: SessionContext,
    /// Restricts matching to one skill domain (task-continual mode).
    pub task_filter: Option<TaskId>,
}

impl Session {
    pub fn new(id: SessionId, user_id: UserId, task_filter: Option<TaskId>) -> Self {
        Session {
            id,
            user_id,
            phase: Phase::Idle,
            question_budget: 0,
            questions_asked: 0,
            transcript: Vec::new(),
            task: None,
            last_abandoned: None,
            side_question_asked: false,
            context: SessionContext::default(),
            task_filter,
        }
    }

    /// The transcript as JSON lines.
    pub fn transcript_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.transcript {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }
}
