use serde::{Deserialize, Serialize};

use crate::knowledge::{FactId, QuestionId};
use crate::model::{ActionId, Bindings};

/// What the agent says back. Serialized with a `replyType` tag whose values
/// are the variant names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "replyType")]
pub enum AgentReply {
    ExecuteResult { text: String },
    Options { options: Vec<String> },
    AskRephrase { text: String },
    #[serde(rename_all = "camelCase")]
    AskSlot { arg_name: String, prompt: String },
    #[serde(rename_all = "camelCase")]
    AskVerify { fact_id: FactId, question: String },
    #[serde(rename_all = "camelCase")]
    AskDeferred { question_id: QuestionId, question: String },
    Answer { text: String },
    Apology { text: String },
}

impl AgentReply {
    pub fn type_name(&self) -> &'static str {
        match self {
            AgentReply::ExecuteResult { .. } => "ExecuteResult",
            AgentReply::Options { .. } => "Options",
            AgentReply::AskRephrase { .. } => "AskRephrase",
            AgentReply::AskSlot { .. } => "AskSlot",
            AgentReply::AskVerify { .. } => "AskVerify",
            AgentReply::AskDeferred { .. } => "AskDeferred",
            AgentReply::Answer { .. } => "Answer",
            AgentReply::Apology { .. } => "Apology",
        }
    }

    /// Clarification questions that count against the task budget.
    pub fn is_task_question(&self) -> bool {
        matches!(self, AgentReply::Options { .. } | AgentReply::AskRephrase { .. } | AgentReply::AskSlot { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Executed {
    pub action_id: ActionId,
    pub bindings: Bindings,
}

/// One agent turn: the reply plus an optional side question appended after a
/// completed task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    #[serde(flatten)]
    pub reply: AgentReply,
    #[serde(rename = "followUp", default, skip_serializing_if = "Option::is_none")]
    pub follow_up: Option<AgentReply>,
    #[serde(skip)]
    pub executed: Option<Executed>,
}

impl Turn {
    pub fn new(reply: AgentReply) -> Self {
        Turn { reply, follow_up: None, executed: None }
    }

    /// The reply the user is expected to respond to.
    pub fn pending(&self) -> &AgentReply {
        self.follow_up.as_ref().unwrap_or(&self.reply)
    }
}
