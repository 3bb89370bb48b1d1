//! Accepted mutating calls, in order. Replaying a journal against a fresh
//! agent through the in-process API reproduces the server's end state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sola_core::agent::{Agent, AgentError, SideAnswer, Turn};
use sola_core::model::{ActionId, Bindings, SessionId, TaskId, UserId};
use sola_core::tokenize;
use sola_core::world::Executor;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "call", rename_all = "camelCase")]
pub enum Call {
    #[serde(rename_all = "camelCase")]
    OpenSession {
        session_id: SessionId,
        user_id: UserId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        task_filter: Option<TaskId>,
    },
    #[serde(rename_all = "camelCase")]
    Utterance { session_id: SessionId, text: String },
    #[serde(rename_all = "camelCase")]
    Rephrase { session_id: SessionId, text: String },
    #[serde(rename_all = "camelCase")]
    Choice { session_id: SessionId, index: Option<usize> },
    #[serde(rename_all = "camelCase")]
    Slot { session_id: SessionId, arg_name: String, text: String },
    #[serde(rename_all = "camelCase")]
    Side { session_id: SessionId, answer: SideAnswer },
    #[serde(rename_all = "camelCase")]
    Demonstrate { session_id: SessionId, action_id: ActionId, args: BTreeMap<String, String> },
}

pub fn bindings(args: &BTreeMap<String, String>) -> Bindings {
    args.iter().map(|(k, v)| (k.clone(), tokenize(v))).collect()
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("call {index}: {source}")]
    Agent { index: usize, source: AgentError },
    #[error("call {index}: session opened as {got}, journal says {expected}")]
    SessionId { index: usize, expected: SessionId, got: SessionId },
}

/// Applies one call through the engine API. `OpenSession` returns no turn.
pub fn apply(agent: &mut Agent, exec: &mut dyn Executor, call: &Call) -> Result<Option<Turn>, AgentError> {
    let turn = match call {
        Call::OpenSession { user_id, task_filter, .. } => {
            agent.open_session(user_id.clone(), task_filter.clone());
            return Ok(None);
        }
        Call::Utterance { session_id, text } => agent.handle_utterance(*session_id, text, exec)?,
        Call::Rephrase { session_id, text } => agent.on_rephrase(*session_id, text, exec)?,
        Call::Choice { session_id, index } => agent.on_option_choice(*session_id, *index, exec)?,
        Call::Slot { session_id, arg_name, text } => agent.on_slot_answer(*session_id, arg_name, text, exec)?,
        Call::Side { session_id, answer } => agent.on_side_answer(*session_id, answer.clone())?,
        Call::Demonstrate { session_id, action_id, args } => {
            agent.on_demonstration(*session_id, action_id, bindings(args), exec)?
        }
    };
    Ok(Some(turn))
}

pub fn replay(agent: &mut Agent, exec: &mut dyn Executor, calls: &[Call]) -> Result<(), ReplayError> {
    for (index, call) in calls.iter().enumerate() {
        if let Call::OpenSession { session_id, user_id, task_filter } = call {
            let got = agent.open_session(user_id.clone(), task_filter.clone());
            if got != *session_id {
                return Err(ReplayError::SessionId { index, expected: *session_id, got });
            }
            continue;
        }
        apply(agent, exec, call).map_err(|source| ReplayError::Agent { index, source })?;
    }
    Ok(())
}

pub fn to_jsonl(calls: &[Call]) -> String {
    calls
        .iter()
        .map(|c| serde_json::to_string(c).expect("calls serialize") + "\n")
        .collect()
}

pub fn from_jsonl(text: &str) -> Result<Vec<Call>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

impl Call {
    /// The POST request that produces this call on the HTTP surface.
    pub fn http_request(&self) -> (String, serde_json::Value) {
        use serde_json::json;
        match self {
            Call::OpenSession { user_id, task_filter, .. } => match task_filter {
                Some(t) => ("/sessions".into(), json!({ "userId": user_id, "taskFilter": t })),
                None => ("/sessions".into(), json!({ "userId": user_id })),
            },
            Call::Utterance { session_id, text } | Call::Rephrase { session_id, text } => {
                (format!("/sessions/{session_id}/utterance"), json!({ "text": text }))
            }
            Call::Choice { session_id, index } => (format!("/sessions/{session_id}/choice"), json!({ "index": index })),
            Call::Slot { session_id, arg_name, text } => {
                (format!("/sessions/{session_id}/slot"), json!({ "argName": arg_name, "text": text }))
            }
            Call::Side { session_id, answer } => {
                let body = match answer {
                    SideAnswer::Vote(v) => json!({ "vote": v }),
                    SideAnswer::Text(t) => json!({ "answer": t }),
                    SideAnswer::Skip => json!({ "skip": true }),
                };
                (format!("/sessions/{session_id}/side"), body)
            }
            Call::Demonstrate { session_id, action_id, args } => {
                (format!("/sessions/{session_id}/demonstrate"), json!({ "actionId": action_id, "args": args }))
            }
        }
    }
}
