//! Agent state snapshots as JSON lines.
//!
//! The first line is a header with the format version, record counts, id
//! counters and a SHA-256 checksum over the remaining lines. Records follow in
//! a fixed kind order so every reference points to something defined above it.
//! Keys are written sorted and no scores are stored.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{AgentState, TaskRecord};
use crate::knowledge::{DeferredQuestion, FactTriple, KnowledgeBase, KnowledgeRules, QuestionStatus};
use crate::model::{ApiAction, ModelError, SeedCommand, SlotType};
use crate::store::{Domain, SeedStore};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("snapshot format {found} is not supported (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("checksum mismatch")]
    ChecksumMismatch,
    #[error("line {line}: {reason}")]
    InvariantViolation { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Counts {
    pub slot_types: usize,
    pub actions: usize,
    pub seed_commands: usize,
    pub facts: usize,
    pub deferred_questions: usize,
    pub metrics_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Counters {
    pub clock: u64,
    pub next_session: u64,
    pub next_task: u64,
    pub next_seed_command: u64,
    pub next_fact: u64,
    pub next_question: u64,
}

/// First line of a snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Header {
    pub format_version: u32,
    pub counts: Counts,
    pub counters: Counters,
    /// Verification thresholds the fact statuses were reached under.
    pub k: usize,
    pub m: usize,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "camelCase")]
enum Record {
    SlotType(SlotType),
    Action(ApiAction),
    SeedCommand(SeedCommand),
    Fact(FactTriple),
    DeferredQuestion(DeferredQuestion),
    MetricsPoint(TaskRecord),
}

impl Record {
    fn rank(&self) -> u8 {
        match self {
            Record::SlotType(_) => 0,
            Record::Action(_) => 1,
            Record::SeedCommand(_) => 2,
            Record::Fact(_) => 3,
            Record::DeferredQuestion(_) => 4,
            Record::MetricsPoint(_) => 5,
        }
    }
}

/// Serializes with sorted keys.
fn canonical<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("snapshot records serialize");
    serde_json::to_string(&v).expect("json values serialize")
}

fn checksum(lines: &[String]) -> String {
    let mut h = Sha256::new();
    for l in lines {
        h.update(l.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Renders `state` as snapshot text.
pub fn to_snapshot(state: &AgentState, rules: &KnowledgeRules) -> (String, Header) {
    let mut records = Vec::new();
    records.extend(state.domain.slot_types.values().cloned().map(Record::SlotType));
    records.extend(state.domain.actions.values().cloned().map(Record::Action));
    records.extend(state.store.commands().iter().cloned().map(Record::SeedCommand));
    records.extend(state.kb.facts().iter().cloned().map(Record::Fact));
    records.extend(state.kb.questions().iter().cloned().map(Record::DeferredQuestion));
    records.extend(state.metrics.iter().cloned().map(Record::MetricsPoint));
    let lines: Vec<String> = records.iter().map(canonical).collect();

    let (next_fact, next_question) = state.kb.next_ids();
    let header = Header {
        format_version: FORMAT_VERSION,
        counts: Counts {
            slot_types: state.domain.slot_types.len(),
            actions: state.domain.actions.len(),
            seed_commands: state.store.len(),
            facts: state.kb.facts().len(),
            deferred_questions: state.kb.questions().len(),
            metrics_points: state.metrics.len(),
        },
        counters: Counters {
            clock: state.clock,
            next_session: state.next_session,
            next_task: state.next_task,
            next_seed_command: state.store.next_id(),
            next_fact,
            next_question,
        },
        k: rules.k,
        m: rules.m,
        checksum: checksum(&lines),
    };
    let mut text = canonical(&header);
    text.push('\n');
    for l in &lines {
        text.push_str(l);
        text.push('\n');
    }
    (text, header)
}

pub fn save_snapshot(state: &AgentState, rules: &KnowledgeRules, path: &Path) -> Result<Header, SnapshotError> {
    let (text, header) = to_snapshot(state, rules);
    std::fs::write(path, text).map_err(|source| SnapshotError::Unwritable { path: path.display().to_string(), source })?;
    Ok(header)
}

pub fn load_snapshot(path: &Path) -> Result<(AgentState, Header), SnapshotError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| SnapshotError::Unreadable { path: path.display().to_string(), source })?;
    from_snapshot(&text)
}

fn violation(line: usize, reason: impl Into<String>) -> SnapshotError {
    SnapshotError::InvariantViolation { line, reason: reason.into() }
}

/// Parses snapshot text and re-validates every record.
pub fn from_snapshot(text: &str) -> Result<(AgentState, Header), SnapshotError> {
    let mut lines = text.lines();
    let head_line = lines.next().ok_or_else(|| violation(1, "empty snapshot"))?;
    let raw: serde_json::Value = serde_json::from_str(head_line).map_err(|source| SnapshotError::Json { line: 1, source })?;
    let found = raw.get("formatVersion").and_then(|v| v.as_u64()).ok_or_else(|| violation(1, "missing formatVersion"))?;
    if found != u64::from(FORMAT_VERSION) {
        return Err(SnapshotError::VersionMismatch { found: found as u32 });
    }
    let header: Header = serde_json::from_value(raw).map_err(|source| SnapshotError::Json { line: 1, source })?;
    let body: Vec<String> = lines.map(str::to_string).collect();
    if checksum(&body) != header.checksum {
        return Err(SnapshotError::ChecksumMismatch);
    }

    let mut domain = Domain::default();
    let mut commands = Vec::new();
    let mut facts = Vec::new();
    let mut questions = Vec::new();
    let mut metrics = Vec::new();
    let mut rank = 0;
    for (i, l) in body.iter().enumerate() {
        let line = i + 2;
        let rec: Record = serde_json::from_str(l).map_err(|source| SnapshotError::Json { line, source })?;
        if rec.rank() < rank {
            return Err(violation(line, "record out of order"));
        }
        rank = rec.rank();
        let model = |e: ModelError| violation(line, e.to_string());
        match rec {
            Record::SlotType(st) => domain.add_slot_type(st).map_err(model)?,
            Record::Action(a) => domain.add_action(a).map_err(model)?,
            Record::SeedCommand(sc) => {
                let action = domain.action(&sc.action_id).map_err(model)?;
                sc.validate(action).map_err(model)?;
                if commands.last().is_some_and(|p: &SeedCommand| p.id >= sc.id) {
                    return Err(violation(line, format!("seed command {} out of order", sc.id)));
                }
                commands.push(sc);
            }
            Record::Fact(f) => {
                if facts.last().is_some_and(|p: &FactTriple| p.id >= f.id) {
                    return Err(violation(line, format!("fact {} out of order", f.id)));
                }
                facts.push(f);
            }
            Record::DeferredQuestion(q) => {
                if let QuestionStatus::Answered { fact_id, .. } = &q.status {
                    if !facts.iter().any(|f| f.id == *fact_id) {
                        return Err(violation(line, format!("{} references unknown fact {fact_id}", q.id)));
                    }
                }
                if questions.last().is_some_and(|p: &DeferredQuestion| p.id >= q.id) {
                    return Err(violation(line, format!("question {} out of order", q.id)));
                }
                questions.push(q);
            }
            Record::MetricsPoint(p) => {
                let ids: BTreeSet<_> = commands.iter().map(|c| c.id).collect();
                if let Some(missing) = p.learned.iter().find(|id| !ids.contains(id)) {
                    return Err(violation(line, format!("metrics point references unknown seed command {missing}")));
                }
                if let Some(a) = &p.action_id {
                    domain.action(a).map_err(model)?;
                }
                metrics.push(p);
            }
        }
    }

    let c = header.counters;
    let counts = Counts {
        slot_types: domain.slot_types.len(),
        actions: domain.actions.len(),
        seed_commands: commands.len(),
        facts: facts.len(),
        deferred_questions: questions.len(),
        metrics_points: metrics.len(),
    };
    let end = body.len() + 1;
    if counts != header.counts {
        return Err(violation(1, "record counts do not match the header"));
    }
    let store = SeedStore::restore(&domain, commands, c.next_seed_command).map_err(|e| violation(end, e.to_string()))?;
    if facts.last().is_some_and(|f| f.id.0 >= c.next_fact) || questions.last().is_some_and(|q| q.id.0 >= c.next_question) {
        return Err(violation(1, "id counters behind stored records"));
    }
    let kb = KnowledgeBase::restore(facts, questions, c.next_fact, c.next_question);
    let rules = KnowledgeRules { k: header.k, m: header.m, ..KnowledgeRules::default() };
    kb.check_invariants(&rules).map_err(|e| violation(end, e))?;
    let state = AgentState {
        domain,
        store,
        kb,
        metrics,
        clock: c.clock,
        next_session: c.next_session,
        next_task: c.next_task,
    };
    Ok((state, header))
}
