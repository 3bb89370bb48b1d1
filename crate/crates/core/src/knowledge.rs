//! Facts learned in conversation.
//!
//! Triples are extracted from user statements with pattern rules, collected
//! from users answering questions the agent could not answer, and kept in an
//! unverified buffer until `k` distinct other users confirm them. `m` denials
//! reject a fact. Unverified facts are still used in answers, flagged as such.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matcher::align_pattern;
use crate::model::{parse_pattern_with, Bindings, PatternElement, PatternError, ScId, UserId};
use crate::tokens::{join, tokenize, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FactId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuestionId(pub u64);

impl fmt::Display for FactId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FactStatus {
    Unverified,
    Verified,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FactSource {
    #[serde(rename_all = "camelCase")]
    Extracted { user_id: UserId },
    #[serde(rename_all = "camelCase")]
    Answered { user_id: UserId },
    Seeded,
}

impl FactSource {
    pub fn user(&self) -> Option<&UserId> {
        match self {
            FactSource::Extracted { user_id } | FactSource::Answered { user_id } => Some(user_id),
            FactSource::Seeded => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FactTriple {
    pub id: FactId,
    pub head: Vec<Token>,
    pub relation: String,
    pub tail: Vec<Token>,
    pub status: FactStatus,
    pub source: FactSource,
    /// Users who confirmed the fact; never contains the source user.
    pub verifiers: BTreeSet<UserId>,
    pub rejecters: BTreeSet<UserId>,
}

impl FactTriple {
    pub fn count(&self) -> usize {
        self.verifiers.len()
    }

    pub fn neg_count(&self) -> usize {
        self.rejecters.len()
    }

    pub fn same_triple(&self, head: &[Token], relation: &str, tail: &[Token]) -> bool {
        self.head == head && self.relation == relation && self.tail == tail
    }

    pub fn text(&self) -> String {
        format!("{} {} {}", join(&self.head), relation_words(&self.relation), join(&self.tail))
    }
}

fn relation_words(rel: &str) -> String {
    if rel == "isa" {
        "is a".to_string()
    } else {
        rel.replace('_', " ")
    }
}

/// A triple with exactly one unknown part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TripleQuery {
    pub head: Option<Vec<Token>>,
    pub relation: String,
    pub tail: Option<Vec<Token>>,
}

impl TripleQuery {
    fn matches(&self, f: &FactTriple) -> bool {
        f.relation == self.relation
            && self.head.as_ref().is_none_or(|h| *h == f.head)
            && self.tail.as_ref().is_none_or(|t| *t == f.tail)
    }

    /// The part of `f` this query asks for.
    fn hole_of<'a>(&self, f: &'a FactTriple) -> &'a [Token] {
        if self.head.is_none() {
            &f.head
        } else {
            &f.tail
        }
    }

    fn fill(&self, value: Vec<Token>) -> (Vec<Token>, Vec<Token>) {
        match (&self.head, &self.tail) {
            (None, Some(t)) => (value, t.clone()),
            (Some(h), _) => (h.clone(), value),
            (None, None) => (value, Vec::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum QuestionStatus {
    Open,
    #[serde(rename_all = "camelCase")]
    Answered { tail: Vec<Token>, by_user_id: UserId, fact_id: FactId },
    #[serde(rename_all = "camelCase")]
    Expired { after_attempts: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeferredQuestion {
    pub id: QuestionId,
    pub question_text: String,
    pub target: TripleQuery,
    /// `None` for property questions the agent raised itself.
    pub origin_user_id: Option<UserId>,
    pub status: QuestionStatus,
    pub offers: u32,
}

/// One part of a rule's triple template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Var(String),
    Const(Vec<Token>),
    /// Most recent `isa` subject of the given type in the session.
    Context(String),
    Hole,
}

impl Term {
    /// `$X` variable, `@type` context reference, `?` hole, anything else a constant.
    pub fn parse(s: &str) -> Term {
        let s = s.trim();
        if let Some(v) = s.strip_prefix('$') {
            Term::Var(v.to_string())
        } else if let Some(t) = s.strip_prefix('@') {
            Term::Context(t.to_string())
        } else if s == "?" {
            Term::Hole
        } else {
            Term::Const(tokenize(s))
        }
    }

    fn resolve(&self, bindings: &Bindings, ctx: &SessionContext) -> Option<Vec<Token>> {
        match self {
            Term::Var(v) => bindings.get(v).cloned(),
            Term::Const(c) => Some(c.clone()),
            Term::Context(t) => ctx.last_of_type.get(t).cloned(),
            Term::Hole => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleRule {
    pub pattern: Vec<PatternElement>,
    pub head: Term,
    pub relation: String,
    pub tail: Term,
    /// Question rules only: text used when asking other users.
    pub ask: Option<String>,
}

impl TripleRule {
    pub fn new(pattern: &str, head: &str, relation: &str, tail: &str) -> Result<Self, KnowledgeError> {
        let pattern = parse_pattern_with(pattern, |_| Some("text".into()))?;
        let rule = TripleRule {
            pattern,
            head: Term::parse(head),
            relation: relation.to_string(),
            tail: Term::parse(tail),
            ask: None,
        };
        for term in [&rule.head, &rule.tail] {
            if let Term::Var(v) = term {
                let bound = rule
                    .pattern
                    .iter()
                    .any(|e| matches!(e, PatternElement::Variable { name, .. } if name == v));
                if !bound {
                    return Err(KnowledgeError::UnboundTemplateVar(v.clone()));
                }
            }
        }
        Ok(rule)
    }

    pub fn with_ask(mut self, ask: Option<String>) -> Self {
        self.ask = ask;
        self
    }

    fn holes(&self) -> usize {
        [&self.head, &self.tail].iter().filter(|t| matches!(t, Term::Hole)).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PropertySpec {
    pub relation: String,
    /// Question text with a `{X}` placeholder for the subject.
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeRules {
    pub extraction: Vec<TripleRule>,
    pub questions: Vec<TripleRule>,
    pub properties: BTreeMap<String, Vec<PropertySpec>>,
    /// Distinct confirmations needed to verify a fact.
    pub k: usize,
    /// Distinct denials that reject a fact.
    pub m: usize,
    /// Unanswered offers after which a deferred question expires.
    pub deferred_expiry: u32,
}

impl Default for KnowledgeRules {
    fn default() -> Self {
        KnowledgeRules {
            extraction: Vec::new(),
            questions: Vec::new(),
            properties: BTreeMap::new(),
            k: 3,
            m: 2,
            deferred_expiry: 5,
        }
    }
}

/// Per-session memory used to resolve `@type` references.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionContext {
    pub last_of_type: BTreeMap<String, Vec<Token>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KnowledgeError {
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error("template variable ${0} is not bound by the rule pattern")]
    UnboundTemplateVar(String),
    #[error("question rules need exactly one `?` in the triple")]
    BadQuestionRule,
    #[error("unknown fact {0}")]
    UnknownFact(FactId),
    #[error("unknown question {0}")]
    UnknownQuestion(QuestionId),
    #[error("user already voted on this fact")]
    DuplicateVerifier,
    #[error("users cannot verify their own facts")]
    SelfVerification,
    #[error("fact is already verified or rejected")]
    AlreadyFinal,
    #[error("question is no longer open")]
    QuestionClosed,
    #[error("users cannot answer their own questions")]
    SelfAnswer,
    #[error("answer is empty")]
    EmptyAnswer,
}

/// Result of running the extraction rules over one utterance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extraction {
    /// Some rule matched, even if all its triples were already known.
    pub fired: bool,
    pub new: Vec<FactId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryOutcome {
    Answer { text: String, facts: Vec<FactId> },
    Unknown(QuestionId),
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SideQuestion {
    Verify { fact_id: FactId, question: String },
    Deferred { question_id: QuestionId, question: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vote {
    Yes,
    No,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    facts: Vec<FactTriple>,
    questions: Vec<DeferredQuestion>,
    next_fact: u64,
    next_question: u64,
}

/// Exact (zero-cost) occurrence of `pattern` inside `tokens`: leftmost start,
/// then shortest window. A pattern ending in a variable takes the longest
/// window instead, so the value runs to the end of the utterance.
fn find_exact(tokens: &[Token], pattern: &[PatternElement]) -> Option<(usize, Bindings)> {
    let greedy = pattern.last().is_some_and(|el| !el.is_literal());
    for start in 0..tokens.len() {
        let ends: Box<dyn Iterator<Item = usize>> = if greedy {
            Box::new((start + 1..=tokens.len()).rev())
        } else {
            Box::new(start + 1..=tokens.len())
        };
        for end in ends {
            let window = &tokens[start..end];
            let a = align_pattern(window, pattern, ScId(0)).ok()?;
            if a.feasible && a.edit_cost == 0 {
                return Some((start, a.bindings(window)));
            }
        }
    }
    None
}

const LEAD_INS: &[&[&str]] = &[
    &["it", "s"],
    &["it", "is"],
    &["its"],
    &["i", "think"],
    &["i", "believe"],
    &["that", "s"],
    &["that", "is"],
    &["the", "answer", "is"],
];

/// Drops conversational lead-ins such as "it's" from an answer.
pub fn strip_lead_ins(mut tokens: &[Token]) -> &[Token] {
    'outer: loop {
        for lead in LEAD_INS {
            if tokens.len() > lead.len() && tokens.iter().zip(lead.iter()).all(|(t, w)| t.as_str() == *w) {
                tokens = &tokens[lead.len()..];
                continue 'outer;
            }
        }
        return tokens;
    }
}

impl KnowledgeBase {
    pub fn new() -> Self {
        KnowledgeBase { facts: Vec::new(), questions: Vec::new(), next_fact: 1, next_question: 1 }
    }

    pub fn facts(&self) -> &[FactTriple] {
        &self.facts
    }

    pub fn questions(&self) -> &[DeferredQuestion] {
        &self.questions
    }

    pub fn fact(&self, id: FactId) -> Option<&FactTriple> {
        self.facts.iter().find(|f| f.id == id)
    }

    pub fn question(&self, id: QuestionId) -> Option<&DeferredQuestion> {
        self.questions.iter().find(|q| q.id == id)
    }

    pub fn next_ids(&self) -> (u64, u64) {
        (self.next_fact, self.next_question)
    }

    pub fn restore(
        facts: Vec<FactTriple>,
        questions: Vec<DeferredQuestion>,
        next_fact: u64,
        next_question: u64,
    ) -> Self {
        KnowledgeBase { facts, questions, next_fact, next_question }
    }

    /// Checks the fact invariants under the given thresholds.
    pub fn check_invariants(&self, rules: &KnowledgeRules) -> Result<(), String> {
        for f in &self.facts {
            if let Some(src) = f.source.user() {
                if f.verifiers.contains(src) || f.rejecters.contains(src) {
                    return Err(format!("{}: source user voted", f.id));
                }
            }
            if !f.verifiers.is_disjoint(&f.rejecters) {
                return Err(format!("{}: user voted both ways", f.id));
            }
            let ok = match f.status {
                FactStatus::Unverified => f.count() < rules.k && f.neg_count() < rules.m,
                FactStatus::Verified => f.source == FactSource::Seeded || f.count() >= rules.k,
                FactStatus::Rejected => f.neg_count() >= rules.m,
            };
            if !ok {
                return Err(format!("{}: status {:?} inconsistent with votes", f.id, f.status));
            }
        }
        for q in &self.questions {
            if let QuestionStatus::Answered { fact_id, .. } = &q.status {
                if self.fact(*fact_id).is_none() {
                    return Err(format!("{}: answered with missing fact", q.id));
                }
            }
        }
        Ok(())
    }

    fn find(&self, head: &[Token], relation: &str, tail: &[Token]) -> Option<&FactTriple> {
        self.facts.iter().find(|f| f.same_triple(head, relation, tail))
    }

    fn push_fact(&mut self, head: Vec<Token>, relation: &str, tail: Vec<Token>, status: FactStatus, source: FactSource) -> FactId {
        let id = FactId(self.next_fact);
        self.next_fact += 1;
        self.facts.push(FactTriple {
            id,
            head,
            relation: relation.to_string(),
            tail,
            status,
            source,
            verifiers: BTreeSet::new(),
            rejecters: BTreeSet::new(),
        });
        id
    }

    /// Adds a trusted fact. Returns `None` if the triple is already known.
    pub fn seed_fact(&mut self, head: Vec<Token>, relation: &str, tail: Vec<Token>) -> Option<FactId> {
        if self.find(&head, relation, &tail).is_some() {
            return None;
        }
        Some(self.push_fact(head, relation, tail, FactStatus::Verified, FactSource::Seeded))
    }

    /// Fires every extraction rule that occurs verbatim in `tokens` and stores
    /// the new triples as unverified. Rules fire in utterance order so that
    /// `@type` references see subjects mentioned earlier in the same utterance.
    pub fn extract_facts(
        &mut self,
        tokens: &[Token],
        rules: &KnowledgeRules,
        ctx: &mut SessionContext,
        user: &UserId,
    ) -> Extraction {
        let mut fires: Vec<(usize, usize, Bindings)> = rules
            .extraction
            .iter()
            .enumerate()
            .filter_map(|(i, r)| find_exact(tokens, &r.pattern).map(|(pos, b)| (pos, i, b)))
            .collect();
        fires.sort_by_key(|(pos, i, _)| (*pos, *i));

        let fired = !fires.is_empty();
        let mut out = Vec::new();
        for (_, i, bindings) in fires {
            let rule = &rules.extraction[i];
            let (Some(head), Some(tail)) = (rule.head.resolve(&bindings, ctx), rule.tail.resolve(&bindings, ctx)) else {
                continue;
            };
            if head.is_empty() || tail.is_empty() {
                continue;
            }
            if rule.relation == "isa" {
                ctx.last_of_type.insert(join(&tail), head.clone());
            }
            if self.find(&head, &rule.relation, &tail).is_some() {
                continue;
            }
            let source = FactSource::Extracted { user_id: user.clone() };
            out.push(self.push_fact(head, &rule.relation, tail, FactStatus::Unverified, source));
        }
        Extraction { fired, new: out }
    }

    /// Parses a question with the question rules and answers it from known
    /// facts. Unanswerable questions are queued for other users.
    pub fn answer_query(&mut self, tokens: &[Token], rules: &KnowledgeRules, user: &UserId, raw: &str) -> QueryOutcome {
        let parsed = rules.questions.iter().find_map(|r| {
            if r.holes() != 1 {
                return None;
            }
            let a = align_pattern(tokens, &r.pattern, ScId(0)).ok()?;
            (a.feasible && a.edit_cost == 0).then(|| (r, a.bindings(tokens)))
        });
        let Some((rule, bindings)) = parsed else {
            return QueryOutcome::Unparseable;
        };
        let ctx = SessionContext::default();
        let query = TripleQuery {
            head: rule.head.resolve(&bindings, &ctx),
            relation: rule.relation.clone(),
            tail: rule.tail.resolve(&bindings, &ctx),
        };

        let usable: Vec<&FactTriple> = self
            .facts
            .iter()
            .filter(|f| f.status != FactStatus::Rejected && query.matches(f))
            .collect();
        let verified: Vec<&FactTriple> = usable.iter().copied().filter(|f| f.status == FactStatus::Verified).collect();
        let (chosen, flag) = if !verified.is_empty() { (verified, "") } else { (usable, " (unverified)") };
        if !chosen.is_empty() {
            let text = chosen
                .iter()
                .map(|f| format!("{}{flag}", join(query.hole_of(f))))
                .collect::<Vec<_>>()
                .join(" and ");
            return QueryOutcome::Answer { text, facts: chosen.iter().map(|f| f.id).collect() };
        }

        if let Some(q) = self
            .questions
            .iter()
            .find(|q| q.status == QuestionStatus::Open && q.target == query)
        {
            return QueryOutcome::Unknown(q.id);
        }
        let question_text = match &rule.ask {
            Some(ask) => crate::model::fill_template(ask, |name| {
                bindings.get(name).map(|v| join(v)).unwrap_or_default()
            }),
            None => format!("Hey, do you happen to know: {}?", raw.trim().trim_end_matches('?')),
        };
        QueryOutcome::Unknown(self.push_question(question_text, query, Some(user.clone())))
    }

    fn push_question(&mut self, question_text: String, target: TripleQuery, origin: Option<UserId>) -> QuestionId {
        let id = QuestionId(self.next_question);
        self.next_question += 1;
        self.questions.push(DeferredQuestion {
            id,
            question_text,
            target,
            origin_user_id: origin,
            status: QuestionStatus::Open,
            offers: 0,
        });
        id
    }

    /// For a new `isa` fact, the first configured property of its type that is
    /// still unknown, as `(question text, target)`.
    pub fn propose_property_question(&self, fact: FactId, rules: &KnowledgeRules) -> Option<(String, TripleQuery)> {
        let f = self.fact(fact)?;
        if f.relation != "isa" {
            return None;
        }
        let props = rules.properties.get(&join(&f.tail))?;
        props.iter().find_map(|p| {
            let target = TripleQuery { head: Some(f.head.clone()), relation: p.relation.clone(), tail: None };
            let known = self.facts.iter().any(|g| g.status != FactStatus::Rejected && target.matches(g));
            let asked = self.questions.iter().any(|q| q.status == QuestionStatus::Open && q.target == target);
            (!known && !asked).then(|| {
                let subject = join(&f.head);
                (crate::model::fill_template(&p.question, |_| subject.clone()), target)
            })
        })
    }

    /// Queues a property question raised by the agent itself.
    pub fn enqueue_property_question(&mut self, text: String, target: TripleQuery) -> QuestionId {
        self.push_question(text, target, None)
    }

    /// The side question to put to `user`: the oldest unverified fact they did
    /// not source or vote on, else the oldest open question they did not ask.
    pub fn next_side_question(&self, user: &UserId) -> Option<SideQuestion> {
        let fact = self.facts.iter().find(|f| {
            f.status == FactStatus::Unverified
                && f.source.user() != Some(user)
                && !f.verifiers.contains(user)
                && !f.rejecters.contains(user)
        });
        if let Some(f) = fact {
            return Some(SideQuestion::Verify { fact_id: f.id, question: format!("Is it true that {}?", f.text()) });
        }
        self.questions
            .iter()
            .find(|q| q.status == QuestionStatus::Open && q.origin_user_id.as_ref() != Some(user))
            .map(|q| SideQuestion::Deferred { question_id: q.id, question: q.question_text.clone() })
    }

    pub fn verify_fact(&mut self, id: FactId, user: &UserId, vote: Vote, rules: &KnowledgeRules) -> Result<FactStatus, KnowledgeError> {
        let f = self
            .facts
            .iter_mut()
            .find(|f| f.id == id)
            .ok_or(KnowledgeError::UnknownFact(id))?;
        if f.status != FactStatus::Unverified {
            return Err(KnowledgeError::AlreadyFinal);
        }
        if f.source.user() == Some(user) {
            return Err(KnowledgeError::SelfVerification);
        }
        if f.verifiers.contains(user) || f.rejecters.contains(user) {
            return Err(KnowledgeError::DuplicateVerifier);
        }
        match vote {
            Vote::Yes => {
                f.verifiers.insert(user.clone());
                if f.count() >= rules.k {
                    f.status = FactStatus::Verified;
                }
            }
            Vote::No => {
                f.rejecters.insert(user.clone());
                if f.neg_count() >= rules.m {
                    f.status = FactStatus::Rejected;
                }
            }
        }
        Ok(f.status)
    }

    /// Stores `answer` to an open question as an unverified fact.
    pub fn record_deferred_answer(&mut self, id: QuestionId, answer: &[Token], user: &UserId) -> Result<FactId, KnowledgeError> {
        let q = self.question(id).ok_or(KnowledgeError::UnknownQuestion(id))?;
        if q.status != QuestionStatus::Open {
            return Err(KnowledgeError::QuestionClosed);
        }
        if q.origin_user_id.as_ref() == Some(user) {
            return Err(KnowledgeError::SelfAnswer);
        }
        let value = strip_lead_ins(answer).to_vec();
        if value.is_empty() {
            return Err(KnowledgeError::EmptyAnswer);
        }
        let (head, tail) = q.target.fill(value.clone());
        let relation = q.target.relation.clone();
        let fact_id = match self.find(&head, &relation, &tail) {
            Some(f) => f.id,
            None => {
                let source = FactSource::Answered { user_id: user.clone() };
                self.push_fact(head, &relation, tail, FactStatus::Unverified, source)
            }
        };
        let q = self.questions.iter_mut().find(|q| q.id == id).expect("checked above");
        q.status = QuestionStatus::Answered { tail: value, by_user_id: user.clone(), fact_id };
        Ok(fact_id)
    }

    /// Counts an offer of the question that went unanswered.
    pub fn decline_deferred(&mut self, id: QuestionId, rules: &KnowledgeRules) -> Result<(), KnowledgeError> {
        let q = self
            .questions
            .iter_mut()
            .find(|q| q.id == id)
            .ok_or(KnowledgeError::UnknownQuestion(id))?;
        if q.status != QuestionStatus::Open {
            return Err(KnowledgeError::QuestionClosed);
        }
        q.offers += 1;
        if q.offers >= rules.deferred_expiry {
            q.status = QuestionStatus::Expired { after_attempts: q.offers };
        }
        Ok(())
    }

    pub fn counts(&self) -> KbCounts {
        let by = |s| self.facts.iter().filter(|f| f.status == s).count();
        KbCounts {
            verified: by(FactStatus::Verified),
            unverified: by(FactStatus::Unverified),
            rejected: by(FactStatus::Rejected),
            open_questions: self.questions.iter().filter(|q| q.status == QuestionStatus::Open).count(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KbCounts {
    pub verified: usize,
    pub unverified: usize,
    pub rejected: usize,
    pub open_questions: usize,
}
