use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::agent::{AgentReply, OptionCandidate, SideAnswer};
use crate::config::GrammarConfig;
use crate::knowledge::{KnowledgeBase, Vote};
use crate::model::{render_option_text, ActionId, Bindings};
use crate::store::Domain;
use crate::tokens::tokenize;
use crate::world::WorldState;

use super::{paraphrase, Intent, SimError, SimUserProfile};

/// An independent RNG stream keyed by a stable hash, so adding a stream
/// never shifts the draws of another.
pub(crate) fn stream(master_seed: u64, label: &str, salt: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(salt.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

pub fn profile_rng(master_seed: u64, profile: &SimUserProfile) -> ChaCha8Rng {
    stream(master_seed, profile.user_id.as_str(), profile.rng_seed)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UserMessage {
    Choice(Option<usize>),
    Rephrase(String),
    Slot { arg_name: String, text: String },
    Side(SideAnswer),
    /// Nothing to answer.
    Done,
}

/// What a simulated user can see when answering.
pub struct RespondCtx<'a> {
    pub grammars: &'a BTreeMap<ActionId, GrammarConfig>,
    pub domain: &'a Domain,
    pub kb: &'a KnowledgeBase,
    pub world: &'a WorldState,
    /// Candidates behind the current option list, in display order.
    pub candidates: &'a [OptionCandidate],
}

pub(crate) fn intent_bindings(intent: &Intent) -> Bindings {
    intent.args.iter().map(|(k, v)| (k.clone(), tokenize(v))).collect()
}

/// The simulated user's reply. `used` holds the template indices already
/// spoken in this episode.
pub fn sim_respond<R: Rng>(
    profile: &SimUserProfile,
    reply: &AgentReply,
    intent: Option<&Intent>,
    rng: &mut R,
    ctx: &RespondCtx<'_>,
    used: &mut Vec<usize>,
) -> Result<UserMessage, SimError> {
    Ok(match reply {
        AgentReply::Options { options } => {
            let Some(intent) = intent else {
                return Ok(UserMessage::Choice(None));
            };
            let wanted = ctx
                .domain
                .action(&intent.action_id)
                .map(|a| render_option_text(a, &intent_bindings(intent)))
                .ok();
            let exact = options.iter().position(|o| Some(o) == wanted.as_ref());
            let listed = exact.or_else(|| ctx.candidates.iter().position(|c| c.action_id == intent.action_id));
            match listed {
                Some(i) if rng.gen_bool(profile.cooperativeness) => UserMessage::Choice(Some(i + 1)),
                _ => UserMessage::Choice(None),
            }
        }
        AgentReply::AskSlot { arg_name, .. } => UserMessage::Slot {
            arg_name: arg_name.clone(),
            text: intent.and_then(|i| i.args.get(arg_name)).cloned().unwrap_or_default(),
        },
        AgentReply::AskRephrase { .. } => match intent {
            Some(Intent { utterance: Some(u), .. }) => UserMessage::Rephrase(u.clone()),
            Some(intent) => {
                let (idx, text) = paraphrase(intent, ctx.grammars, rng, used)?;
                used.push(idx);
                UserMessage::Rephrase(text)
            }
            None => UserMessage::Rephrase(String::new()),
        },
        AgentReply::AskVerify { fact_id, .. } => match ctx.kb.fact(*fact_id) {
            Some(f) => {
                let truth = ctx.world.is_true(&f.head, &f.relation, &f.tail);
                let lie = rng.gen_bool(profile.lie_probability);
                UserMessage::Side(SideAnswer::Vote(if truth != lie { Vote::Yes } else { Vote::No }))
            }
            None => UserMessage::Side(SideAnswer::Skip),
        },
        AgentReply::AskDeferred { question_id, .. } => {
            let known = ctx.kb.question(*question_id).and_then(|q| {
                let t = &q.target;
                profile.knowledge.iter().find_map(|[h, r, tail]| {
                    if *r != t.relation {
                        return None;
                    }
                    match (&t.head, &t.tail) {
                        (Some(head), None) if tokenize(h) == *head => Some(tail.clone()),
                        (None, Some(tt)) if tokenize(tail) == *tt => Some(h.clone()),
                        _ => None,
                    }
                })
            });
            match known {
                Some(_) if rng.gen_bool(profile.lie_probability) => UserMessage::Side(SideAnswer::Text("atlantis".into())),
                Some(v) => UserMessage::Side(SideAnswer::Text(v)),
                None => UserMessage::Side(SideAnswer::Text("I don't know".into())),
            }
        }
        AgentReply::ExecuteResult { .. } | AgentReply::Answer { .. } | AgentReply::Apology { .. } => UserMessage::Done,
    })
}
