use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::AgentSettings;
use crate::matcher::{classify_novelty, novelty_score, similarity, NoveltyBand};
use crate::model::{ActionId, ScId};
use crate::store::SeedStore;
use crate::tokens::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegressionPair {
    pub command: String,
    pub expected: ActionId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegressionResult {
    pub command: String,
    pub expected: ActionId,
    pub band: NoveltyBand,
    /// Action of the best-scoring seed command.
    pub chosen: Option<ActionId>,
    /// Similarity to every seed command of the expected action.
    pub own: BTreeMap<ScId, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ForgettingReport {
    pub results: Vec<RegressionResult>,
    /// `(pair index, seed command)` whose similarity differs from the baseline.
    pub changed: Vec<(usize, ScId)>,
    /// Pairs the baseline grounded correctly that now pick another action.
    pub interference: usize,
}

/// Replays regression commands against `store` without learning and compares
/// them with `baseline` when given.
pub fn evaluate_forgetting(
    store: &SeedStore,
    pairs: &[RegressionPair],
    settings: &AgentSettings,
    baseline: Option<&ForgettingReport>,
) -> ForgettingReport {
    let results: Vec<RegressionResult> = crate::parallel::map(pairs, |p| {
        let tokens = tokenize(&p.command);
        let report = novelty_score(&tokens, store.commands(), |_| true, settings.alpha, settings.thresholds.k);
        let own = store
            .commands()
            .iter()
            .filter(|sc| sc.action_id == p.expected)
            .filter_map(|sc| similarity(&tokens, sc, settings.alpha).ok().map(|s| (sc.id, s.similarity)))
            .collect();
        RegressionResult {
            command: p.command.clone(),
            expected: p.expected.clone(),
            band: classify_novelty(&report, &settings.thresholds),
            chosen: report.ranked.first().map(|c| c.action_id.clone()),
            own,
        }
    });

    let mut changed = Vec::new();
    let mut interference = 0;
    if let Some(base) = baseline {
        for (i, (now, before)) in results.iter().zip(&base.results).enumerate() {
            for (id, s) in &before.own {
                if now.own.get(id) != Some(s) {
                    changed.push((i, *id));
                }
            }
            let was_right = before.chosen.as_ref() == Some(&before.expected);
            if was_right && now.chosen.as_ref() != Some(&now.expected) {
                interference += 1;
            }
        }
    }
    ForgettingReport { results, changed, interference }
}
