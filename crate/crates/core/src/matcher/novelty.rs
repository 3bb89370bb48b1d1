use serde::{Deserialize, Serialize};

use crate::model::{ActionId, Bindings, ScId, SeedCommand};
use crate::tokens::Token;

use super::{similarity, Span};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Thresholds {
    pub gamma_low: f64,
    pub gamma_high: f64,
    pub k: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { gamma_low: 0.1, gamma_high: 0.65, k: 3 }
    }
}

impl Thresholds {
    pub fn is_valid(&self) -> bool {
        0.0 < self.gamma_low && self.gamma_low < self.gamma_high && self.gamma_high < 1.0 && self.k >= 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoveltyBand {
    Known,
    AmbiguousNovel,
    StrongNovel,
}

/// Half-open bands: `[0, low)` known, `[low, high)` ambiguous, `[high, 1]` strong.
pub fn classify_novelty(report: &NoveltyReport, t: &Thresholds) -> NoveltyBand {
    let s = report.novelty_score;
    if s < t.gamma_low {
        NoveltyBand::Known
    } else if s < t.gamma_high {
        NoveltyBand::AmbiguousNovel
    } else {
        NoveltyBand::StrongNovel
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub sc_id: ScId,
    pub action_id: ActionId,
    pub similarity: f64,
    pub bindings: Bindings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyReport {
    pub novelty_score: f64,
    /// Best `k` seed commands, similarity descending, older id first on ties.
    pub top_k: Vec<Candidate>,
    /// Every scored seed command in the same order as `top_k`.
    pub ranked: Vec<Candidate>,
    pub matched_spans: Vec<Span>,
    pub unmatched_spans: Vec<Span>,
}

/// Scores `command` against each seed command accepted by `include` and takes
/// the minimum per-command novelty `1 - similarity` (1.0 when nothing is scored).
pub fn novelty_score<F>(command: &[Token], store: &[SeedCommand], include: F, alpha: f64, k: usize) -> NoveltyReport
where
    F: Fn(&SeedCommand) -> bool + Sync,
{
    if command.is_empty() {
        return NoveltyReport {
            novelty_score: 1.0,
            top_k: vec![],
            ranked: vec![],
            matched_spans: vec![],
            unmatched_spans: vec![],
        };
    }
    let mut scored: Vec<_> = crate::parallel::filter_map(store, |sc| {
        include(sc).then(|| {
            let s = similarity(command, sc, alpha).expect("non-empty command");
            (sc, s)
        })
    });
    scored.sort_by(|(a, sa), (b, sb)| {
        sb.similarity.total_cmp(&sa.similarity).then(a.id.cmp(&b.id))
    });

    let novelty = scored
        .iter()
        .map(|(_, s)| 1.0 - s.similarity)
        .fold(1.0_f64, f64::min);

    let (matched_spans, unmatched_spans) = match scored.first() {
        Some((_, best)) => runs(&best.alignment.consumed(command.len())),
        None => (vec![], vec![Span { start: 0, end: command.len() }]),
    };

    let ranked: Vec<Candidate> = scored
        .iter()
        .map(|(sc, s)| Candidate {
            sc_id: sc.id,
            action_id: sc.action_id.clone(),
            similarity: s.similarity,
            bindings: s.alignment.bindings(command),
        })
        .collect();
    NoveltyReport {
        novelty_score: novelty,
        top_k: ranked.iter().take(k).cloned().collect(),
        ranked,
        matched_spans,
        unmatched_spans,
    }
}

fn runs(flags: &[bool]) -> (Vec<Span>, Vec<Span>) {
    let (mut yes, mut no) = (Vec::new(), Vec::new());
    let mut start = 0;
    for i in 1..=flags.len() {
        if i == flags.len() || flags[i] != flags[start] {
            let span = Span { start, end: i };
            if flags[start] { yes.push(span) } else { no.push(span) }
            start = i;
        }
    }
    (yes, no)
}
