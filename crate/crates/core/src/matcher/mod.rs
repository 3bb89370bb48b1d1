//! Command-to-seed-command matching and novelty scoring.
//!
//! A command is compared with every seed command independently, so scores for
//! an existing (command, seed command) pair never change as the store grows.

mod align;
mod novelty;
mod similarity;

pub use align::{align, align_pattern, AlignOp, Alignment, Span};
pub use novelty::{classify_novelty, novelty_score, Candidate, NoveltyBand, NoveltyReport, Thresholds};
pub use similarity::{cosine, similarity, PairScore, TokenBag, DEFAULT_ALPHA};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("command has no tokens")]
    EmptyCommand,
}
