use std::collections::BTreeMap;

use crate::model::SeedCommand;
use crate::tokens::Token;

use super::{align, Alignment, MatchError};

pub const DEFAULT_ALPHA: f64 = 0.5;

/// Token multiset, the representation a command is compared in.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenBag(BTreeMap<Token, usize>);

impl TokenBag {
    pub fn count(&self, t: &Token) -> usize {
        self.0.get(t).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Token, usize)> {
        self.0.iter().map(|(t, c)| (t, *c))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<'a> FromIterator<&'a Token> for TokenBag {
    fn from_iter<I: IntoIterator<Item = &'a Token>>(iter: I) -> Self {
        let mut m = BTreeMap::new();
        for t in iter {
            *m.entry(t.clone()).or_insert(0) += 1;
        }
        TokenBag(m)
    }
}

/// Cosine of the count vectors; 0 when either bag is empty.
pub fn cosine(a: &TokenBag, b: &TokenBag) -> f64 {
    let dot: usize = a.iter().map(|(t, c)| c * b.count(t)).sum();
    let na: usize = a.iter().map(|(_, c)| c * c).sum();
    let nb: usize = b.iter().map(|(_, c)| c * c).sum();
    if na == 0 || nb == 0 {
        return 0.0;
    }
    // one sqrt keeps identical bags at exactly 1.0
    dot as f64 / ((na * nb) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairScore {
    pub similarity: f64,
    pub align_score: f64,
    pub cosine: f64,
    pub alignment: Alignment,
}

/// `alpha * alignScore + (1 - alpha) * cosine(command bag, literal bag)` where
/// `alignScore = 1 - editCost / max(|command|, literals + variables)`.
pub fn similarity(command: &[Token], sc: &SeedCommand, alpha: f64) -> Result<PairScore, MatchError> {
    let alignment = align(command, sc)?;
    let align_score = if alignment.feasible {
        let denom = command.len().max(sc.pattern.len());
        (1.0 - alignment.edit_cost as f64 / denom as f64).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let cmd_bag: TokenBag = command.iter().collect();
    let sc_bag: TokenBag = sc.literals().collect();
    let cos = cosine(&cmd_bag, &sc_bag);
    Ok(PairScore {
        similarity: alpha * align_score + (1.0 - alpha) * cos,
        align_score,
        cosine: cos,
        alignment,
    })
}
