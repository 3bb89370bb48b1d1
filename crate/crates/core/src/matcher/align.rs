use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{Bindings, PatternElement, ScId, SeedCommand};
use crate::tokens::Token;

use super::MatchError;

/// Half-open range of command token indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// One step of an alignment path. Indices refer to the command (`cmd`) and
/// the pattern (`pat`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignOp {
    Match { cmd: usize, pat: usize },
    Substitute { cmd: usize, pat: usize },
    /// Pattern literal with no counterpart in the command.
    Delete { pat: usize },
    /// Command token with no counterpart in the pattern.
    Insert { cmd: usize },
    Absorb { pat: usize, span: Span },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub sc_id: ScId,
    pub spans: BTreeMap<String, Span>,
    pub edit_cost: usize,
    pub feasible: bool,
    pub ops: Vec<AlignOp>,
}

impl Alignment {
    pub fn bindings(&self, command: &[Token]) -> Bindings {
        self.spans
            .iter()
            .map(|(name, s)| (name.clone(), command[s.start..s.end].to_vec()))
            .collect()
    }

    /// Per command token: was it matched exactly or absorbed by a variable.
    pub fn consumed(&self, len: usize) -> Vec<bool> {
        let mut out = vec![false; len];
        for op in &self.ops {
            match *op {
                AlignOp::Match { cmd, .. } => out[cmd] = true,
                AlignOp::Absorb { span, .. } => out[span.start..span.end].fill(true),
                _ => {}
            }
        }
        out
    }
}

const INF: usize = usize::MAX / 4;

/// Minimum-cost alignment of `command` against the pattern of `sc`.
///
/// Literals cost 0 on exact match and 1 for substitution, insertion or
/// deletion; a variable absorbs one or more command tokens for free. Among
/// equal-cost paths the backtrace prefers substitution/match, then deletion,
/// then insertion, and the shortest span for each variable.
///
/// The alignment is infeasible when the command is too short to give every
/// literal and every variable a token of its own.
pub fn align(command: &[Token], sc: &SeedCommand) -> Result<Alignment, MatchError> {
    align_pattern(command, &sc.pattern, sc.id)
}

/// [`align`] over a bare pattern; `sc_id` is only copied into the result.
pub fn align_pattern(command: &[Token], pat: &[PatternElement], sc_id: ScId) -> Result<Alignment, MatchError> {
    if command.is_empty() {
        return Err(MatchError::EmptyCommand);
    }
    let (n, m) = (command.len(), pat.len());
    let w = m + 1;
    let mut d = vec![INF; (n + 1) * w];
    let at = |i: usize, j: usize| i * w + j;

    for i in 0..=n {
        d[at(i, 0)] = i;
    }
    for j in 1..=m {
        match &pat[j - 1] {
            PatternElement::Literal(lit) => {
                for i in 0..=n {
                    let mut best = d[at(i, j - 1)].saturating_add(1);
                    if i > 0 {
                        let sub = usize::from(command[i - 1] != *lit);
                        best = best
                            .min(d[at(i - 1, j - 1)].saturating_add(sub))
                            .min(d[at(i - 1, j)].saturating_add(1));
                    }
                    d[at(i, j)] = best.min(INF);
                }
            }
            PatternElement::Variable { .. } => {
                // running minimum over d[0..i-1][j-1]
                let mut run = INF;
                for i in 1..=n {
                    run = run.min(d[at(i - 1, j - 1)]);
                    d[at(i, j)] = run;
                }
            }
        }
    }

    let literals = pat.iter().filter(|e| e.is_literal()).count();
    let vars = m - literals;
    let total = d[at(n, m)];
    if total >= INF {
        return Ok(Alignment {
            sc_id,
            spans: BTreeMap::new(),
            edit_cost: n.max(literals + vars),
            feasible: false,
            ops: Vec::new(),
        });
    }

    let mut ops = Vec::with_capacity(n + m);
    let mut spans = BTreeMap::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if j == 0 {
            i -= 1;
            ops.push(AlignOp::Insert { cmd: i });
            continue;
        }
        let cur = d[at(i, j)];
        match &pat[j - 1] {
            PatternElement::Literal(lit) => {
                if i > 0 {
                    let same = command[i - 1] == *lit;
                    if d[at(i - 1, j - 1)] + usize::from(!same) == cur {
                        ops.push(if same {
                            AlignOp::Match { cmd: i - 1, pat: j - 1 }
                        } else {
                            AlignOp::Substitute { cmd: i - 1, pat: j - 1 }
                        });
                        i -= 1;
                        j -= 1;
                        continue;
                    }
                }
                if d[at(i, j - 1)] + 1 == cur {
                    ops.push(AlignOp::Delete { pat: j - 1 });
                    j -= 1;
                } else {
                    i -= 1;
                    ops.push(AlignOp::Insert { cmd: i });
                }
            }
            PatternElement::Variable { name, .. } => {
                let s = (1..=i)
                    .find(|&s| d[at(i - s, j - 1)] == cur)
                    .expect("variable cell has a predecessor");
                let span = Span { start: i - s, end: i };
                ops.push(AlignOp::Absorb { pat: j - 1, span });
                spans.insert(name.clone(), span);
                i -= s;
                j -= 1;
            }
        }
    }
    ops.reverse();

    let feasible = n >= literals + vars;
    Ok(Alignment {
        sc_id,
        spans: if feasible { spans } else { BTreeMap::new() },
        edit_cost: total,
        feasible,
        ops,
    })
}
