//! Slow, obviously-correct reference implementations of the matcher, used to
//! check the fast ones. Exponential in the number of variables.

use rand::Rng;

use crate::model::{check_pattern, PatternElement, Provenance, ScId, SeedCommand};
use crate::tokens::Token;

pub fn levenshtein(a: &[Token], b: &[&Token]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut row = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            row[j + 1] = (prev[j] + usize::from(x != *y)).min(prev[j + 1] + 1).min(row[j] + 1);
        }
        prev = row;
    }
    prev[b.len()]
}

/// Literal runs between the variables of `pat`; one more run than variables.
fn literal_runs(pat: &[PatternElement]) -> Vec<Vec<&Token>> {
    let mut runs = vec![vec![]];
    for el in pat {
        match el {
            PatternElement::Literal(t) => runs.last_mut().expect("starts non-empty").push(t),
            PatternElement::Variable { .. } => runs.push(vec![]),
        }
    }
    runs
}

fn split_cost(cmd: &[Token], runs: &[Vec<&Token>]) -> Option<usize> {
    if runs.len() == 1 {
        return Some(levenshtein(cmd, &runs[0]));
    }
    let mut best: Option<usize> = None;
    for seg_end in 0..=cmd.len() {
        for var_end in seg_end + 1..=cmd.len() {
            if let Some(rest) = split_cost(&cmd[var_end..], &runs[1..]) {
                let c = levenshtein(&cmd[..seg_end], &runs[0]) + rest;
                best = Some(best.map_or(c, |b| b.min(c)));
            }
        }
    }
    best
}

/// Minimum edit cost over every assignment of non-empty spans to the
/// variables, or `None` when the command is too short to give each variable
/// a token.
pub fn align_cost(cmd: &[Token], pat: &[PatternElement]) -> Option<usize> {
    split_cost(cmd, &literal_runs(pat))
}

pub fn cosine(a: &[&Token], b: &[&Token]) -> f64 {
    let count = |xs: &[&Token], t: &Token| xs.iter().filter(|x| **x == t).count();
    let mut keys: Vec<&Token> = a.iter().chain(b).copied().collect();
    keys.sort();
    keys.dedup();
    let dot: usize = keys.iter().map(|t| count(a, t) * count(b, t)).sum();
    let na: usize = keys.iter().map(|t| count(a, t).pow(2)).sum();
    let nb: usize = keys.iter().map(|t| count(b, t).pow(2)).sum();
    if na == 0 || nb == 0 {
        return 0.0;
    }
    dot as f64 / ((na * nb) as f64).sqrt()
}

pub fn similarity(cmd: &[Token], sc: &SeedCommand, alpha: f64) -> f64 {
    let lits: Vec<&Token> = sc.literals().collect();
    let vars = sc.pattern.len() - lits.len();
    let align = if cmd.len() >= lits.len() + vars {
        let cost = align_cost(cmd, &sc.pattern).expect("feasible commands have a split");
        (1.0 - cost as f64 / cmd.len().max(sc.pattern.len()) as f64).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let cmd_refs: Vec<&Token> = cmd.iter().collect();
    alpha * align + (1.0 - alpha) * cosine(&cmd_refs, &lits)
}

/// Minimum per-seed-command novelty, 1.0 for an empty store.
pub fn novelty(cmd: &[Token], store: &[SeedCommand], alpha: f64) -> f64 {
    store.iter().map(|sc| 1.0 - similarity(cmd, sc, alpha)).fold(1.0_f64, f64::min)
}

const VOCAB: [&str; 4] = ["a", "b", "c", "d"];

fn word(rng: &mut impl Rng) -> Token {
    Token::new(VOCAB[rng.gen_range(0..VOCAB.len())]).expect("vocabulary is lowercase")
}

/// Random command over a four-word vocabulary.
pub fn random_command(rng: &mut impl Rng, max_len: usize) -> Vec<Token> {
    let n = rng.gen_range(1..=max_len);
    (0..n).map(|_| word(rng)).collect()
}

/// Random well-formed pattern with at most `max_vars` variables.
pub fn random_pattern(rng: &mut impl Rng, max_len: usize, max_vars: usize) -> Vec<PatternElement> {
    loop {
        let len = rng.gen_range(1..=max_len);
        let mut vars = 0;
        let mut pat = Vec::with_capacity(len);
        for _ in 0..len {
            if vars < max_vars && rng.gen_bool(0.3) {
                vars += 1;
                pat.push(PatternElement::Variable { name: format!("V{vars}"), slot_type: "any".into() });
            } else {
                pat.push(PatternElement::Literal(word(rng)));
            }
        }
        if check_pattern(&pat).is_ok() {
            return pat;
        }
    }
}

/// Random store of `n` seed commands spread over three actions.
pub fn random_store(rng: &mut impl Rng, n: usize) -> Vec<SeedCommand> {
    (0..n as u64)
        .map(|i| SeedCommand {
            id: ScId(i + 1),
            pattern: random_pattern(rng, 6, 2),
            action_id: format!("A{}", i % 3).as_str().into(),
            provenance: Provenance::Developer,
            task_id: "t".into(),
            created_at: 0,
            always_elicit: vec![],
        })
        .collect()
}
