//! Utterance normalization.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A single normalized word: lowercase letters and digits only.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(String);

impl Token {
    /// Builds a token from text that is already normalized.
    ///
    /// Returns `None` when `text` is empty or would change under [`tokenize`].
    pub fn new(text: &str) -> Option<Self> {
        let mut toks = tokenize(text);
        match (toks.pop(), toks.is_empty()) {
            (Some(t), true) if t.0 == text => Some(t),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Lowercases `text` and splits it into tokens. Every character that is not a
/// letter or digit acts as a separator, so punctuation never survives.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase().filter(|c| c.is_alphanumeric() && !c.is_uppercase()));
        } else if !cur.is_empty() {
            out.push(Token(std::mem::take(&mut cur)));
        }
    }
    if !cur.is_empty() {
        out.push(Token(cur));
    }
    out
}

/// Joins tokens back into a space separated string.
pub fn join(tokens: &[Token]) -> String {
    let mut s = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(t.as_str());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(Token::as_str).collect()
    }

    #[test]
    fn strips_punctuation_and_case() {
        let toks = tokenize("Turn off the light, in the kitchen!");
        assert_eq!(words(&toks), ["turn", "off", "the", "light", "in", "the", "kitchen"]);
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  ,.!? ").is_empty());
    }

    #[test]
    fn question_normalization() {
        let toks = tokenize("What is the capital city of the US?");
        assert_eq!(words(&toks), ["what", "is", "the", "capital", "city", "of", "the", "us"]);
    }

    #[test]
    fn numerals_kept() {
        assert_eq!(words(&tokenize("set it to 21.5 degrees")), ["set", "it", "to", "21", "5", "degrees"]);
    }

    #[test]
    fn token_new_rejects_unnormalized() {
        assert!(Token::new("kitchen").is_some());
        assert!(Token::new("Kitchen").is_none());
        assert!(Token::new("two words").is_none());
        assert!(Token::new("").is_none());
    }

    proptest! {
        #[test]
        fn idempotent_on_own_output(s in "\\PC{0,40}") {
            let once = tokenize(&s);
            let twice = tokenize(&join(&once));
            prop_assert_eq!(&once, &twice);
            for t in &once {
                prop_assert!(!t.as_str().is_empty());
                prop_assert!(!t.as_str().chars().any(char::is_whitespace));
                prop_assert!(!t.as_str().chars().any(char::is_uppercase));
            }
        }
    }
}
