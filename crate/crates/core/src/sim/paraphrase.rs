use std::collections::BTreeMap;

use rand::Rng;

use crate::config::GrammarConfig;
use crate::model::{fill_template, ActionId};

use super::{Intent, SimError};

/// Renders `intent` with one of its action's templates, avoiding the template
/// indices in `avoid` while others remain. Returns the template index used.
pub fn paraphrase<R: Rng>(
    intent: &Intent,
    grammars: &BTreeMap<ActionId, GrammarConfig>,
    rng: &mut R,
    avoid: &[usize],
) -> Result<(usize, String), SimError> {
    let g = grammars
        .get(&intent.action_id)
        .filter(|g| !g.templates.is_empty())
        .ok_or_else(|| SimError::NoGrammar(intent.action_id.clone()))?;
    let fresh: Vec<usize> = (0..g.templates.len()).filter(|i| !avoid.contains(i)).collect();
    let pool = if fresh.is_empty() { (0..g.templates.len()).collect() } else { fresh };
    let idx = pool[rng.gen_range(0..pool.len())];

    let words: Vec<String> = g.templates[idx]
        .split_whitespace()
        .map(|w| match g.synonyms.get(w) {
            Some(alts) if !alts.is_empty() => alts[rng.gen_range(0..alts.len())].clone(),
            _ => w.to_string(),
        })
        .collect();
    let text = fill_template(&words.join(" "), |name| intent.args.get(name).cloned().unwrap_or_default());
    Ok((idx, text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::user::stream;

    fn grammars() -> BTreeMap<ActionId, GrammarConfig> {
        let mut synonyms = BTreeMap::new();
        synonyms.insert("turn_off".to_string(), vec!["switch off".into(), "turn off".into(), "kill".into()]);
        let mut m = BTreeMap::new();
        m.insert(
            "SwitchOffLight".into(),
            GrammarConfig { templates: vec!["turn_off the light in the {place}".into()], synonyms },
        );
        m
    }

    fn intent(action: &str) -> Intent {
        let mut args = BTreeMap::new();
        args.insert("place".to_string(), "kitchen".to_string());
        Intent { action_id: action.into(), args, utterance: None }
    }

    #[test]
    fn synonyms_and_args_filled() {
        let g = grammars();
        let allowed = ["switch off the light in the kitchen", "turn off the light in the kitchen", "kill the light in the kitchen"];
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..40 {
            let (_, text) = paraphrase(&intent("SwitchOffLight"), &g, &mut stream(seed, "t", 0), &[]).unwrap();
            assert!(allowed.contains(&text.as_str()), "{text}");
            seen.insert(text);
        }
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn same_seed_same_text() {
        let g = grammars();
        let a = paraphrase(&intent("SwitchOffLight"), &g, &mut stream(7, "u1", 3), &[]).unwrap();
        let b = paraphrase(&intent("SwitchOffLight"), &g, &mut stream(7, "u1", 3), &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_grammar() {
        let err = paraphrase(&intent("Dance"), &grammars(), &mut stream(0, "t", 0), &[]).unwrap_err();
        assert!(matches!(err, SimError::NoGrammar(a) if a.as_str() == "Dance"));
    }
}
