//! Seed-command grammar, API action schemas and option rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokens::{join, tokenize, Token};

macro_rules! string_id {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

string_id!(
    /// Identifier of an API action.
    ActionId
);
string_id!(SlotTypeId);
string_id!(
    /// Skill domain an action or seed command belongs to.
    TaskId
);
string_id!(UserId);

/// Seed command id. Smaller ids are older and win score ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScId(pub u64);

impl fmt::Display for ScId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sc{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(pub u64);

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Argument name to the token span filling it.
pub type Bindings = BTreeMap<String, Vec<Token>>;

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SlotType {
    pub id: SlotTypeId,
    /// Known values. Advisory: fillers outside the lexicon are accepted but flagged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<Vec<Vec<Token>>>,
}

impl SlotType {
    pub fn knows(&self, value: &[Token]) -> bool {
        match &self.lexicon {
            Some(lex) => lex.iter().any(|v| v.as_slice() == value),
            None => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ArgSpec {
    pub name: String,
    pub slot_type: SlotTypeId,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApiAction {
    pub id: ActionId,
    pub name: String,
    pub task_id: TaskId,
    #[serde(default)]
    pub args: Vec<ArgSpec>,
    /// Delexicalized description, one `{arg}` placeholder per argument.
    pub gloss: String,
    /// Past-tense variant of `gloss` used for execution results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub done: Option<String>,
}

impl ApiAction {
    pub fn arg(&self, name: &str) -> Option<&ArgSpec> {
        self.args.iter().find(|a| a.name == name)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !is_identifier(&self.name) {
            return Err(ModelError::BadIdentifier(self.name.clone()));
        }
        let mut seen = BTreeSet::new();
        for a in &self.args {
            if !is_identifier(&a.name) {
                return Err(ModelError::BadIdentifier(a.name.clone()));
            }
            if !seen.insert(a.name.as_str()) {
                return Err(ModelError::DuplicateArg(a.name.clone()));
            }
        }
        for template in std::iter::once(&self.gloss).chain(self.done.as_ref()) {
            let holes = placeholders(template)?;
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for h in &holes {
                if self.arg(h).is_none() {
                    return Err(ModelError::GlossMismatch { action: self.id.clone() });
                }
                *counts.entry(h.as_str()).or_default() += 1;
            }
            if self.args.iter().any(|a| counts.get(a.name.as_str()) != Some(&1)) {
                return Err(ModelError::GlossMismatch { action: self.id.clone() });
            }
        }
        Ok(())
    }
}

fn placeholders(template: &str) -> Result<Vec<String>, ModelError> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| ModelError::BadPlaceholder(template.to_string()))?;
        out.push(after[..close].to_string());
        rest = &after[close + 1..];
    }
    Ok(out)
}

/// Replaces each `{name}` in `template` with `value(name)`.
pub fn fill_template(template: &str, mut value: impl FnMut(&str) -> String) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                out.push_str(&value(&after[..close]));
                rest = &after[close + 1..];
            }
            None => {
                rest = &rest[open..];
                break;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Fills the action's gloss: bound placeholders get their value, unbound ones
/// the name of their slot type.
pub fn render_option_text(action: &ApiAction, bindings: &Bindings) -> String {
    render_with(&action.gloss, action, bindings)
}

/// Past-tense rendering used to report an executed action.
pub fn render_done_text(action: &ApiAction, bindings: &Bindings) -> String {
    match &action.done {
        Some(done) => render_with(done, action, bindings),
        None => format!("done: {}", render_option_text(action, bindings)),
    }
}

fn render_with(template: &str, action: &ApiAction, bindings: &Bindings) -> String {
    fill_template(template, |name| match bindings.get(name) {
        Some(v) if !v.is_empty() => join(v),
        _ => action
            .arg(name)
            .map(|a| a.slot_type.to_string())
            .unwrap_or_else(|| name.to_string()),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PatternElement {
    Literal(Token),
    #[serde(rename_all = "camelCase")]
    Variable { name: String, slot_type: SlotTypeId },
}

impl PatternElement {
    pub fn is_literal(&self) -> bool {
        matches!(self, PatternElement::Literal(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("variable ${0} is not an argument of the action")]
    UnknownVariable(String),
    #[error("variable ${0} appears twice")]
    DuplicateVariable(String),
    #[error("two variables are adjacent")]
    AdjacentVariables,
    #[error("pattern has no literal words")]
    NoLiterals,
    #[error("malformed variable marker in {0:?}")]
    BadMarker(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid identifier {0:?}")]
    BadIdentifier(String),
    #[error("duplicate argument {0}")]
    DuplicateArg(String),
    #[error("gloss of {action} must mention every argument exactly once")]
    GlossMismatch { action: ActionId },
    #[error("unterminated placeholder in {0:?}")]
    BadPlaceholder(String),
    #[error("unknown action {0}")]
    UnknownAction(ActionId),
    #[error("unknown slot type {0}")]
    UnknownSlotType(SlotTypeId),
    #[error("slot type {0} has an empty lexicon")]
    EmptyLexicon(SlotTypeId),
    #[error("seed command {id}: {source}")]
    BadSeedCommand {
        id: ScId,
        #[source]
        source: PatternError,
    },
    #[error("seed command {0} is out of id order")]
    IdOrder(ScId),
    #[error("seed command {0} is tagged with a different task than its action")]
    TaskMismatch(ScId),
}

/// Parses `$NAME`-marked pattern text against the action schema.
pub fn parse_pattern(text: &str, action: &ApiAction) -> Result<Vec<PatternElement>, PatternError> {
    parse_pattern_with(text, |name| action.arg(name).map(|a| a.slot_type.clone()))
}

/// Parses pattern text, typing each variable through `slot_of`.
pub fn parse_pattern_with(
    text: &str,
    slot_of: impl Fn(&str) -> Option<SlotTypeId>,
) -> Result<Vec<PatternElement>, PatternError> {
    let mut pattern = Vec::new();
    let mut rest = text;
    while let Some(pos) = rest.find('$') {
        pattern.extend(tokenize(&rest[..pos]).into_iter().map(PatternElement::Literal));
        let after = &rest[pos + 1..];
        let end = after
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(after.len());
        let name = &after[..end];
        if !is_identifier(name) {
            return Err(PatternError::BadMarker(text.to_string()));
        }
        let slot_type = slot_of(name).ok_or_else(|| PatternError::UnknownVariable(name.to_string()))?;
        pattern.push(PatternElement::Variable { name: name.to_string(), slot_type });
        // tolerate the closing `$` of `$X$`
        rest = after[end..].strip_prefix('$').unwrap_or(&after[end..]);
    }
    pattern.extend(tokenize(rest).into_iter().map(PatternElement::Literal));
    check_pattern(&pattern)?;
    Ok(pattern)
}

/// Structural pattern invariants that do not need the action schema.
pub fn check_pattern(pattern: &[PatternElement]) -> Result<(), PatternError> {
    if !pattern.iter().any(PatternElement::is_literal) {
        return Err(PatternError::NoLiterals);
    }
    let mut names = BTreeSet::new();
    for (i, el) in pattern.iter().enumerate() {
        if let PatternElement::Variable { name, .. } = el {
            if !names.insert(name.as_str()) {
                return Err(PatternError::DuplicateVariable(name.clone()));
            }
            if matches!(pattern.get(i + 1), Some(PatternElement::Variable { .. })) {
                return Err(PatternError::AdjacentVariables);
            }
        }
    }
    Ok(())
}

/// Inverse of [`parse_pattern`].
pub fn render_pattern(pattern: &[PatternElement]) -> String {
    pattern
        .iter()
        .map(|el| match el {
            PatternElement::Literal(t) => t.to_string(),
            PatternElement::Variable { name, .. } => format!("${name}"),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Provenance {
    Developer,
    #[serde(rename_all = "camelCase")]
    Learned { user_id: UserId, session_id: SessionId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SeedCommand {
    pub id: ScId,
    pub pattern: Vec<PatternElement>,
    pub action_id: ActionId,
    pub provenance: Provenance,
    pub task_id: TaskId,
    pub created_at: u64,
    /// Arguments that never appear in the pattern and are always asked for.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub always_elicit: Vec<String>,
}

impl SeedCommand {
    pub fn literals(&self) -> impl Iterator<Item = &Token> {
        self.pattern.iter().filter_map(|el| match el {
            PatternElement::Literal(t) => Some(t),
            PatternElement::Variable { .. } => None,
        })
    }

    pub fn variable_count(&self) -> usize {
        self.pattern.iter().filter(|el| !el.is_literal()).count()
    }

    pub fn validate(&self, action: &ApiAction) -> Result<(), ModelError> {
        let wrap = |source| ModelError::BadSeedCommand { id: self.id, source };
        if self.action_id != action.id {
            return Err(ModelError::UnknownAction(self.action_id.clone()));
        }
        if self.task_id != action.task_id {
            return Err(ModelError::TaskMismatch(self.id));
        }
        check_pattern(&self.pattern).map_err(wrap)?;
        for el in &self.pattern {
            if let PatternElement::Variable { name, slot_type } = el {
                match action.arg(name) {
                    Some(a) if &a.slot_type == slot_type => {}
                    _ => return Err(wrap(PatternError::UnknownVariable(name.clone()))),
                }
            }
        }
        for name in &self.always_elicit {
            if action.arg(name).is_none() {
                return Err(wrap(PatternError::UnknownVariable(name.clone())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn place_arg() -> ArgSpec {
        ArgSpec {
            name: "X".into(),
            slot_type: "place".into(),
            prompt: "Which room?".into(),
        }
    }

    pub fn switch_off() -> ApiAction {
        ApiAction {
            id: "SwitchOffLight".into(),
            name: "SwitchOffLight".into(),
            task_id: "lights".into(),
            args: vec![place_arg()],
            gloss: "switch off the light in the {X}".into(),
            done: Some("switched off the light in the {X}".into()),
        }
    }

    pub fn change_color() -> ApiAction {
        ApiAction {
            id: "ChangeLightColor".into(),
            name: "ChangeLightColor".into(),
            task_id: "lights".into(),
            args: vec![],
            gloss: "change the color of the light".into(),
            done: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    fn lit(s: &str) -> PatternElement {
        PatternElement::Literal(Token::new(s).unwrap())
    }

    #[test]
    fn parses_seed_command() {
        let p = parse_pattern("switch off the light in the $X", &switch_off()).unwrap();
        let mut want: Vec<_> = ["switch", "off", "the", "light", "in", "the"].map(lit).to_vec();
        want.push(PatternElement::Variable { name: "X".into(), slot_type: "place".into() });
        assert_eq!(p, want);
    }

    #[test]
    fn closing_dollar_tolerated() {
        let p = parse_pattern("switch off the light in the $X$", &switch_off()).unwrap();
        assert_eq!(render_pattern(&p), "switch off the light in the $X");
    }

    #[test]
    fn pattern_errors() {
        assert_eq!(parse_pattern("$X", &switch_off()), Err(PatternError::NoLiterals));
        assert_eq!(
            parse_pattern("in the $Y", &switch_off()),
            Err(PatternError::UnknownVariable("Y".into()))
        );
        let mut two = switch_off();
        two.args.push(ArgSpec { name: "B".into(), slot_type: "place".into(), prompt: String::new() });
        two.args[0].name = "A".into();
        assert_eq!(parse_pattern("set $A $B now", &two), Err(PatternError::AdjacentVariables));
        assert_eq!(
            parse_pattern("set $A to $A", &two),
            Err(PatternError::DuplicateVariable("A".into()))
        );
        assert!(matches!(parse_pattern("set $ now", &two), Err(PatternError::BadMarker(_))));
    }

    #[test]
    fn option_text_rendering() {
        let mut b = Bindings::new();
        b.insert("X".into(), vec![Token::new("kitchen").unwrap()]);
        assert_eq!(render_option_text(&switch_off(), &b), "switch off the light in the kitchen");
        assert_eq!(render_option_text(&change_color(), &Bindings::new()), "change the color of the light");
        assert_eq!(render_option_text(&switch_off(), &Bindings::new()), "switch off the light in the place");
        assert_eq!(render_done_text(&switch_off(), &b), "switched off the light in the kitchen");
    }

    #[test]
    fn gloss_validation() {
        assert!(switch_off().validate().is_ok());
        let mut bad = switch_off();
        bad.gloss = "switch off the light".into();
        assert!(matches!(bad.validate(), Err(ModelError::GlossMismatch { .. })));
        bad.gloss = "switch off {X} in {X}".into();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn seed_command_validation() {
        let action = switch_off();
        let mut sc = SeedCommand {
            id: ScId(1),
            pattern: parse_pattern("switch off the light in the $X", &action).unwrap(),
            action_id: action.id.clone(),
            provenance: Provenance::Developer,
            task_id: "lights".into(),
            created_at: 0,
            always_elicit: vec![],
        };
        assert!(sc.validate(&action).is_ok());
        sc.pattern.push(PatternElement::Variable { name: "Q".into(), slot_type: "place".into() });
        assert!(sc.validate(&action).is_err());
    }

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["turn", "off", "the", "light", "in", "kitchen", "2", "on"])
            .prop_map(str::to_string)
    }

    proptest! {
        #[test]
        fn parse_render_round_trip(words in prop::collection::vec(word(), 1..6), var_at in prop::option::of(0usize..6)) {
            let action = switch_off();
            let mut parts = words.clone();
            if let Some(i) = var_at {
                parts.insert(i.min(parts.len()), "$X".into());
            }
            let text = parts.join(" ");
            let p = parse_pattern(&text, &action).unwrap();
            let again = parse_pattern(&render_pattern(&p), &action).unwrap();
            prop_assert_eq!(p, again);
        }
    }
}
