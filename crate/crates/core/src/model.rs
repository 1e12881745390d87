//! Ground atoms, literals and closed-world states.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::InvalidName;

/// Lowercase identifier for objects, predicates, schemas, types and domains.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(String);

impl Name {
    /// Trims and lowercases `raw`, rejecting empty input, inner whitespace
    /// and characters outside `[a-z0-9_-]`. The first character must be a letter.
    pub fn new(raw: &str) -> Result<Self, InvalidName> {
        let trimmed = raw.trim();
        let invalid = |reason: &'static str| InvalidName {
            raw: raw.to_string(),
            reason,
        };
        if trimmed.is_empty() {
            return Err(invalid("empty"));
        }
        if trimmed.chars().any(char::is_whitespace) {
            return Err(invalid("contains whitespace"));
        }
        let lowered = trimmed.to_lowercase();
        let mut chars = lowered.chars();
        if !chars.next().is_some_and(|c| c.is_ascii_alphabetic()) {
            return Err(invalid("must start with a letter"));
        }
        if !chars.all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(invalid("only letters, digits, '-' and '_' are allowed"));
        }
        Ok(Name(lowered))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// `crate0` -> `Crate0`.
    pub fn capitalized(&self) -> String {
        let mut chars = self.0.chars();
        match chars.next() {
            Some(first) => first.to_ascii_uppercase().to_string() + chars.as_str(),
            None => String::new(),
        }
    }
}

/// Free-function form of [`Name::new`].
pub fn normalize_name(raw: &str) -> Result<Name, InvalidName> {
    Name::new(raw)
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Name {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::str::FromStr for Name {
    type Err = InvalidName;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Name::new(s)
    }
}

impl Serialize for Name {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Name {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Name::new(&raw).map_err(serde::de::Error::custom)
    }
}

/// A ground atom such as `(on a b)` or `(handempty)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fluent {
    pub predicate: Name,
    pub args: Vec<Name>,
}

impl Fluent {
    pub fn new(predicate: Name, args: Vec<Name>) -> Self {
        Fluent { predicate, args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn positive(self) -> Literal {
        Literal::new(self, true)
    }

    pub fn negative(self) -> Literal {
        Literal::new(self, false)
    }

    /// True if `object` occurs among the arguments.
    pub fn mentions(&self, object: &Name) -> bool {
        self.args.iter().any(|a| a == object)
    }
}

impl fmt::Display for Fluent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for arg in &self.args {
            write!(f, " {arg}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub fluent: Fluent,
    pub positive: bool,
}

impl Literal {
    pub fn new(fluent: Fluent, positive: bool) -> Self {
        Literal { fluent, positive }
    }

    pub fn negate(&self) -> Literal {
        Literal {
            fluent: self.fluent.clone(),
            positive: !self.positive,
        }
    }
}

/// `(on a b)` or `(not (on a b))`.
impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.fluent)
        } else {
            write!(f, "(not {})", self.fluent)
        }
    }
}

/// Closed-world state: a fluent is true iff it is a member.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct State {
    fluents: BTreeSet<Fluent>,
}

impl State {
    pub fn new() -> Self {
        State::default()
    }

    pub fn contains(&self, fluent: &Fluent) -> bool {
        self.fluents.contains(fluent)
    }

    pub fn insert(&mut self, fluent: Fluent) -> bool {
        self.fluents.insert(fluent)
    }

    pub fn remove(&mut self, fluent: &Fluent) -> bool {
        self.fluents.remove(fluent)
    }

    pub fn len(&self) -> usize {
        self.fluents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fluents.is_empty()
    }

    /// Fluents in canonical (lexicographic) order.
    pub fn iter(&self) -> impl Iterator<Item = &Fluent> {
        self.fluents.iter()
    }

    pub fn fluents(&self) -> &BTreeSet<Fluent> {
        &self.fluents
    }

    /// Canonical text form: fluents space-separated in lexicographic order.
    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for fluent in &self.fluents {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{fluent}")?;
        }
        Ok(())
    }
}

impl FromIterator<Fluent> for State {
    fn from_iter<I: IntoIterator<Item = Fluent>>(iter: I) -> Self {
        State {
            fluents: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a State {
    type Item = &'a Fluent;
    type IntoIter = std::collections::btree_set::Iter<'a, Fluent>;
    fn into_iter(self) -> Self::IntoIter {
        self.fluents.iter()
    }
}

impl Extend<Fluent> for State {
    fn extend<I: IntoIterator<Item = Fluent>>(&mut self, iter: I) {
        self.fluents.extend(iter)
    }
}

pub fn literal_holds(state: &State, literal: &Literal) -> bool {
    state.contains(&literal.fluent) == literal.positive
}

/// Fluents gained and lost between two states.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StateDiff {
    pub added: BTreeSet<Fluent>,
    pub removed: BTreeSet<Fluent>,
}

impl StateDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }

    /// Applies the diff to `state`: removals first, then additions.
    pub fn apply(&self, state: &State) -> State {
        let mut out = state.clone();
        for f in &self.removed {
            out.remove(f);
        }
        out.extend(self.added.iter().cloned());
        out
    }
}

pub fn state_diff(before: &State, after: &State) -> StateDiff {
    StateDiff {
        added: after.fluents.difference(&before.fluents).cloned().collect(),
        removed: before.fluents.difference(&after.fluents).cloned().collect(),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn n(s: &str) -> Name {
        Name::new(s).unwrap()
    }

    pub fn f(pred: &str, args: &[&str]) -> Fluent {
        Fluent::new(n(pred), args.iter().map(|a| n(a)).collect())
    }

    #[test]
    fn names_are_normalized() {
        assert_eq!(normalize_name("Crate0").unwrap().as_str(), "crate0");
        assert_eq!(normalize_name("  Hoist1 ").unwrap().as_str(), "hoist1");
        assert_eq!(normalize_name("at-robby").unwrap().as_str(), "at-robby");
    }

    #[test]
    fn malformed_names_are_rejected() {
        for bad in ["two words", "", "   ", "1abc", "-x", "a(b", "?x"] {
            assert!(normalize_name(bad).is_err(), "{bad:?} should be rejected");
        }
    }

    #[test]
    fn literal_membership() {
        let s: State = [f("clear", &["a"])].into_iter().collect();
        assert!(literal_holds(&s, &f("clear", &["a"]).positive()));
        assert!(!literal_holds(&s, &f("clear", &["a"]).negative()));
        assert!(literal_holds(
            &State::new(),
            &f("on", &["a", "b"]).negative()
        ));
    }

    #[test]
    fn diff_examples() {
        let a: State = [f("a", &[])].into_iter().collect();
        assert!(state_diff(&a, &a).is_empty());

        let before: State = [f("ontable", &["a"])].into_iter().collect();
        let after: State = [f("holding", &["a"])].into_iter().collect();
        let d = state_diff(&before, &after);
        assert_eq!(d.added, [f("holding", &["a"])].into_iter().collect());
        assert_eq!(d.removed, [f("ontable", &["a"])].into_iter().collect());

        let x: State = [f("x", &[])].into_iter().collect();
        let d = state_diff(&State::new(), &x);
        assert_eq!(d.added.len(), 1);
        assert!(d.removed.is_empty());
    }

    #[test]
    fn canonical_text() {
        let s: State = [
            f("on", &["a", "b"]),
            f("handempty", &[]),
            f("clear", &["a"]),
        ]
        .into_iter()
        .collect();
        assert_eq!(s.canonical(), "(clear a) (handempty) (on a b)");
        assert_eq!(
            f("on", &["a", "b"]).negative().to_string(),
            "(not (on a b))"
        );
        assert_eq!(State::new().canonical(), "");
    }
}
