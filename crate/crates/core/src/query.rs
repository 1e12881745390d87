//! Answers projection, executability, plan-verification, validation and
//! multiple-choice questions from a progression trace.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::engine::Trace;
use crate::model::{literal_holds, Literal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Projection,
    Executability,
    PlanVerification,
    Validation,
}

impl QueryKind {
    /// Maps a benchmark question category onto a query kind.
    ///
    /// Effects, fluent-tracking, state-tracking and progression questions
    /// are projection questions over the final state.
    pub fn from_category(category: &str) -> Option<QueryKind> {
        let c = category
            .trim()
            .to_ascii_lowercase()
            .replace([' ', '-'], "_");
        Some(match c.as_str() {
            "projection" | "effects" | "fluent_tracking" | "state_tracking" | "progression" => {
                QueryKind::Projection
            }
            "executability" | "action_executability" | "applicability" => QueryKind::Executability,
            "plan_verification" => QueryKind::PlanVerification,
            "validation" => QueryKind::Validation,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub kind: QueryKind,
    /// Query literals for projection, goal for plan verification and validation.
    pub literals: BTreeSet<Literal>,
    pub about_step: Option<usize>,
}

impl Query {
    pub fn new(kind: QueryKind, literals: BTreeSet<Literal>) -> Self {
        Query {
            kind,
            literals,
            about_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Answer {
    True,
    False,
    Plan,
    Applicable,
    Invalid,
    /// Multiple-choice letter, always uppercase.
    Choice(char),
}

impl Answer {
    pub fn from_bool(b: bool) -> Answer {
        if b {
            Answer::True
        } else {
            Answer::False
        }
    }

    /// Lowercase wire form: `true`, `false`, `plan`, `applicable`,
    /// `invalid`, or the choice letter.
    pub fn normalized(&self) -> String {
        match self {
            Answer::True => "true".into(),
            Answer::False => "false".into(),
            Answer::Plan => "plan".into(),
            Answer::Applicable => "applicable".into(),
            Answer::Invalid => "invalid".into(),
            Answer::Choice(c) => c.to_ascii_lowercase().to_string(),
        }
    }

    pub fn is_negative(&self) -> bool {
        matches!(self, Answer::False | Answer::Invalid)
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Choice(c) => write!(f, "{c}"),
            other => f.write_str(&other.normalized()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognized answer {0:?}")]
pub struct UnknownAnswer(pub String);

impl FromStr for Answer {
    type Err = UnknownAnswer;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().trim_end_matches('.').trim();
        Ok(match t.to_ascii_lowercase().as_str() {
            "true" | "yes" => Answer::True,
            "false" | "no" => Answer::False,
            "plan" => Answer::Plan,
            "applicable" => Answer::Applicable,
            "invalid" => Answer::Invalid,
            _ => {
                let mut chars = t.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) if c.is_ascii_alphabetic() => {
                        Answer::Choice(c.to_ascii_uppercase())
                    }
                    _ => return Err(UnknownAnswer(s.to_string())),
                }
            }
        })
    }
}

impl Serialize for Answer {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Bool(bool),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Bool(b) => Ok(Answer::from_bool(b)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Why a verdict came out the way it did.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    None,
    /// Query or goal literals that do not hold in the final state.
    FailingLiterals {
        literals: Vec<String>,
    },
    /// First inapplicable step and its unsatisfied preconditions.
    Failure {
        index: usize,
        unsatisfied: Vec<String>,
    },
    /// Free-text justification from a reasoner.
    Rationale {
        text: String,
    },
}

impl Evidence {
    pub fn is_empty(&self) -> bool {
        match self {
            Evidence::None => true,
            Evidence::FailingLiterals { literals } => literals.is_empty(),
            Evidence::Failure { .. } => false,
            Evidence::Rationale { text } => text.trim().is_empty(),
        }
    }

    fn from_trace_failure(trace: &Trace) -> Option<Evidence> {
        trace
            .failure()
            .map(|(index, unsatisfied)| Evidence::Failure {
                index,
                unsatisfied: unsatisfied.iter().map(ToString::to_string).collect(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub answer: Answer,
    pub evidence: Evidence,
}

impl Verdict {
    pub fn new(answer: Answer, evidence: Evidence) -> Self {
        Verdict { answer, evidence }
    }
}

fn failing_literals<'a>(
    trace: &Trace,
    literals: impl IntoIterator<Item = &'a Literal>,
) -> Vec<String> {
    let last = trace.final_state();
    literals
        .into_iter()
        .filter(|l| !literal_holds(last, l))
        .map(ToString::to_string)
        .collect()
}

/// True iff the whole sequence executed and every literal holds at the end.
pub fn eval_projection(trace: &Trace, query: &BTreeSet<Literal>) -> Verdict {
    if let Some(evidence) = Evidence::from_trace_failure(trace) {
        return Verdict::new(Answer::False, evidence);
    }
    let failing = failing_literals(trace, query);
    if failing.is_empty() {
        Verdict::new(Answer::True, Evidence::None)
    } else {
        Verdict::new(
            Answer::False,
            Evidence::FailingLiterals { literals: failing },
        )
    }
}

pub fn eval_executability(trace: &Trace) -> Verdict {
    match Evidence::from_trace_failure(trace) {
        Some(evidence) => Verdict::new(Answer::False, evidence),
        None => Verdict::new(Answer::True, Evidence::None),
    }
}

pub fn eval_plan_verification(trace: &Trace, goal: &BTreeSet<Literal>) -> Verdict {
    let exe = eval_executability(trace);
    if exe.answer == Answer::False {
        return exe;
    }
    eval_projection(trace, goal)
}

/// Three-way classification: `Plan`, `Applicable` or `Invalid`.
pub fn classify_sequence(trace: &Trace, goal: &BTreeSet<Literal>) -> Verdict {
    if let Some(evidence) = Evidence::from_trace_failure(trace) {
        return Verdict::new(Answer::Invalid, evidence);
    }
    let failing = failing_literals(trace, goal);
    if failing.is_empty() {
        Verdict::new(Answer::Plan, Evidence::None)
    } else {
        Verdict::new(
            Answer::Applicable,
            Evidence::FailingLiterals { literals: failing },
        )
    }
}

/// Multiple choice: the first letter whose literals all hold in the final
/// state of an executable trace; `False` if none does.
pub fn eval_choice(trace: &Trace, choices: &BTreeMap<char, BTreeSet<Literal>>) -> Verdict {
    if let Some(evidence) = Evidence::from_trace_failure(trace) {
        return Verdict::new(Answer::False, evidence);
    }
    for (letter, lits) in choices {
        if failing_literals(trace, lits).is_empty() {
            return Verdict::new(Answer::Choice(letter.to_ascii_uppercase()), Evidence::None);
        }
    }
    let literals = choices
        .iter()
        .map(|(c, lits)| format!("{c}: {}", failing_literals(trace, lits).join(" ")))
        .collect();
    Verdict::new(Answer::False, Evidence::FailingLiterals { literals })
}

/// Dispatches on the query kind. Validation uses the three-way classes.
pub fn evaluate(trace: &Trace, query: &Query) -> Verdict {
    match query.kind {
        QueryKind::Projection => eval_projection(trace, &query.literals),
        QueryKind::Executability => eval_executability(trace),
        QueryKind::PlanVerification => eval_plan_verification(trace, &query.literals),
        QueryKind::Validation => classify_sequence(trace, &query.literals),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{parse_domain, parse_problem};
    use crate::engine::progress;
    use crate::fixtures;
    use crate::model::tests::f;

    fn trace(terms: &[&str]) -> Trace {
        let d = parse_domain(fixtures::BLOCKSWORLD_DOMAIN).unwrap();
        let p = parse_problem(fixtures::BW_P01, &d).unwrap();
        let actions: Vec<_> = terms
            .iter()
            .map(|t| d.ground_term(t, &p.objects).unwrap())
            .collect();
        progress(&p.init, &actions)
    }

    fn lits(items: &[(&str, &[&str], bool)]) -> BTreeSet<Literal> {
        items
            .iter()
            .map(|(p, a, pos)| Literal::new(f(p, a), *pos))
            .collect()
    }

    #[test]
    fn projection_examples() {
        let t = trace(&["(pickup a)", "(stack a b)"]);
        assert_eq!(
            eval_projection(&t, &lits(&[("on", &["a", "b"], true)])).answer,
            Answer::True
        );
        let v = eval_projection(&t, &lits(&[("clear", &["b"], true)]));
        assert_eq!(v.answer, Answer::False);
        assert_eq!(
            v.evidence,
            Evidence::FailingLiterals {
                literals: vec!["(clear b)".into()]
            }
        );
        assert_eq!(eval_projection(&t, &BTreeSet::new()).answer, Answer::True);
        let failed = trace(&["(unstack a b)"]);
        assert_eq!(
            eval_projection(&failed, &BTreeSet::new()).answer,
            Answer::False
        );
    }

    #[test]
    fn executability_examples() {
        assert_eq!(
            eval_executability(&trace(&["(pickup a)", "(stack a b)"])).answer,
            Answer::True
        );
        let v = eval_executability(&trace(&["(unstack a b)", "(pickup a)"]));
        assert_eq!(v.answer, Answer::False);
        assert!(matches!(v.evidence, Evidence::Failure { index: 0, .. }));
    }

    #[test]
    fn plan_verification_and_classification() {
        let t = trace(&["(pickup a)", "(stack a b)"]);
        let on_ab = lits(&[("on", &["a", "b"], true)]);
        let on_ba = lits(&[("on", &["b", "a"], true)]);
        assert_eq!(eval_plan_verification(&t, &on_ab).answer, Answer::True);
        assert_eq!(eval_plan_verification(&t, &on_ba).answer, Answer::False);
        assert_eq!(classify_sequence(&t, &on_ab).answer, Answer::Plan);
        assert_eq!(classify_sequence(&t, &on_ba).answer, Answer::Applicable);
        let bad = trace(&["(unstack a b)"]);
        assert_eq!(eval_plan_verification(&bad, &on_ab).answer, Answer::False);
        assert_eq!(classify_sequence(&bad, &on_ab).answer, Answer::Invalid);
    }

    #[test]
    fn negative_query_literals() {
        let t = trace(&["(pickup a)"]);
        let q = lits(&[("handempty", &[], false), ("ontable", &["a"], false)]);
        assert_eq!(eval_projection(&t, &q).answer, Answer::True);
    }

    #[test]
    fn choices() {
        let t = trace(&["(pickup a)", "(stack a b)"]);
        let choices: BTreeMap<char, BTreeSet<Literal>> = [
            ('A', lits(&[("clear", &["b"], true)])),
            (
                'B',
                lits(&[("on", &["a", "b"], true), ("handempty", &[], true)]),
            ),
        ]
        .into_iter()
        .collect();
        assert_eq!(eval_choice(&t, &choices).answer, Answer::Choice('B'));
    }

    #[test]
    fn answer_wire_forms() {
        for (text, a) in [
            ("True", Answer::True),
            ("false.", Answer::False),
            ("PLAN", Answer::Plan),
            ("applicable", Answer::Applicable),
            ("Invalid", Answer::Invalid),
            ("b", Answer::Choice('B')),
        ] {
            assert_eq!(text.parse::<Answer>().unwrap(), a);
        }
        assert!("maybe".parse::<Answer>().is_err());
        assert_eq!(
            serde_json::to_string(&Answer::Choice('C')).unwrap(),
            "\"C\""
        );
        assert_eq!(
            serde_json::from_str::<Answer>("true").unwrap(),
            Answer::True
        );
        assert_eq!(
            serde_json::from_str::<Answer>("\"False\"").unwrap(),
            Answer::False
        );
    }

    #[test]
    fn category_mapping() {
        assert_eq!(
            QueryKind::from_category("action_executability"),
            Some(QueryKind::Executability)
        );
        assert_eq!(
            QueryKind::from_category("fluent_tracking"),
            Some(QueryKind::Projection)
        );
        assert_eq!(
            QueryKind::from_category("Plan Verification"),
            Some(QueryKind::PlanVerification)
        );
        assert_eq!(QueryKind::from_category("goal_recognition"), None);
    }
}
