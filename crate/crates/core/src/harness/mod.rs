//! Benchmark instances: loading, grounding against the registry, oracle
//! answers, suites and accuracy tables, label audits and error labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::domain::{parse_literals_text, parse_state_text, GroundAction, Objects};
use crate::engine::{progress, Trace};
use crate::model::{Literal, Name, State};
use crate::pipeline::AnswerFormat;
use crate::query::{eval_choice, evaluate, Answer, Query, QueryKind, Verdict};
use crate::reasoner::{MockProblem, SymbolicMock};
use crate::registry::Registry;

mod audit;
mod render;
mod suite;
mod taxonomy;

pub use audit::{audit_instance, audit_labels, AuditEntry, AuditError, AuditReport};
pub use render::{render_prompts, RenderedPrompt};
pub use suite::{
    accuracy_hundredths, emit_table, format_accuracy, run_one, run_suite, Cell, CellEntry,
    ResultsTable, RunRecord, SuiteOutput, TableFormat,
};
pub use taxonomy::{classify_error, ErrorLabel, IncomparableRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnswerType {
    #[serde(rename = "bool", alias = "true_false_answer", alias = "boolean")]
    Bool,
    #[serde(rename = "mcq", alias = "multiple_choice")]
    Mcq,
}

/// How a benchmark's validation label relates to the three-way classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationSemantics {
    /// Gold is one of plan / applicable / invalid.
    ThreeWay,
    /// Gold is True iff the sequence is a plan.
    #[default]
    Plan,
    /// Gold is True iff the sequence is executable.
    Applicable,
}

impl ValidationSemantics {
    /// Maps a three-way answer onto the gold label space. Boolean answers
    /// pass through unchanged.
    pub fn project(self, answer: Answer) -> Answer {
        match (self, answer) {
            (ValidationSemantics::ThreeWay, a) => a,
            (ValidationSemantics::Plan, Answer::Plan) => Answer::True,
            (ValidationSemantics::Plan, Answer::Applicable | Answer::Invalid) => Answer::False,
            (ValidationSemantics::Applicable, Answer::Plan | Answer::Applicable) => Answer::True,
            (ValidationSemantics::Applicable, Answer::Invalid) => Answer::False,
            (_, a) => a,
        }
    }
}

/// Symbolic form of an instance, as written in instance files.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuredBlock {
    /// Type name to object names.
    pub objects: BTreeMap<String, Vec<String>>,
    /// Space-separated fluents.
    pub init: String,
    /// Canonical action terms in order.
    pub actions: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub query: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub goal: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub choices: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(deserialize_with = "string_or_number")]
    pub question_id: String,
    pub domain_name: String,
    pub question_category: String,
    pub answer_type: AnswerType,
    pub question: String,
    pub answer: Answer,
    pub plan_length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state_nl: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structured: Option<StructuredBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_semantics: Option<ValidationSemantics>,
}

fn string_or_number<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    match serde_json::Value::deserialize(d)? {
        serde_json::Value::String(s) => Ok(s),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        other => Err(serde::de::Error::custom(format!(
            "question_id must be a string or number, got {other}"
        ))),
    }
}

/// An instance's structured block resolved against its domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundedInstance {
    pub domain: Name,
    pub kind: QueryKind,
    pub objects: Objects,
    pub init: State,
    pub actions: Vec<GroundAction>,
    /// Query literals for projection, goal literals for plan verification
    /// and validation, empty for executability.
    pub literals: BTreeSet<Literal>,
    pub choices: BTreeMap<char, BTreeSet<Literal>>,
}

impl GroundedInstance {
    pub fn trace(&self) -> Trace {
        progress(&self.init, &self.actions)
    }
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("record {record}: {message}")]
    Record { record: usize, message: String },
}

impl SchemaError {
    pub fn record(&self) -> Option<usize> {
        match self {
            SchemaError::Record { record, .. } => Some(*record),
            SchemaError::Io { .. } => None,
        }
    }
}

impl Instance {
    pub fn kind(&self) -> Result<QueryKind, String> {
        QueryKind::from_category(&self.question_category)
            .ok_or_else(|| format!("unknown question_category `{}`", self.question_category))
    }

    pub fn semantics(&self) -> ValidationSemantics {
        self.validation_semantics.unwrap_or_default()
    }

    /// Column label in result tables.
    pub fn task_label(&self) -> String {
        let base = self
            .question_category
            .trim()
            .to_ascii_lowercase()
            .replace([' ', '-'], "_");
        match self.answer_type {
            AnswerType::Mcq => format!("{base}_mcq"),
            AnswerType::Bool => base,
        }
    }

    /// Full problem text given to the pipeline and the baselines.
    pub fn problem_text(&self) -> String {
        match &self.initial_state_nl {
            Some(init) if !init.trim().is_empty() => {
                format!("{}\n{}", init.trim(), self.question.trim())
            }
            _ => self.question.trim().to_string(),
        }
    }

    /// The last interrogative sentence of the question.
    pub fn question_sentence(&self) -> String {
        let text = self.question.trim();
        let Some(end) = text.rfind('?') else {
            return text.to_string();
        };
        let head = &text[..end];
        let start = head.rfind(['.', '?', '!', '\n']).map_or(0, |i| i + 1);
        text[start..=end].trim().to_string()
    }

    pub fn answer_format(&self) -> AnswerFormat {
        match self.answer_type {
            AnswerType::Mcq => {
                let letters = self
                    .structured
                    .as_ref()
                    .map(|s| {
                        s.choices
                            .keys()
                            .filter_map(|k| k.chars().next())
                            .collect::<Vec<_>>()
                    })
                    .filter(|l| !l.is_empty())
                    .unwrap_or_else(|| vec!['A', 'B', 'C', 'D']);
                AnswerFormat::Choice(
                    letters
                        .into_iter()
                        .map(|c| c.to_ascii_uppercase())
                        .collect(),
                )
            }
            AnswerType::Bool
                if self.kind() == Ok(QueryKind::Validation)
                    && self.semantics() == ValidationSemantics::ThreeWay =>
            {
                AnswerFormat::ThreeWay
            }
            AnswerType::Bool => AnswerFormat::Bool,
        }
    }

    /// Maps a method's answer into the gold label space.
    pub fn project(&self, answer: Answer) -> Answer {
        if self.kind() == Ok(QueryKind::Validation) {
            self.semantics().project(answer)
        } else {
            answer
        }
    }

    pub fn ground(&self, registry: &Registry) -> Result<GroundedInstance, String> {
        let block = self.structured.as_ref().ok_or("no structured block")?;
        let kind = self.kind()?;
        let bundle = registry
            .get_str(&self.domain_name)
            .ok_or_else(|| format!("domain `{}` is not registered", self.domain_name))?;
        let domain = &bundle.domain;
        let mut objects = Objects::new();
        for (ty, names) in &block.objects {
            let ty = Name::new(ty).map_err(|e| e.to_string())?;
            if !domain.types.is_declared(&ty) {
                return Err(format!("undeclared type `{ty}`"));
            }
            for n in names {
                let n = Name::new(n).map_err(|e| e.to_string())?;
                if objects.insert(n.clone(), ty.clone()).is_some() {
                    return Err(format!("object `{n}` listed twice"));
                }
            }
        }
        let init =
            parse_state_text(&block.init, domain, &objects).map_err(|e| format!("init: {e}"))?;
        let actions = block
            .actions
            .iter()
            .map(|t| {
                domain
                    .ground_term(t, &objects)
                    .map_err(|e| format!("action {t}: {e}"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if actions.len() != self.plan_length {
            return Err(format!(
                "plan_length is {} but the structured block lists {} action(s)",
                self.plan_length,
                actions.len()
            ));
        }
        let lits = |items: &[String], what: &str| {
            parse_literals_text(&items.join(" "), domain, &objects)
                .map_err(|e| format!("{what}: {e}"))
        };
        let query = lits(&block.query, "query")?;
        let goal = lits(&block.goal, "goal")?;
        let literals = match kind {
            QueryKind::Projection => query,
            QueryKind::Executability => BTreeSet::new(),
            QueryKind::PlanVerification | QueryKind::Validation => {
                if goal.is_empty() {
                    query
                } else {
                    goal
                }
            }
        };
        let mut choices = BTreeMap::new();
        for (key, items) in &block.choices {
            let mut chars = key.chars();
            let letter = match (chars.next(), chars.next()) {
                (Some(c), None) if c.is_ascii_alphabetic() => c.to_ascii_uppercase(),
                _ => return Err(format!("choice key `{key}` is not a single letter")),
            };
            choices.insert(letter, lits(items, &format!("choice {letter}"))?);
        }
        if self.answer_type == AnswerType::Mcq && choices.is_empty() {
            return Err("mcq instance without choices".into());
        }
        Ok(GroundedInstance {
            domain: domain.name.clone(),
            kind,
            objects,
            init,
            actions,
            literals,
            choices,
        })
    }

    /// Oracle answer in the gold label space.
    pub fn oracle_verdict(&self, g: &GroundedInstance) -> Verdict {
        let trace = g.trace();
        let v = if g.choices.is_empty() {
            evaluate(&trace, &Query::new(g.kind, g.literals.clone()))
        } else {
            eval_choice(&trace, &g.choices)
        };
        Verdict::new(self.project(v.answer), v.evidence)
    }

    /// What the symbolic mock needs to answer this instance.
    pub fn mock_problem(&self, registry: &Registry) -> Result<MockProblem, String> {
        let g = self.ground(registry)?;
        let oracle_answer = self.oracle_verdict(&g).answer;
        Ok(MockProblem {
            domain: g.domain,
            problem_text: self.problem_text(),
            objects: g.objects,
            init: g.init,
            actions: g.actions,
            question_sentence: self.question_sentence(),
            query: g.literals,
            choices: g.choices,
            oracle_answer,
        })
    }

    fn check(&self, registry: &Registry) -> Result<(), String> {
        let kind = self.kind()?;
        match (self.answer_type, self.answer) {
            (AnswerType::Mcq, Answer::Choice(_)) => {}
            (AnswerType::Mcq, a) => return Err(format!("mcq answer must be a letter, got `{a}`")),
            (AnswerType::Bool, Answer::True | Answer::False)
                if !(kind == QueryKind::Validation
                    && self.semantics() == ValidationSemantics::ThreeWay) => {}
            (AnswerType::Bool, Answer::Plan | Answer::Applicable | Answer::Invalid)
                if kind == QueryKind::Validation
                    && self.semantics() == ValidationSemantics::ThreeWay => {}
            (_, a) => {
                return Err(format!(
                    "answer `{a}` does not fit answer_type and category"
                ))
            }
        }
        if self.structured.is_some() {
            self.ground(registry)?;
        }
        Ok(())
    }
}

/// Parses line-delimited instance records; blank lines are skipped.
/// Record numbers are 1-based line numbers.
pub fn parse_instances(text: &str, registry: &Registry) -> Result<Vec<Instance>, SchemaError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| SchemaError::Record {
            record: i + 1,
            message,
        };
        let inst: Instance = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        inst.check(registry).map_err(bad)?;
        out.push(inst);
    }
    Ok(out)
}

pub fn load_instances(path: &Path, registry: &Registry) -> Result<Vec<Instance>, SchemaError> {
    let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_instances(&text, registry)
}

/// Mock reasoner that knows every structured instance.
pub fn mock_for(registry: &Registry, instances: &[Instance]) -> Result<SymbolicMock, String> {
    let mut mock = SymbolicMock::new(registry.clone());
    for inst in instances.iter().filter(|i| i.structured.is_some()) {
        mock.add_problem(
            inst.mock_problem(registry)
                .map_err(|e| format!("{}: {e}", inst.question_id))?,
        );
    }
    Ok(mock)
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("records serialize"));
        out.push('\n');
    }
    out
}

impl fmt::Display for AnswerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnswerType::Bool => "bool",
            AnswerType::Mcq => "mcq",
        })
    }
}

impl FromStr for ValidationSemantics {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "three_way" => Ok(ValidationSemantics::ThreeWay),
            "plan" => Ok(ValidationSemantics::Plan),
            "applicable" => Ok(ValidationSemantics::Applicable),
            other => Err(format!("unknown validation semantics `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = r#"{"question_id": 7, "domain_name": "blocksworld", "question_category": "projection", "answer_type": "true_false_answer", "question": "A is picked up. Is a held?", "answer": "True", "plan_length": 1, "structured": {"objects": {"block": ["a", "b"]}, "init": "(ontable a) (ontable b) (clear a) (clear b) (handempty)", "actions": ["(pickup a)"], "query": ["(holding a)"]}}"#;

    #[test]
    fn loads_and_grounds() {
        let reg = Registry::builtin();
        let insts = parse_instances(ONE, &reg).unwrap();
        assert_eq!(insts[0].question_id, "7");
        assert_eq!(insts[0].question_sentence(), "Is a held?");
        let g = insts[0].ground(&reg).unwrap();
        assert_eq!(insts[0].oracle_verdict(&g).answer, Answer::True);
    }

    #[test]
    fn schema_errors_carry_record_numbers() {
        let reg = Registry::builtin();
        let missing = ONE.replace(r#""answer": "True", "#, "");
        let text = format!("{ONE}\n\n{missing}");
        assert_eq!(parse_instances(&text, &reg).unwrap_err().record(), Some(3));
        let long = ONE.replace(r#""plan_length": 1"#, r#""plan_length": 2"#);
        let e = parse_instances(&long, &reg).unwrap_err();
        assert!(e.to_string().contains("plan_length"), "{e}");
        let mcq = ONE.replace("true_false_answer", "mcq");
        assert!(parse_instances(&mcq, &reg).is_err());
    }

    #[test]
    fn semantics_projection() {
        use ValidationSemantics::*;
        assert_eq!(Plan.project(Answer::Applicable), Answer::False);
        assert_eq!(Applicable.project(Answer::Applicable), Answer::True);
        assert_eq!(Applicable.project(Answer::Invalid), Answer::False);
        assert_eq!(ThreeWay.project(Answer::Invalid), Answer::Invalid);
        assert_eq!(Plan.project(Answer::True), Answer::True);
    }
}
