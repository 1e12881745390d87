use std::fmt;

use thiserror::Error;

use crate::model::Literal;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid name {raw:?}: {reason}")]
pub struct InvalidName {
    pub raw: String,
    pub reason: &'static str,
}

/// Syntax error with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at {line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

/// Well-formed input that references something undeclared or ill-typed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("validation error on `{symbol}`: {message}")]
pub struct ValidationError {
    pub symbol: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(symbol: impl fmt::Display, message: impl Into<String>) -> Self {
        ValidationError {
            symbol: symbol.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroundError {
    #[error("unknown action schema `{0}`")]
    UnknownSchema(String),
    #[error("`{schema}` takes {expected} argument(s), got {got}")]
    ArityMismatch {
        schema: String,
        expected: usize,
        got: usize,
    },
    #[error("argument `{object}` of `{schema}` must be of type `{expected}`{}", found.as_ref().map(|t| format!(", found `{t}`")).unwrap_or_else(|| " but is not a declared object".to_string()))]
    TypeMismatch {
        schema: String,
        object: String,
        expected: String,
        found: Option<String>,
    },
    #[error(transparent)]
    Name(#[from] InvalidName),
    #[error("cannot read action {text:?}: {reason}")]
    Unrecognized { text: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no natural-language template for `{0}`")]
pub struct MissingTemplate(pub String);

/// Applying an action whose preconditions fail.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error(
    "action {action} is not applicable; unsatisfied: {}",
    render_literals(unsatisfied)
)]
pub struct NotApplicable {
    pub action: String,
    pub unsatisfied: Vec<Literal>,
}

pub(crate) fn render_literals(lits: &[Literal]) -> String {
    lits.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}
