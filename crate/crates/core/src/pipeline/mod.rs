//! The three-step ProRAC method (extract, progress step by step, query)
//! and the prompting baselines, all over an abstract [`Reasoner`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::query::{QueryKind, Verdict};
use crate::reasoner::{Reasoner, ReasonerConfig, ReasonerError, Transcript};
use crate::registry::DomainBundle;

mod baseline;
pub mod parse;
pub mod prompts;
mod prorac;

pub use baseline::{run_baseline, BaselineRun};
pub use prorac::{
    action_sentence, literals_nl, question_block, run_prorac, structured_state_text, Extraction,
    PipelineRun, StepCheck, StructuredRun,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineMode {
    /// States are parsed and validated after every step.
    #[default]
    Structured,
    /// Free text is carried from step to step.
    Nl,
}

impl FromStr for PipelineMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "structured" => Ok(PipelineMode::Structured),
            "nl" => Ok(PipelineMode::Nl),
            other => Err(format!(
                "unknown pipeline mode `{other}` (expected structured or nl)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MethodKind {
    ZeroShot,
    ZeroShotCot,
    TwoShotCot,
    SelfConsistency,
    ProRac,
}

impl MethodKind {
    pub const ALL: [MethodKind; 5] = [
        MethodKind::ZeroShot,
        MethodKind::ZeroShotCot,
        MethodKind::TwoShotCot,
        MethodKind::SelfConsistency,
        MethodKind::ProRac,
    ];

    /// Command-line identifier.
    pub fn id(&self) -> &'static str {
        match self {
            MethodKind::ZeroShot => "zero-shot",
            MethodKind::ZeroShotCot => "zero-shot-cot",
            MethodKind::TwoShotCot => "two-shot-cot",
            MethodKind::SelfConsistency => "self-consistency",
            MethodKind::ProRac => "prorac",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodKind::ZeroShot => "Zero-Shot",
            MethodKind::ZeroShotCot => "Zero-Shot-CoT",
            MethodKind::TwoShotCot => "Two-Shot-CoT",
            MethodKind::SelfConsistency => "Self-Consistency",
            MethodKind::ProRac => "ProRAC",
        })
    }
}

impl FromStr for MethodKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        MethodKind::ALL
            .into_iter()
            .find(|m| m.id() == key || m.to_string().to_ascii_lowercase() == key)
            .ok_or_else(|| {
                let ids: Vec<&str> = MethodKind::ALL.iter().map(|m| m.id()).collect();
                format!("unknown method `{s}` (expected one of {})", ids.join(", "))
            })
    }
}

/// Shape of the final answer a prompt asks for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnswerFormat {
    Bool,
    ThreeWay,
    Choice(Vec<char>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mode: PipelineMode,
    pub model: String,
    pub temperature: f64,
    pub sc_temperature: f64,
    pub max_tokens: u32,
    pub sc_samples: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::from(&ReasonerConfig::default())
    }
}

impl From<&ReasonerConfig> for PipelineConfig {
    fn from(cfg: &ReasonerConfig) -> Self {
        PipelineConfig {
            mode: cfg.effective_pipeline_mode(),
            model: cfg.model.clone(),
            temperature: cfg.temperature,
            sc_temperature: cfg.sc_temperature,
            max_tokens: cfg.max_tokens,
            sc_samples: 5,
        }
    }
}

/// One question to answer.
#[derive(Debug, Clone, Copy)]
pub struct Task<'a> {
    pub bundle: &'a DomainBundle,
    /// Full problem text: initial state, plan and question.
    pub problem: &'a str,
    pub kind: QueryKind,
    /// Final answer format for the whole question.
    pub format: &'a AnswerFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "stage", content = "step")]
pub enum Stage {
    ExtractState,
    ExtractActions,
    ExtractQuestion,
    Check(usize),
    Progress(usize),
    Query,
    Baseline,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::ExtractState => f.write_str("extract_state"),
            Stage::ExtractActions => f.write_str("extract_actions"),
            Stage::ExtractQuestion => f.write_str("extract_question"),
            Stage::Check(i) => write!(f, "check[{i}]"),
            Stage::Progress(i) => write!(f, "progress[{i}]"),
            Stage::Query => f.write_str("query"),
            Stage::Baseline => f.write_str("baseline"),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineErrorKind {
    #[error(transparent)]
    Reasoner(#[from] ReasonerError),
    #[error("extractor output violates its contract: {0}")]
    ExtractionParse(String),
    #[error("cannot parse state: {0}")]
    StateParse(String),
    #[error("cannot ground action: {0}")]
    ActionParse(String),
    #[error("cannot parse query: {0}")]
    QueryParse(String),
    #[error("no usable final answer: {0}")]
    AnswerParse(String),
    #[error("domain `{0}` has fewer than two worked examples")]
    MissingExamples(String),
    #[error("method {0} is not a baseline")]
    NotABaseline(MethodKind),
}

#[derive(Debug, Error)]
#[error("{stage}: {kind}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: PipelineErrorKind,
}

impl PipelineError {
    pub fn new(stage: Stage, kind: PipelineErrorKind) -> Self {
        PipelineError { stage, kind }
    }
}

/// A failed run with the calls made before the failure.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct PipelineFailure {
    pub error: PipelineError,
    pub transcript: Transcript,
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum MethodOutcome {
    ProRac(PipelineRun),
    Baseline(BaselineRun),
}

impl MethodOutcome {
    pub fn verdict(&self) -> &Verdict {
        match self {
            MethodOutcome::ProRac(r) => &r.answer,
            MethodOutcome::Baseline(r) => &r.verdict,
        }
    }

    pub fn transcript(&self) -> &Transcript {
        match self {
            MethodOutcome::ProRac(r) => &r.transcript,
            MethodOutcome::Baseline(r) => &r.transcript,
        }
    }
}

pub fn run_method(
    task: &Task<'_>,
    method: MethodKind,
    cfg: &PipelineConfig,
    reasoner: &dyn Reasoner,
) -> Result<MethodOutcome, PipelineFailure> {
    match method {
        MethodKind::ProRac => run_prorac(task, cfg, reasoner).map(MethodOutcome::ProRac),
        other => run_baseline(task, other, cfg, reasoner).map(MethodOutcome::Baseline),
    }
}
