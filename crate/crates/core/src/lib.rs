//! Reasoning about actions and change: a STRIPS progression oracle, a
//! progression-based prompting pipeline over a pluggable reasoner, and the
//! benchmark harness around both.

pub mod domain;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod model;
pub mod pipeline;
pub mod query;
pub mod reasoner;
pub mod registry;
pub mod template;

pub use domain::{
    parse_domain, parse_problem, ActionSchema, Domain, GroundAction, NlAnnotations, Problem,
};
pub use engine::{apply_action, is_applicable, progress, Trace};
pub use error::{GroundError, LoadError, ParseError, ValidationError};
pub use harness::{Instance, ResultsTable, RunRecord};
pub use model::{Fluent, Literal, Name, State};
pub use pipeline::{MethodKind, PipelineConfig, PipelineMode, PipelineRun};
pub use query::{evaluate, Answer, Evidence, Query, QueryKind, Verdict};
pub use reasoner::{Reasoner, ReasonerConfig, SymbolicMock};
pub use registry::{DomainBundle, Registry};
