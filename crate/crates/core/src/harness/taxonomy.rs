use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::engine::{apply_effects, Trace};
use crate::model::state_diff;
use crate::pipeline::{PipelineMode, PipelineRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ErrorLabel {
    /// A fluent the action does not touch changed.
    FrameViolation,
    /// An add or delete effect is missing.
    EffectMiss,
    /// The executability judgement disagrees with the oracle.
    QualificationError,
    /// S0 or the action list differs from the instance.
    ExtractionError,
    None,
}

impl fmt::Display for ErrorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("run cannot be compared with the oracle: {0}")]
pub struct IncomparableRun(pub String);

/// Labels the first point where a structured run leaves the oracle trace.
pub fn classify_error(run: &PipelineRun, oracle: &Trace) -> Result<ErrorLabel, IncomparableRun> {
    if run.mode != PipelineMode::Structured {
        return Err(IncomparableRun("run was made in nl mode".into()));
    }
    let s = run
        .structured
        .as_ref()
        .ok_or_else(|| IncomparableRun("run kept no parsed states".into()))?;
    if s.states.first() != Some(oracle.initial_state()) || s.actions != oracle.actions {
        return Ok(ErrorLabel::ExtractionError);
    }
    for (i, check) in run.step_checks.iter().enumerate() {
        let Some(truth) = oracle.checks.get(i) else {
            return Err(IncomparableRun(format!("oracle trace has no step {i}")));
        };
        if check.executable != truth.applicable {
            return Ok(ErrorLabel::QualificationError);
        }
        let (Some(before), Some(after)) = (s.states.get(i), s.states.get(i + 1)) else {
            continue;
        };
        let action = &s.actions[i];
        let diff = state_diff(before, after);
        let touched = |f| action.add.contains(f) || action.del.contains(f);
        if diff.added.iter().chain(&diff.removed).any(|f| !touched(f)) {
            return Ok(ErrorLabel::FrameViolation);
        }
        if *after != apply_effects(before, action) {
            return Ok(ErrorLabel::EffectMiss);
        }
    }
    Ok(ErrorLabel::None)
}
