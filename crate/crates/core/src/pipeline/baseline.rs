use serde::Serialize;

use crate::query::{Answer, Evidence, Verdict};
use crate::reasoner::{Reasoner, ReasonerRequest, Transcript};

use super::parse::{parse_final_answer, rationale, vote};
use super::{
    prompts, MethodKind, PipelineConfig, PipelineError, PipelineErrorKind, PipelineFailure, Stage,
    Task,
};

#[derive(Debug, Clone, Serialize)]
pub struct BaselineRun {
    pub method: MethodKind,
    pub verdict: Verdict,
    /// Parsed answer of every sample, `None` where parsing failed.
    pub samples: Vec<Option<Answer>>,
    pub transcript: Transcript,
}

/// One call (five samples for self-consistency) answering the whole
/// question at once.
pub fn run_baseline(
    task: &Task<'_>,
    method: MethodKind,
    cfg: &PipelineConfig,
    reasoner: &dyn Reasoner,
) -> Result<BaselineRun, PipelineFailure> {
    let mut transcript = Transcript::new();
    let fail = |kind: PipelineErrorKind, transcript: Transcript| PipelineFailure {
        error: PipelineError::new(Stage::Baseline, kind),
        transcript,
    };
    let bundle = task.bundle;
    let (prompt, temperature, n) = match method {
        MethodKind::ZeroShot => (
            prompts::zero_shot(bundle, task.problem, task.format, false),
            cfg.temperature,
            1,
        ),
        MethodKind::ZeroShotCot => (
            prompts::zero_shot(bundle, task.problem, task.format, true),
            cfg.temperature,
            1,
        ),
        MethodKind::TwoShotCot => match prompts::two_shot_cot(bundle, task.problem, task.format) {
            Some(p) => (p, cfg.temperature, 1),
            None => {
                return Err(fail(
                    PipelineErrorKind::MissingExamples(bundle.domain.name.to_string()),
                    transcript,
                ))
            }
        },
        MethodKind::SelfConsistency => (
            prompts::zero_shot(bundle, task.problem, task.format, true),
            cfg.sc_temperature,
            cfg.sc_samples,
        ),
        MethodKind::ProRac => {
            return Err(fail(PipelineErrorKind::NotABaseline(method), transcript))
        }
    };
    let mut req = ReasonerRequest::single(prompt, &cfg.model, temperature, cfg.max_tokens);
    req.n = n;
    let texts = match transcript.call(reasoner, Stage::Baseline.to_string(), req) {
        Ok(t) => t,
        Err(e) => return Err(fail(e.into(), transcript)),
    };
    let samples: Vec<Option<Answer>> = texts
        .iter()
        .map(|t| parse_final_answer(t, task.format))
        .collect();
    let Some(answer) = vote(&samples) else {
        let m = format!(
            "none of {} sample(s) ends with a usable Final Answer: line",
            samples.len()
        );
        return Err(fail(PipelineErrorKind::AnswerParse(m), transcript));
    };
    let support = samples.iter().filter(|s| **s == Some(answer)).count();
    let first = samples.iter().position(|s| *s == Some(answer)).unwrap();
    let mut text = rationale(&texts[first]);
    if samples.len() > 1 {
        text = format!("{support} of {} samples agree. {text}", samples.len());
    }
    if text.trim().is_empty() {
        text = format!("answered {answer}");
    }
    Ok(BaselineRun {
        method,
        verdict: Verdict::new(answer, Evidence::Rationale { text }),
        samples,
        transcript,
    })
}
