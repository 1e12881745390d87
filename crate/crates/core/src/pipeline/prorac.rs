use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::domain::{
    parse_literals_text, parse_state_text, Domain, GroundAction, NlAnnotations, Objects,
};
use crate::model::{Literal, State};
use crate::query::{Answer, Evidence, QueryKind, Verdict};
use crate::reasoner::{Reasoner, ReasonerRequest, Transcript};

use super::parse::{
    action_sentences, labeled_line, last_line, markdown_violation, parse_final_answer,
    question_parts, rationale,
};
use super::{
    prompts, AnswerFormat, PipelineConfig, PipelineError, PipelineErrorKind, PipelineFailure,
    PipelineMode, Stage, Task,
};

/// What the three extractor calls produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extraction {
    /// Initial state as it is passed on to the first step.
    pub init_state_text: String,
    /// One comma-free sentence per action.
    pub action_texts: Vec<String>,
    pub query_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepCheck {
    pub executable: bool,
    pub rationale: String,
}

/// Parsed forms kept by structured runs.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredRun {
    pub objects: Objects,
    /// S0 followed by every progressed state.
    pub states: Vec<State>,
    pub actions: Vec<GroundAction>,
    pub query: BTreeSet<Literal>,
    pub choices: BTreeMap<char, BTreeSet<Literal>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineRun {
    pub mode: PipelineMode,
    pub extraction: Extraction,
    /// S0 text followed by the text of every progressed state.
    pub step_states: Vec<String>,
    pub step_checks: Vec<StepCheck>,
    pub answer: Verdict,
    pub transcript: Transcript,
    #[serde(skip)]
    pub structured: Option<StructuredRun>,
}

impl PipelineRun {
    /// Index of the step whose check failed.
    pub fn short_circuit_at(&self) -> Option<usize> {
        self.step_checks.iter().position(|c| !c.executable)
    }
}

pub fn run_prorac(
    task: &Task<'_>,
    cfg: &PipelineConfig,
    reasoner: &dyn Reasoner,
) -> Result<PipelineRun, PipelineFailure> {
    let mut runner = Runner {
        task,
        cfg,
        reasoner,
        transcript: Transcript::new(),
    };
    match runner.run() {
        Ok(mut run) => {
            run.transcript = runner.transcript;
            Ok(run)
        }
        Err(error) => Err(PipelineFailure {
            error,
            transcript: runner.transcript,
        }),
    }
}

struct Runner<'t, 'a> {
    task: &'t Task<'a>,
    cfg: &'t PipelineConfig,
    reasoner: &'t dyn Reasoner,
    transcript: Transcript,
}

fn err(stage: Stage, kind: PipelineErrorKind) -> PipelineError {
    PipelineError::new(stage, kind)
}

/// The state as shown to later prompts in structured mode: the
/// object-grouped description followed by the machine-readable lines.
pub fn structured_state_text(
    ann: &NlAnnotations,
    domain: &Domain,
    objects: &Objects,
    state: &State,
) -> Result<String, String> {
    let nl = ann
        .render_state_nl(state, domain, objects)
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "{nl}\nOBJECTS: {objects}\nSTATE: {}",
        state.canonical()
    ))
}

/// `Pick up a from the table.`
pub fn action_sentence(
    ann: &NlAnnotations,
    domain: &Domain,
    action: &GroundAction,
) -> Result<String, String> {
    let clause = ann
        .render_action_nl(action, domain)
        .map_err(|e| e.to_string())?;
    let mut chars = clause.chars();
    Ok(match chars.next() {
        Some(c) => format!("{}{}.", c.to_uppercase(), chars.as_str()),
        None => String::new(),
    })
}

/// `a on top of b; not b is clear`
pub fn literals_nl(
    ann: &NlAnnotations,
    domain: &Domain,
    lits: &BTreeSet<Literal>,
) -> Result<String, String> {
    let mut parts = Vec::new();
    for l in lits {
        let text = ann
            .render_fluent_nl(&l.fluent, domain)
            .map_err(|e| e.to_string())?;
        parts.push(if l.positive {
            text
        } else {
            format!("not {text}")
        });
    }
    Ok(parts.join("; "))
}

/// What a faithful question extractor returns for a known question.
pub fn question_block(
    ann: &NlAnnotations,
    domain: &Domain,
    sentence: &str,
    query: &BTreeSet<Literal>,
    choices: &BTreeMap<char, BTreeSet<Literal>>,
    mode: PipelineMode,
) -> Result<String, String> {
    let canonical = |lits: &BTreeSet<Literal>| {
        lits.iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" ")
    };
    if mode == PipelineMode::Structured {
        let mut out = format!("{sentence}\nQUERY: {}", canonical(query));
        for (letter, lits) in choices {
            out.push_str(&format!("\nCHOICE {letter}: {}", canonical(lits)));
        }
        return Ok(out);
    }
    let mut out = sentence.to_string();
    if !query.is_empty() {
        out.push_str(&format!(
            " Propositions: {}.",
            literals_nl(ann, domain, query)?
        ));
    }
    for (letter, lits) in choices {
        out.push_str(&format!(
            " Choice {letter}: {}.",
            literals_nl(ann, domain, lits)?
        ));
    }
    Ok(out)
}

impl Runner<'_, '_> {
    fn call(&mut self, stage: Stage, prompt: String) -> Result<String, PipelineError> {
        let req = ReasonerRequest::single(
            prompt,
            &self.cfg.model,
            self.cfg.temperature,
            self.cfg.max_tokens,
        );
        let mut texts = self
            .transcript
            .call(self.reasoner, stage.to_string(), req)
            .map_err(|e| err(stage, e.into()))?;
        Ok(texts.remove(0))
    }

    fn run(&mut self) -> Result<PipelineRun, PipelineError> {
        let bundle = self.task.bundle;
        let domain = &bundle.domain;
        let ann = &bundle.annotations;
        let mode = self.cfg.mode;
        let structured = mode == PipelineMode::Structured;

        // step 1: extraction
        let raw_state = self.call(
            Stage::ExtractState,
            prompts::extract_state(bundle, self.task.problem, mode),
        )?;
        let extraction_err =
            |stage: Stage, m: String| err(stage, PipelineErrorKind::ExtractionParse(m));
        if let Some(v) = markdown_violation(&raw_state) {
            return Err(extraction_err(Stage::ExtractState, v));
        }
        let mut parsed: Option<StructuredRun> = None;
        let mut state_text = if structured {
            let objects_line = labeled_line(&raw_state, "OBJECTS:")
                .ok_or_else(|| extraction_err(Stage::ExtractState, "no OBJECTS: line".into()))?;
            let state_line = labeled_line(&raw_state, "STATE:")
                .ok_or_else(|| extraction_err(Stage::ExtractState, "no STATE: line".into()))?;
            let objects = Objects::parse_listing(objects_line, domain)
                .map_err(|e| extraction_err(Stage::ExtractState, e.to_string()))?;
            let s0 = parse_state_text(state_line, domain, &objects)
                .map_err(|e| extraction_err(Stage::ExtractState, e.to_string()))?;
            let text = structured_state_text(ann, domain, &objects, &s0)
                .map_err(|m| err(Stage::ExtractState, PipelineErrorKind::StateParse(m)))?;
            parsed = Some(StructuredRun {
                objects,
                states: vec![s0],
                actions: Vec::new(),
                query: BTreeSet::new(),
                choices: BTreeMap::new(),
            });
            text
        } else {
            last_line(&raw_state)
                .ok_or_else(|| extraction_err(Stage::ExtractState, "empty response".into()))?
                .to_string()
        };

        let raw_actions = self.call(
            Stage::ExtractActions,
            prompts::extract_actions(bundle, self.task.problem),
        )?;
        let sentences =
            action_sentences(&raw_actions).map_err(|m| extraction_err(Stage::ExtractActions, m))?;
        let action_texts = match parsed.as_mut() {
            Some(p) => {
                let mut texts = Vec::with_capacity(sentences.len());
                for s in &sentences {
                    let g = ann.parse_action_nl(s, domain, &p.objects).map_err(|e| {
                        err(
                            Stage::ExtractActions,
                            PipelineErrorKind::ActionParse(e.to_string()),
                        )
                    })?;
                    texts.push(action_sentence(ann, domain, &g).map_err(|m| {
                        err(Stage::ExtractActions, PipelineErrorKind::ActionParse(m))
                    })?);
                    p.actions.push(g);
                }
                texts
            }
            None => sentences,
        };

        let raw_question = self.call(
            Stage::ExtractQuestion,
            prompts::extract_question(bundle, self.task.problem, mode),
        )?;
        let parts =
            question_parts(&raw_question).map_err(|m| extraction_err(Stage::ExtractQuestion, m))?;
        if let Some(p) = parsed.as_mut() {
            let qerr = |e: crate::error::LoadError| {
                err(
                    Stage::ExtractQuestion,
                    PipelineErrorKind::QueryParse(e.to_string()),
                )
            };
            if let Some(q) = &parts.query {
                p.query = parse_literals_text(q, domain, &p.objects).map_err(qerr)?;
            }
            for (letter, lits) in &parts.choices {
                p.choices.insert(
                    *letter,
                    parse_literals_text(lits, domain, &p.objects).map_err(qerr)?,
                );
            }
        }
        let query_text = raw_question.trim().to_string();
        let extraction = Extraction {
            init_state_text: state_text.clone(),
            action_texts: action_texts.clone(),
            query_text: query_text.clone(),
        };

        // step 2: progression, one fresh call per check and per update
        let mut step_states = vec![state_text.clone()];
        let mut step_checks = Vec::new();
        let mut failed_at = None;
        for (i, action_text) in action_texts.iter().enumerate() {
            let response = self.call(
                Stage::Check(i),
                prompts::check(bundle, &state_text, action_text),
            )?;
            let answer = parse_final_answer(&response, &AnswerFormat::Bool).ok_or_else(|| {
                err(
                    Stage::Check(i),
                    PipelineErrorKind::AnswerParse("no Final Answer: True/False line".into()),
                )
            })?;
            let executable = answer == Answer::True;
            step_checks.push(StepCheck {
                executable,
                rationale: rationale(&response),
            });
            if !executable {
                failed_at = Some(i);
                break;
            }
            let response = self.call(
                Stage::Progress(i),
                prompts::progress(bundle, &state_text, action_text, mode),
            )?;
            let state_err = |m: String| err(Stage::Progress(i), PipelineErrorKind::StateParse(m));
            if let Some(v) = markdown_violation(&response) {
                return Err(state_err(v));
            }
            state_text = match parsed.as_mut() {
                Some(p) => {
                    let line = labeled_line(&response, "STATE:")
                        .ok_or_else(|| state_err("no STATE: line".into()))?;
                    let next = parse_state_text(line, domain, &p.objects)
                        .map_err(|e| state_err(e.to_string()))?;
                    let text =
                        structured_state_text(ann, domain, &p.objects, &next).map_err(state_err)?;
                    p.states.push(next);
                    text
                }
                None => last_line(&response)
                    .ok_or_else(|| state_err("empty response".into()))?
                    .to_string(),
            };
            step_states.push(state_text.clone());
        }

        // step 3: query, or the short-circuit verdict
        let answer = match failed_at {
            Some(i) => {
                let answer = if self.task.kind == QueryKind::Validation {
                    Answer::Invalid
                } else {
                    Answer::False
                };
                let why = &step_checks[i].rationale;
                Verdict::new(
                    answer,
                    Evidence::Rationale {
                        text: format!("step {i} judged not executable: {why}"),
                    },
                )
            }
            None => {
                let format = match self.task.format {
                    AnswerFormat::Choice(letters) => AnswerFormat::Choice(letters.clone()),
                    _ => AnswerFormat::Bool,
                };
                let response = self.call(
                    Stage::Query,
                    prompts::query(bundle, &state_text, &query_text, &format),
                )?;
                let answer = parse_final_answer(&response, &format).ok_or_else(|| {
                    err(
                        Stage::Query,
                        PipelineErrorKind::AnswerParse("no usable Final Answer: line".into()),
                    )
                })?;
                let answer = match (self.task.kind, answer) {
                    (QueryKind::Validation, Answer::True) => Answer::Plan,
                    (QueryKind::Validation, Answer::False) => Answer::Applicable,
                    (_, a) => a,
                };
                let mut text = rationale(&response);
                if text.is_empty() {
                    text = format!("query answered {answer}");
                }
                Verdict::new(answer, Evidence::Rationale { text })
            }
        };

        Ok(PipelineRun {
            mode,
            extraction,
            step_states,
            step_checks,
            answer,
            transcript: Transcript::new(),
            structured: parsed,
        })
    }
}
