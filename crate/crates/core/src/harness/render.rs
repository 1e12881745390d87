use serde::Serialize;

use crate::domain::NlAnnotations;
use crate::pipeline::{
    action_sentence, prompts, question_block, structured_state_text, AnswerFormat, MethodKind,
    PipelineConfig, PipelineMode, Stage,
};
use crate::registry::Registry;

use super::Instance;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderedPrompt {
    pub stage: String,
    pub prompt: String,
    pub temperature: f64,
    pub n: u32,
}

/// Every prompt `method` would send for `inst`, assuming each answer is
/// the oracle's. Makes no reasoner calls. Without a structured block only
/// the extraction prompts of ProRAC can be rendered.
pub fn render_prompts(
    inst: &Instance,
    method: MethodKind,
    cfg: &PipelineConfig,
    registry: &Registry,
) -> Result<Vec<RenderedPrompt>, String> {
    let bundle = registry
        .get_str(&inst.domain_name)
        .ok_or_else(|| format!("domain `{}` is not registered", inst.domain_name))?;
    let problem = inst.problem_text();
    let format = inst.answer_format();
    let one = |stage: Stage, prompt: String| RenderedPrompt {
        stage: stage.to_string(),
        prompt,
        temperature: cfg.temperature,
        n: 1,
    };
    let baseline = match method {
        MethodKind::ZeroShot => Some(one(
            Stage::Baseline,
            prompts::zero_shot(bundle, &problem, &format, false),
        )),
        MethodKind::ZeroShotCot => Some(one(
            Stage::Baseline,
            prompts::zero_shot(bundle, &problem, &format, true),
        )),
        MethodKind::TwoShotCot => Some(one(
            Stage::Baseline,
            prompts::two_shot_cot(bundle, &problem, &format).ok_or_else(|| {
                format!(
                    "domain `{}` has fewer than two worked examples",
                    inst.domain_name
                )
            })?,
        )),
        MethodKind::SelfConsistency => Some(RenderedPrompt {
            temperature: cfg.sc_temperature,
            n: cfg.sc_samples,
            ..one(
                Stage::Baseline,
                prompts::zero_shot(bundle, &problem, &format, true),
            )
        }),
        MethodKind::ProRac => None,
    };
    if let Some(p) = baseline {
        return Ok(vec![p]);
    }

    let mode = cfg.mode;
    let mut out = vec![
        one(
            Stage::ExtractState,
            prompts::extract_state(bundle, &problem, mode),
        ),
        one(
            Stage::ExtractActions,
            prompts::extract_actions(bundle, &problem),
        ),
        one(
            Stage::ExtractQuestion,
            prompts::extract_question(bundle, &problem, mode),
        ),
    ];
    if inst.structured.is_none() {
        return Ok(out);
    }
    let g = inst.ground(registry)?;
    let (ann, domain) = (&bundle.annotations, &bundle.domain);
    let state_text = |s| -> Result<String, String> {
        match mode {
            PipelineMode::Structured => structured_state_text(ann, domain, &g.objects, s),
            PipelineMode::Nl => render_nl(ann, domain, &g.objects, s),
        }
    };
    let trace = g.trace();
    let mut state = state_text(&trace.states[0])?;
    for (i, action) in g.actions.iter().enumerate() {
        let sentence = action_sentence(ann, domain, action)?;
        out.push(one(
            Stage::Check(i),
            prompts::check(bundle, &state, &sentence),
        ));
        if !trace.checks[i].applicable {
            return Ok(out);
        }
        out.push(one(
            Stage::Progress(i),
            prompts::progress(bundle, &state, &sentence, mode),
        ));
        state = state_text(&trace.states[i + 1])?;
    }
    let question = question_block(
        ann,
        domain,
        &inst.question_sentence(),
        &g.literals,
        &g.choices,
        mode,
    )?;
    let format = match format {
        AnswerFormat::Choice(letters) => AnswerFormat::Choice(letters),
        _ => AnswerFormat::Bool,
    };
    out.push(one(
        Stage::Query,
        prompts::query(bundle, &state, &question, &format),
    ));
    Ok(out)
}

fn render_nl(
    ann: &NlAnnotations,
    domain: &crate::domain::Domain,
    objects: &crate::domain::Objects,
    state: &crate::model::State,
) -> Result<String, String> {
    ann.render_state_nl(state, domain, objects)
        .map_err(|e| e.to_string())
}
