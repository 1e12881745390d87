//! Prompt construction from the bundled text templates.

use crate::registry::DomainBundle;
use crate::template;

use super::{AnswerFormat, PipelineMode};

pub const EXTRACT_STATE: &str = include_str!("../../fixtures/prompts/extract_state.txt");
pub const EXTRACT_ACTIONS: &str = include_str!("../../fixtures/prompts/extract_actions.txt");
pub const EXTRACT_QUESTION: &str = include_str!("../../fixtures/prompts/extract_question.txt");
pub const CHECK: &str = include_str!("../../fixtures/prompts/check.txt");
pub const PROGRESS: &str = include_str!("../../fixtures/prompts/progress.txt");
pub const QUERY: &str = include_str!("../../fixtures/prompts/query.txt");
pub const ZERO_SHOT: &str = include_str!("../../fixtures/prompts/zero_shot.txt");
pub const TWO_SHOT_COT: &str = include_str!("../../fixtures/prompts/two_shot_cot.txt");
pub const COT_SUFFIX: &str = include_str!("../../fixtures/prompts/cot_suffix.txt");

/// First line of each template, used to tell prompts apart.
pub const TASK_EXTRACT_STATE: &str = "Task: initial state extraction";
pub const TASK_EXTRACT_ACTIONS: &str = "Task: action sequence extraction";
pub const TASK_EXTRACT_QUESTION: &str = "Task: question extraction";
pub const TASK_CHECK: &str = "Task: executability check";
pub const TASK_PROGRESS: &str = "Task: progression";
pub const TASK_QUERY: &str = "Task: query answering";
pub const TASK_ANSWER: &str = "Task: question answering";

pub const STATE_FORMAT_STRUCTURED: &str = "End your answer with two lines: \"OBJECTS:\" followed by every object and its type written as name - type and separated by commas, then \"STATE:\" followed by every true fact written as a parenthesized term such as (on a b), separated by spaces.";
pub const STATE_FORMAT_NL: &str = "Write the complete state as the last line of your answer, one sentence per object in the form \"Object: property, property.\"";
pub const PROGRESS_FORMAT_STRUCTURED: &str = "End your answer with a line \"STATE:\" followed by every fact that is true after the action, written as parenthesized terms such as (on a b) and separated by spaces.";
pub const QUESTION_FORMAT_STRUCTURED: &str = "After the paragraph add a line \"QUERY:\" followed by the propositions the question asks about, written as parenthesized terms with (not (...)) for negated ones; leave it empty when the question only asks about executability. For a multiple-choice question add one line per option of the form \"CHOICE A:\" followed by its propositions.";

/// Stands in for the `{examples}` block when a domain has none.
pub const NO_EXAMPLES: &str = "(none)";

pub fn examples_block(examples: &[String]) -> String {
    if examples.is_empty() {
        return NO_EXAMPLES.to_string();
    }
    examples
        .iter()
        .enumerate()
        .map(|(i, e)| format!("(Example {})\n{}", i + 1, e.trim()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn answer_format_text(format: &AnswerFormat) -> String {
    match format {
        AnswerFormat::Bool => {
            "End your answer with a last line that is exactly \"Final Answer: True\" or \"Final Answer: False\".".into()
        }
        AnswerFormat::ThreeWay => "End your answer with a last line \"Final Answer: plan\" if the sequence is executable and reaches the goal, \"Final Answer: applicable\" if it is executable but misses the goal, or \"Final Answer: invalid\" if some action cannot be executed.".into(),
        AnswerFormat::Choice(letters) => {
            let list: Vec<String> = letters.iter().map(char::to_string).collect();
            format!(
                "End your answer with a last line \"Final Answer: <letter>\" naming the correct option among {}.",
                list.join(", ")
            )
        }
    }
}

fn render(tpl: &str, values: &[(&str, &str)]) -> String {
    let out = template::fill(tpl, |k| {
        values.iter().find(|(n, _)| *n == k).map(|(_, v)| *v)
    })
    .expect("bundled prompt templates only use known placeholders");
    out.trim_end().to_string()
}

pub fn extract_state(bundle: &DomainBundle, problem: &str, mode: PipelineMode) -> String {
    let examples = examples_block(bundle.examples.for_stage("extract_state"));
    let format = match mode {
        PipelineMode::Structured => STATE_FORMAT_STRUCTURED,
        PipelineMode::Nl => STATE_FORMAT_NL,
    };
    render(
        EXTRACT_STATE,
        &[
            ("domain_description", &bundle.annotations.description),
            ("examples", &examples),
            ("question", problem.trim()),
            ("output_format", format),
        ],
    )
}

pub fn extract_actions(bundle: &DomainBundle, problem: &str) -> String {
    let examples = examples_block(bundle.examples.for_stage("extract_actions"));
    render(
        EXTRACT_ACTIONS,
        &[("examples", &examples), ("question", problem.trim())],
    )
}

pub fn extract_question(bundle: &DomainBundle, problem: &str, mode: PipelineMode) -> String {
    let examples = examples_block(bundle.examples.for_stage("extract_question"));
    let format = match mode {
        PipelineMode::Structured => QUESTION_FORMAT_STRUCTURED,
        PipelineMode::Nl => "",
    };
    render(
        EXTRACT_QUESTION,
        &[
            ("examples", &examples),
            ("question", problem.trim()),
            ("output_format", format),
        ],
    )
}

pub fn check(bundle: &DomainBundle, state: &str, action: &str) -> String {
    let examples = examples_block(bundle.examples.for_stage("check"));
    render(
        CHECK,
        &[
            ("domain_description", &bundle.annotations.description),
            ("examples", &examples),
            ("current_state", state.trim()),
            ("action", action.trim()),
        ],
    )
}

pub fn progress(bundle: &DomainBundle, state: &str, action: &str, mode: PipelineMode) -> String {
    let examples = examples_block(bundle.examples.for_stage("progress"));
    let format = match mode {
        PipelineMode::Structured => PROGRESS_FORMAT_STRUCTURED,
        PipelineMode::Nl => STATE_FORMAT_NL,
    };
    render(
        PROGRESS,
        &[
            ("domain_description", &bundle.annotations.description),
            ("examples", &examples),
            ("current_state", state.trim()),
            ("action", action.trim()),
            ("output_format", format),
        ],
    )
}

pub fn query(
    bundle: &DomainBundle,
    final_state: &str,
    question: &str,
    format: &AnswerFormat,
) -> String {
    let examples = examples_block(bundle.examples.for_stage("query"));
    render(
        QUERY,
        &[
            ("domain_description", &bundle.annotations.description),
            ("examples", &examples),
            ("current_state", final_state.trim()),
            ("question", question.trim()),
            ("answer_format", &answer_format_text(format)),
        ],
    )
}

pub fn zero_shot(bundle: &DomainBundle, problem: &str, format: &AnswerFormat, cot: bool) -> String {
    let base = render(
        ZERO_SHOT,
        &[
            ("domain_description", &bundle.annotations.description),
            ("question", problem.trim()),
            ("answer_format", &answer_format_text(format)),
        ],
    );
    if cot {
        format!("{base}\n{}", COT_SUFFIX.trim())
    } else {
        base
    }
}

/// `None` when the domain has fewer than two worked examples.
pub fn two_shot_cot(bundle: &DomainBundle, problem: &str, format: &AnswerFormat) -> Option<String> {
    let shots = bundle.examples.for_stage("two_shot");
    if shots.len() < 2 {
        return None;
    }
    Some(render(
        TWO_SHOT_COT,
        &[
            ("domain_description", &bundle.annotations.description),
            ("examples", &examples_block(&shots[..2])),
            ("question", problem.trim()),
            ("answer_format", &answer_format_text(format)),
        ],
    ))
}

/// Text between `header` (its last occurrence) and the next section
/// header or closing marker.
pub fn section<'a>(prompt: &'a str, header: &str) -> Option<&'a str> {
    let start = prompt.rfind(header)? + header.len();
    let rest = &prompt[start..];
    let end = [
        "\n[END PROBLEM]",
        "\n[END ACTION]",
        "\n[END QUESTION]",
        "\n[ACTION]:",
        "\n[QUESTION]:",
        "\n[EXAMPLES]:",
        "\n----------",
    ]
    .iter()
    .filter_map(|m| rest.find(m))
    .min()
    .unwrap_or(rest.len());
    Some(rest[..end].trim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::Registry;

    #[test]
    fn templates_start_with_task_lines() {
        for (tpl, task) in [
            (EXTRACT_STATE, TASK_EXTRACT_STATE),
            (EXTRACT_ACTIONS, TASK_EXTRACT_ACTIONS),
            (EXTRACT_QUESTION, TASK_EXTRACT_QUESTION),
            (CHECK, TASK_CHECK),
            (PROGRESS, TASK_PROGRESS),
            (QUERY, TASK_QUERY),
            (ZERO_SHOT, TASK_ANSWER),
            (TWO_SHOT_COT, TASK_ANSWER),
        ] {
            assert_eq!(tpl.lines().next(), Some(task));
        }
    }

    #[test]
    fn fills_every_placeholder() {
        let reg = Registry::builtin();
        let bw = reg.get_str("blocksworld").unwrap();
        let fmt = AnswerFormat::Bool;
        let prompts = [
            extract_state(bw, "P", PipelineMode::Structured),
            extract_actions(bw, "P"),
            extract_question(bw, "P", PipelineMode::Nl),
            check(bw, "S", "A"),
            progress(bw, "S", "A", PipelineMode::Nl),
            query(bw, "S", "Q", &fmt),
            zero_shot(bw, "P", &fmt, true),
            two_shot_cot(bw, "P", &fmt).unwrap(),
        ];
        for p in &prompts {
            assert!(
                !p.contains("{question}") && !p.contains("{examples}"),
                "{p}"
            );
        }
        assert!(prompts[6].ends_with("Let's think step by step."));
        assert!(prompts[0].contains(STATE_FORMAT_STRUCTURED));
    }

    #[test]
    fn section_takes_the_last_occurrence() {
        let reg = Registry::builtin();
        let bw = reg.get_str("blocksworld").unwrap();
        let p = check(bw, "A: clear.", "Pick up a from the table.");
        assert_eq!(section(&p, "[CURRENT STATE]:"), Some("A: clear."));
        assert_eq!(section(&p, "[ACTION]:"), Some("Pick up a from the table."));
        let q = extract_actions(bw, "Some problem.");
        assert_eq!(section(&q, "[PROBLEM]:"), Some("Some problem."));
    }

    #[test]
    fn grippers_has_no_two_shot_examples() {
        let reg = Registry::builtin();
        assert!(two_shot_cot(reg.get_str("grippers").unwrap(), "P", &AnswerFormat::Bool).is_none());
    }
}
