//! Parsing of reasoner outputs: final-answer lines, extractor paragraphs
//! and `STATE:` blocks.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use crate::query::Answer;

use super::AnswerFormat;

static FINAL_ANSWER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^[\s*_#>]*final\s+answer\s*[*_]*\s*:\s*(.*)$").unwrap());

/// The answer on the last `Final Answer:` line whose value fits `format`.
/// Lines with other values are skipped, so a quoted phrase earlier in the
/// reasoning never wins over the real answer.
pub fn parse_final_answer(text: &str, format: &AnswerFormat) -> Option<Answer> {
    text.lines().rev().find_map(|line| {
        let caps = FINAL_ANSWER.captures(line.trim())?;
        let value = caps[1]
            .trim()
            .trim_matches(|c: char| c == '*' || c == '_' || c == '"' || c == '\'' || c == '`')
            .trim_end_matches('.')
            .trim();
        accept(value, format)
    })
}

fn accept(value: &str, format: &AnswerFormat) -> Option<Answer> {
    match format {
        AnswerFormat::Bool => match value.parse::<Answer>().ok()? {
            a @ (Answer::True | Answer::False) => Some(a),
            _ => None,
        },
        AnswerFormat::ThreeWay => match value.parse::<Answer>().ok()? {
            a @ (Answer::Plan | Answer::Applicable | Answer::Invalid) => Some(a),
            _ => None,
        },
        AnswerFormat::Choice(letters) => {
            let token = value.trim_matches(|c: char| !c.is_ascii_alphanumeric());
            let token = token.split(|c: char| !c.is_ascii_alphanumeric()).next()?;
            let mut chars = token.chars();
            let c = chars.next()?.to_ascii_uppercase();
            (chars.next().is_none() && letters.contains(&c)).then_some(Answer::Choice(c))
        }
    }
}

/// Everything before the last final-answer line.
pub fn rationale(text: &str) -> String {
    let lines: Vec<&str> = text.lines().collect();
    let cut = lines
        .iter()
        .rposition(|l| FINAL_ANSWER.is_match(l.trim()))
        .unwrap_or(lines.len());
    lines[..cut].join("\n").trim().to_string()
}

/// Reason the text breaks the plain-text contract, if it does.
pub fn markdown_violation(text: &str) -> Option<String> {
    for line in text.lines().map(str::trim) {
        if line.starts_with('#') || line.starts_with("```") {
            return Some(format!("markdown line `{line}`"));
        }
        if line.starts_with("* ") || line.starts_with("- ") || line.starts_with("+ ") {
            return Some(format!("list item `{line}`"));
        }
        if line.contains("**") || line.contains("__") {
            return Some(format!("emphasis in `{line}`"));
        }
    }
    None
}

fn non_empty_lines(text: &str) -> Vec<&str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect()
}

/// The last non-empty line.
pub fn last_line(text: &str) -> Option<&str> {
    non_empty_lines(text).pop()
}

/// Value of the last line starting with `label` (e.g. `STATE:`).
pub fn labeled_line<'a>(text: &'a str, label: &str) -> Option<&'a str> {
    text.lines()
        .rev()
        .map(str::trim)
        .find_map(|l| l.strip_prefix(label))
        .map(str::trim)
}

/// Splits the action extractor's single paragraph into sentences. `None.`
/// is the empty plan.
pub fn action_sentences(text: &str) -> Result<Vec<String>, String> {
    if let Some(v) = markdown_violation(text) {
        return Err(v);
    }
    let lines = non_empty_lines(text);
    let paragraph = match lines.as_slice() {
        [] => return Err("empty response".into()),
        [one] => *one,
        more => return Err(format!("expected one paragraph, got {} lines", more.len())),
    };
    if paragraph
        .trim_end_matches('.')
        .trim()
        .eq_ignore_ascii_case("none")
    {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for sentence in paragraph
        .split('.')
        .map(str::trim)
        .filter(|s| !s.is_empty())
    {
        if sentence.contains(',') {
            return Err(format!("sentence contains a comma: `{sentence}`"));
        }
        out.push(format!("{sentence}."));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QuestionParts {
    pub sentence: String,
    /// Raw literal list after `QUERY:`.
    pub query: Option<String>,
    /// Raw literal lists after `CHOICE X:`.
    pub choices: BTreeMap<char, String>,
}

static CHOICE_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^choice\s+([a-z])\s*:\s*(.*)$").unwrap());

/// Parses the question extractor's paragraph plus optional `QUERY:` and
/// `CHOICE X:` lines.
pub fn question_parts(text: &str) -> Result<QuestionParts, String> {
    if let Some(v) = markdown_violation(text) {
        return Err(v);
    }
    let mut parts = QuestionParts::default();
    let mut sentences = Vec::new();
    for line in non_empty_lines(text) {
        if let Some(rest) = line.strip_prefix("QUERY:") {
            parts.query = Some(rest.trim().to_string());
        } else if let Some(caps) = CHOICE_LINE.captures(line) {
            let letter = caps[1].chars().next().unwrap().to_ascii_uppercase();
            parts.choices.insert(letter, caps[2].trim().to_string());
        } else {
            sentences.push(line);
        }
    }
    match sentences.as_slice() {
        [one] => parts.sentence = one.to_string(),
        [] => return Err("no question paragraph".into()),
        more => return Err(format!("expected one paragraph, got {} lines", more.len())),
    }
    Ok(parts)
}

/// Majority vote; ties go to the lexicographically smallest normalized
/// answer. Unparsed samples (`None`) do not vote.
pub fn vote(samples: &[Option<Answer>]) -> Option<Answer> {
    let mut counts: BTreeMap<String, (usize, Answer)> = BTreeMap::new();
    for a in samples.iter().flatten() {
        counts.entry(a.normalized()).or_insert((0, *a)).0 += 1;
    }
    let mut best: Option<(usize, Answer)> = None;
    // ascending key order: a later entry must strictly beat the count
    for (count, answer) in counts.into_values() {
        if best.is_none_or(|(c, _)| count > c) {
            best = Some((count, answer));
        }
    }
    best.map(|(_, a)| a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn takes_last_final_answer_line() {
        let text = "I will end with \"Final Answer: True\" once done.\nFinal Answer: maybe\nreasoning\nFinal Answer: False.";
        assert_eq!(
            parse_final_answer(text, &AnswerFormat::Bool),
            Some(Answer::False)
        );
        let quoted = "Final Answer: True\nThe template says Final Answer: <value>";
        assert_eq!(
            parse_final_answer(quoted, &AnswerFormat::Bool),
            Some(Answer::True)
        );
        assert_eq!(
            parse_final_answer("final answer:   TRUE", &AnswerFormat::Bool),
            Some(Answer::True)
        );
        assert_eq!(
            parse_final_answer("**Final Answer:** False", &AnswerFormat::Bool),
            Some(Answer::False)
        );
        assert_eq!(
            parse_final_answer("The answer is true.", &AnswerFormat::Bool),
            None
        );
    }

    #[test]
    fn three_way_and_choice() {
        assert_eq!(
            parse_final_answer("Final Answer: Invalid", &AnswerFormat::ThreeWay),
            Some(Answer::Invalid)
        );
        assert_eq!(
            parse_final_answer("Final Answer: True", &AnswerFormat::ThreeWay),
            None
        );
        let abc = AnswerFormat::Choice(vec!['A', 'B', 'C']);
        assert_eq!(
            parse_final_answer("Final Answer: B", &abc),
            Some(Answer::Choice('B'))
        );
        assert_eq!(
            parse_final_answer("Final Answer: (c)", &abc),
            Some(Answer::Choice('C'))
        );
        assert_eq!(parse_final_answer("Final Answer: D", &abc), None);
        assert_eq!(parse_final_answer("Final Answer: Both", &abc), None);
    }

    #[test]
    fn rationale_drops_the_answer_line() {
        assert_eq!(rationale("x holds.\nFinal Answer: True"), "x holds.");
        assert_eq!(rationale("no answer"), "no answer");
    }

    #[test]
    fn action_paragraphs() {
        assert_eq!(
            action_sentences("Pick up a from the table. Stack a on top of b.").unwrap(),
            vec!["Pick up a from the table.", "Stack a on top of b."]
        );
        assert!(action_sentences("None.").unwrap().is_empty());
        assert!(action_sentences("Pick up a, then stack it.").is_err());
        assert!(action_sentences("Pick up a.\n\nStack a on top of b.").is_err());
        assert!(action_sentences("**Actions:** Pick up a.").is_err());
        assert!(action_sentences("- Pick up a.").is_err());
    }

    #[test]
    fn question_lines() {
        let p =
            question_parts("Is a on b?\nQUERY: (on a b)\nCHOICE A: (clear a)\nchoice b: (clear b)")
                .unwrap();
        assert_eq!(p.sentence, "Is a on b?");
        assert_eq!(p.query.as_deref(), Some("(on a b)"));
        assert_eq!(p.choices.len(), 2);
        assert_eq!(p.choices[&'B'], "(clear b)");
        assert!(question_parts("Is a on b?\nAnd is b clear?").is_err());
    }

    #[test]
    fn labeled_lines() {
        let text = "A: clear.\nSTATE: (clear a)\nmore\nSTATE: (clear b)";
        assert_eq!(labeled_line(text, "STATE:"), Some("(clear b)"));
        assert_eq!(labeled_line(text, "OBJECTS:"), None);
        assert_eq!(last_line("a\n\nb\n  \n"), Some("b"));
    }

    #[test]
    fn vote_examples() {
        use Answer::*;
        let t = |b: bool| Some(Answer::from_bool(b));
        assert_eq!(
            vote(&[t(true), t(true), t(false), t(true), t(false)]),
            Some(True)
        );
        assert_eq!(
            vote(&[
                Some(Choice('A')),
                Some(Choice('A')),
                Some(Choice('B')),
                Some(Choice('B')),
                None
            ]),
            Some(Choice('A'))
        );
        assert_eq!(
            vote(&[Some(Choice('B')), Some(Choice('A'))]),
            Some(Choice('A'))
        );
        // "false" sorts before "true"
        assert_eq!(vote(&[t(true), t(false), None, None, None]), Some(False));
        assert_eq!(vote(&[None, None]), None);
    }
}
