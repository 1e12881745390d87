//! Reasoner that reads pipeline prompts back, answers them with the
//! progression engine, and writes the answer in the textual contract the
//! pipeline parses. Optional faults make it wrong in controlled ways.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::domain::{parse_literals_text, parse_state_text, GroundAction, Objects};
use crate::engine::{apply_effects, is_applicable};
use crate::model::{literal_holds, Literal, Name, State};
use crate::pipeline::parse::{labeled_line, question_parts};
use crate::pipeline::prompts::{self, section};
use crate::pipeline::{literals_nl, question_block, PipelineMode};
use crate::query::Answer;
use crate::registry::{DomainBundle, Registry};

use super::{Completion, Reasoner, ReasonerError, ReasonerRequest};

type Choices = BTreeMap<char, BTreeSet<Literal>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultKind {
    /// Report the opposite executability verdict.
    FlipExecutability,
    /// Add a fluent the action does not touch.
    MutateUnrelatedFluent,
    /// Leave out one add effect (or keep one deleted fluent).
    DropEffect,
    /// Forget the first fluent of the initial state.
    CorruptExtraction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fault {
    pub kind: FaultKind,
    /// Canonical action term the fault applies to; `None` means every step.
    pub target: Option<String>,
}

impl Fault {
    pub fn everywhere(kind: FaultKind) -> Self {
        Fault { kind, target: None }
    }

    pub fn at(kind: FaultKind, action: &GroundAction) -> Self {
        Fault {
            kind,
            target: Some(action.canonical()),
        }
    }

    fn hits(&self, action: &GroundAction) -> bool {
        self.target
            .as_deref()
            .is_none_or(|t| t == action.canonical())
    }
}

/// Everything the mock knows about one question.
#[derive(Debug, Clone)]
pub struct MockProblem {
    pub domain: Name,
    pub problem_text: String,
    pub objects: Objects,
    pub init: State,
    pub actions: Vec<GroundAction>,
    /// The interrogative sentence the question extractor returns.
    pub question_sentence: String,
    pub query: BTreeSet<Literal>,
    pub choices: BTreeMap<char, BTreeSet<Literal>>,
    /// Oracle answer in the question's own format, used for baselines.
    pub oracle_answer: Answer,
}

pub struct SymbolicMock {
    registry: Registry,
    problems: Vec<MockProblem>,
    by_text: HashMap<String, usize>,
    faults: Vec<Fault>,
}

fn key(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn unreadable(m: impl Into<String>) -> ReasonerError {
    ReasonerError::MockUnparseablePrompt(m.into())
}

impl SymbolicMock {
    pub fn new(registry: Registry) -> Self {
        SymbolicMock {
            registry,
            problems: Vec::new(),
            by_text: HashMap::new(),
            faults: Vec::new(),
        }
    }

    pub fn add_problem(&mut self, problem: MockProblem) {
        self.by_text
            .insert(key(&problem.problem_text), self.problems.len());
        self.problems.push(problem);
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.faults.push(fault);
        self
    }

    pub fn problems(&self) -> &[MockProblem] {
        &self.problems
    }

    fn fault(&self, kind: FaultKind, action: Option<&GroundAction>) -> bool {
        self.faults
            .iter()
            .any(|f| f.kind == kind && action.is_none_or(|a| f.hits(a)))
    }

    fn lookup(&self, prompt: &str) -> Result<(&MockProblem, &DomainBundle), ReasonerError> {
        let text =
            section(prompt, "[PROBLEM]:").ok_or_else(|| unreadable("no [PROBLEM] section"))?;
        let p = self
            .by_text
            .get(&key(text))
            .map(|&i| &self.problems[i])
            .ok_or_else(|| unreadable(format!("unknown problem text: {}", truncate(text))))?;
        let bundle = self
            .registry
            .get(&p.domain)
            .ok_or_else(|| unreadable(format!("domain `{}` is not registered", p.domain)))?;
        Ok((p, bundle))
    }

    fn bundle_for(&self, prompt: &str) -> Result<&DomainBundle, ReasonerError> {
        self.registry
            .names()
            .filter_map(|n| self.registry.get(n))
            .find(|b| prompt.contains(b.annotations.description.trim()))
            .ok_or_else(|| unreadable("no registered domain description in prompt"))
    }

    /// Objects of a known problem whose names are exactly `names`.
    fn objects_named(
        &self,
        domain: &Name,
        names: &BTreeSet<Name>,
    ) -> Result<Objects, ReasonerError> {
        self.problems
            .iter()
            .filter(|p| &p.domain == domain)
            .map(|p| &p.objects)
            .find(|o| o.names().cloned().collect::<BTreeSet<_>>() == *names)
            .cloned()
            .ok_or_else(|| unreadable("state mentions an unknown set of objects"))
    }

    /// Reads a state section in either structured or object-grouped form.
    fn read_state(
        &self,
        bundle: &DomainBundle,
        text: &str,
    ) -> Result<(Objects, State), ReasonerError> {
        let domain = &bundle.domain;
        if let (Some(obj), Some(st)) =
            (labeled_line(text, "OBJECTS:"), labeled_line(text, "STATE:"))
        {
            let objects =
                Objects::parse_listing(obj, domain).map_err(|e| unreadable(e.to_string()))?;
            let state =
                parse_state_text(st, domain, &objects).map_err(|e| unreadable(e.to_string()))?;
            return Ok((objects, state));
        }
        let mut names = BTreeSet::new();
        for sentence in text.split('.') {
            if let Some((subject, _)) = sentence.split_once(':') {
                let subject = subject.trim();
                if !subject.eq_ignore_ascii_case("world") {
                    names.insert(Name::new(subject).map_err(|e| unreadable(e.to_string()))?);
                }
            }
        }
        let objects = self.objects_named(&domain.name, &names)?;
        let state = bundle
            .annotations
            .parse_state_nl(text, domain, &objects)
            .map_err(|e| unreadable(e.to_string()))?;
        Ok((objects, state))
    }

    fn read_step(
        &self,
        prompt: &str,
    ) -> Result<(&DomainBundle, Objects, State, GroundAction), ReasonerError> {
        let bundle = self.bundle_for(prompt)?;
        let state_text =
            section(prompt, "[CURRENT STATE]:").ok_or_else(|| unreadable("no [CURRENT STATE]"))?;
        let action_text = section(prompt, "[ACTION]:").ok_or_else(|| unreadable("no [ACTION]"))?;
        let (objects, state) = self.read_state(bundle, state_text)?;
        let action = bundle
            .annotations
            .parse_action_nl(action_text, &bundle.domain, &objects)
            .map_err(|e| unreadable(e.to_string()))?;
        Ok((bundle, objects, state, action))
    }

    fn answer(&self, prompt: &str) -> Result<String, ReasonerError> {
        let task = prompt.lines().next().unwrap_or_default().trim();
        match task {
            prompts::TASK_EXTRACT_STATE => self.extract_state(prompt),
            prompts::TASK_EXTRACT_ACTIONS => self.extract_actions(prompt),
            prompts::TASK_EXTRACT_QUESTION => self.extract_question(prompt),
            prompts::TASK_CHECK => self.check(prompt),
            prompts::TASK_PROGRESS => self.progress(prompt),
            prompts::TASK_QUERY => self.query(prompt),
            prompts::TASK_ANSWER => self.answer_whole(prompt),
            other => Err(unreadable(format!("unknown task line `{other}`"))),
        }
    }

    fn extract_state(&self, prompt: &str) -> Result<String, ReasonerError> {
        let (p, bundle) = self.lookup(prompt)?;
        let mut init = p.init.clone();
        if self.fault(FaultKind::CorruptExtraction, None) {
            let first = init.iter().next().cloned();
            if let Some(first) = first {
                init.remove(&first);
            }
        }
        let names: Vec<String> = p.objects.names().map(ToString::to_string).collect();
        let nl = bundle
            .annotations
            .render_state_nl(&init, &bundle.domain, &p.objects)
            .map_err(|e| unreadable(e.to_string()))?;
        let mut out = format!(
            "The objects mentioned in the initial state are {}.\n{nl}",
            names.join(" ")
        );
        if prompt.contains(prompts::STATE_FORMAT_STRUCTURED) {
            out.push_str(&format!(
                "\nOBJECTS: {}\nSTATE: {}",
                p.objects,
                init.canonical()
            ));
        }
        Ok(out)
    }

    fn extract_actions(&self, prompt: &str) -> Result<String, ReasonerError> {
        let (p, bundle) = self.lookup(prompt)?;
        if p.actions.is_empty() {
            return Ok("None.".into());
        }
        let sentences: Result<Vec<String>, ReasonerError> = p
            .actions
            .iter()
            .map(|a| {
                crate::pipeline::action_sentence(&bundle.annotations, &bundle.domain, a)
                    .map_err(unreadable)
            })
            .collect();
        Ok(sentences?.join(" "))
    }

    fn extract_question(&self, prompt: &str) -> Result<String, ReasonerError> {
        let (p, bundle) = self.lookup(prompt)?;
        let mode = if prompt.contains(prompts::QUESTION_FORMAT_STRUCTURED) {
            PipelineMode::Structured
        } else {
            PipelineMode::Nl
        };
        question_block(
            &bundle.annotations,
            &bundle.domain,
            &p.question_sentence,
            &p.query,
            &p.choices,
            mode,
        )
        .map_err(unreadable)
    }

    fn literals_nl(
        &self,
        bundle: &DomainBundle,
        lits: &BTreeSet<Literal>,
    ) -> Result<String, ReasonerError> {
        literals_nl(&bundle.annotations, &bundle.domain, lits).map_err(unreadable)
    }

    fn parse_literals_nl(
        &self,
        bundle: &DomainBundle,
        objects: &Objects,
        text: &str,
    ) -> Result<BTreeSet<Literal>, ReasonerError> {
        let mut out = BTreeSet::new();
        for item in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (positive, body) = match item.strip_prefix("not ") {
                Some(rest) => (false, rest),
                None => (true, item),
            };
            let fluent = bundle
                .annotations
                .parse_fluent_nl(body, &bundle.domain, objects)
                .map_err(|e| unreadable(e.to_string()))?;
            out.insert(Literal::new(fluent, positive));
        }
        Ok(out)
    }

    fn check(&self, prompt: &str) -> Result<String, ReasonerError> {
        let (bundle, _, state, action) = self.read_step(prompt)?;
        let result = is_applicable(&state, &action);
        let mut executable = result.applicable;
        if self.fault(FaultKind::FlipExecutability, Some(&action)) {
            executable = !executable;
        }
        let pre: Vec<String> = action
            .precondition
            .iter()
            .map(ToString::to_string)
            .collect();
        let mut out = format!(
            "The action {action} requires {}.",
            if pre.is_empty() {
                "nothing".into()
            } else {
                pre.join(" ")
            }
        );
        if result.unsatisfied.is_empty() {
            out.push_str(" Every precondition holds in the current state.");
        } else {
            let missing = self.literals_nl(bundle, &result.unsatisfied)?;
            out.push_str(&format!(" These do not hold: {missing}."));
        }
        out.push_str(if executable {
            "\nFinal Answer: True"
        } else {
            "\nFinal Answer: False"
        });
        Ok(out)
    }

    fn progress(&self, prompt: &str) -> Result<String, ReasonerError> {
        let (bundle, objects, state, action) = self.read_step(prompt)?;
        let domain = &bundle.domain;
        let mut next = apply_effects(&state, &action);
        if self.fault(FaultKind::MutateUnrelatedFluent, Some(&action)) {
            if let Some(extra) = domain
                .all_fluents(&objects)
                .into_iter()
                .find(|f| !next.contains(f) && !action.add.contains(f) && !action.del.contains(f))
            {
                next.insert(extra);
            }
        }
        if self.fault(FaultKind::DropEffect, Some(&action)) {
            drop_effect(&state, &action, &mut next);
        }
        let nl = bundle
            .annotations
            .render_state_nl(&next, domain, &objects)
            .map_err(|e| unreadable(e.to_string()))?;
        let mut out = format!("Executing {action} changes only the objects it mentions.\n{nl}");
        if prompt.contains(prompts::PROGRESS_FORMAT_STRUCTURED) {
            out.push_str(&format!("\nSTATE: {}", next.canonical()));
        }
        Ok(out)
    }

    fn query(&self, prompt: &str) -> Result<String, ReasonerError> {
        let bundle = self.bundle_for(prompt)?;
        let state_text =
            section(prompt, "[FINAL STATE]:").ok_or_else(|| unreadable("no [FINAL STATE]"))?;
        let question = section(prompt, "[QUESTION]:").ok_or_else(|| unreadable("no [QUESTION]"))?;
        let (objects, state) = self.read_state(bundle, state_text)?;
        let parts = question_parts(question).map_err(unreadable)?;
        let (query, choices) = if parts.query.is_some() || !parts.choices.is_empty() {
            let parse = |t: &str| {
                parse_literals_text(t, &bundle.domain, &objects)
                    .map_err(|e| unreadable(e.to_string()))
            };
            let query = parts
                .query
                .as_deref()
                .map(parse)
                .transpose()?
                .unwrap_or_default();
            let mut choices = BTreeMap::new();
            for (letter, text) in &parts.choices {
                choices.insert(*letter, parse(text)?);
            }
            (query, choices)
        } else {
            self.nl_question(bundle, &objects, &parts.sentence)?
        };
        let holds = |lits: &BTreeSet<Literal>| lits.iter().all(|l| literal_holds(&state, l));
        if !choices.is_empty() {
            let letter = choices.iter().find(|(_, l)| holds(l)).map(|(c, _)| *c);
            return Ok(match letter {
                Some(c) => {
                    format!("Option {c} is the one whose propositions all hold.\nFinal Answer: {c}")
                }
                None => "No option holds in the final state.\nFinal Answer: none".into(),
            });
        }
        let failing: BTreeSet<Literal> = query
            .iter()
            .filter(|l| !literal_holds(&state, l))
            .cloned()
            .collect();
        Ok(if failing.is_empty() {
            "Every proposition holds in the final state.\nFinal Answer: True".into()
        } else {
            format!(
                "These propositions do not hold: {}.\nFinal Answer: False",
                self.literals_nl(bundle, &failing)?
            )
        })
    }

    /// Reads `Propositions: ...` and `Choice X: ...` from an nl-mode question.
    fn nl_question(
        &self,
        bundle: &DomainBundle,
        objects: &Objects,
        sentence: &str,
    ) -> Result<(BTreeSet<Literal>, Choices), ReasonerError> {
        let mut query = BTreeSet::new();
        let mut choices = BTreeMap::new();
        if let Some(i) = sentence.find("Propositions:") {
            let rest = &sentence[i + "Propositions:".len()..];
            let end = rest.find('.').unwrap_or(rest.len());
            query = self.parse_literals_nl(bundle, objects, &rest[..end])?;
        }
        let mut rest = sentence;
        while let Some(i) = rest.find("Choice ") {
            let after = &rest[i + "Choice ".len()..];
            let letter = after
                .chars()
                .next()
                .ok_or_else(|| unreadable("dangling choice"))?;
            let body = after[1..].trim_start_matches(':');
            let end = body.find('.').unwrap_or(body.len());
            choices.insert(
                letter.to_ascii_uppercase(),
                self.parse_literals_nl(bundle, objects, &body[..end])?,
            );
            rest = &body[end..];
        }
        Ok((query, choices))
    }

    fn answer_whole(&self, prompt: &str) -> Result<String, ReasonerError> {
        let (p, _) = self.lookup(prompt)?;
        let word = match p.oracle_answer {
            Answer::True => "True".to_string(),
            Answer::False => "False".to_string(),
            other => other.to_string(),
        };
        Ok(format!(
            "Tracking the state through every action gives the answer.\nFinal Answer: {word}"
        ))
    }
}

fn drop_effect(before: &State, action: &GroundAction, next: &mut State) {
    if let Some(add) = action.add.iter().find(|f| !before.contains(f)) {
        next.remove(add);
    } else if let Some(del) = action.del.iter().find(|f| before.contains(f)) {
        next.insert(del.clone());
    }
}

fn truncate(text: &str) -> String {
    let t: String = text.chars().take(60).collect();
    if t.len() < text.len() {
        format!("{t}...")
    } else {
        t
    }
}

impl Reasoner for SymbolicMock {
    fn complete(&self, req: &ReasonerRequest) -> Result<Completion, ReasonerError> {
        req.validate()?;
        let text = self.answer(&req.prompt_text())?;
        Ok(Completion {
            texts: vec![text; req.n as usize],
            latency_ms: 0,
            cached: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::parse_problem;
    use crate::fixtures;
    use crate::model::tests::f;
    use crate::pipeline::{prompts, PipelineMode};

    fn setup() -> (Registry, MockProblem) {
        let reg = Registry::builtin();
        let bw = reg.get_str("blocksworld").unwrap();
        let p = parse_problem(fixtures::BW_P01, &bw.domain).unwrap();
        let actions = ["(pickup a)", "(stack a b)"]
            .iter()
            .map(|t| bw.domain.ground_term(t, &p.objects).unwrap())
            .collect();
        let problem = MockProblem {
            domain: bw.domain.name.clone(),
            problem_text:
                "Blocks a and b are on the table. Pick up a and stack it on b. Is a on b?".into(),
            objects: p.objects,
            init: p.init,
            actions,
            question_sentence: "Is a on b?".into(),
            query: [f("on", &["a", "b"]).positive()].into_iter().collect(),
            choices: BTreeMap::new(),
            oracle_answer: Answer::True,
        };
        (reg, problem)
    }

    fn ask(mock: &SymbolicMock, prompt: String) -> String {
        let req = ReasonerRequest::single(prompt, "mock", 0.0, 100);
        mock.complete(&req).unwrap().texts.remove(0)
    }

    fn step_state(reg: &Registry, p: &MockProblem, s: &State) -> String {
        let bw = reg.get_str("blocksworld").unwrap();
        crate::pipeline::structured_state_text(&bw.annotations, &bw.domain, &p.objects, s).unwrap()
    }

    #[test]
    fn check_prompt_for_applicable_pickup() {
        let (reg, p) = setup();
        let bw = reg.get_str("blocksworld").unwrap().clone();
        let state = step_state(&reg, &p, &p.init);
        let mut mock = SymbolicMock::new(reg);
        mock.add_problem(p.clone());
        let out = ask(
            &mock,
            prompts::check(&bw, &state, "Pick up a from the table."),
        );
        assert!(out.ends_with("Final Answer: True"), "{out}");
        let out = ask(&mock, prompts::check(&bw, &state, "Unstack a from b."));
        assert!(out.ends_with("Final Answer: False"), "{out}");
    }

    #[test]
    fn progress_prompt_renders_oracle_state() {
        let (reg, p) = setup();
        let bw = reg.get_str("blocksworld").unwrap().clone();
        let state = step_state(&reg, &p, &p.init);
        let mut mock = SymbolicMock::new(reg);
        mock.add_problem(p.clone());
        let out = ask(
            &mock,
            prompts::progress(
                &bw,
                &state,
                "Pick up a from the table.",
                PipelineMode::Structured,
            ),
        );
        assert_eq!(
            labeled_line(&out, "STATE:"),
            Some("(clear b) (holding a) (ontable b)")
        );
        // the nl form carries the same state
        let out = ask(
            &mock,
            prompts::progress(&bw, &state, "Pick up a from the table.", PipelineMode::Nl),
        );
        assert_eq!(
            out.lines().last().unwrap(),
            "A: held by the hand. B: clear, on the table."
        );
    }

    #[test]
    fn mutate_fault_adds_an_untouched_fluent() {
        let (reg, p) = setup();
        let bw = reg.get_str("blocksworld").unwrap().clone();
        let state = step_state(&reg, &p, &p.init);
        let pickup = p.actions[0].clone();
        let mut mock =
            SymbolicMock::new(reg).with_fault(Fault::at(FaultKind::MutateUnrelatedFluent, &pickup));
        mock.add_problem(p.clone());
        let out = ask(
            &mock,
            prompts::progress(
                &bw,
                &state,
                "Pick up a from the table.",
                PipelineMode::Structured,
            ),
        );
        let got = parse_state_text(
            labeled_line(&out, "STATE:").unwrap(),
            &bw.domain,
            &p.objects,
        )
        .unwrap();
        let expected = apply_effects(&p.init, &pickup);
        let extra: Vec<_> = got.iter().filter(|f| !expected.contains(f)).collect();
        assert_eq!(extra.len(), 1);
        assert!(!pickup.add.contains(extra[0]) && !pickup.del.contains(extra[0]));
    }

    #[test]
    fn unknown_prompt_is_reported() {
        let (reg, _) = setup();
        let mock = SymbolicMock::new(reg);
        let req = ReasonerRequest::single("hello", "mock", 0.0, 10);
        assert!(matches!(
            mock.complete(&req),
            Err(ReasonerError::MockUnparseablePrompt(_))
        ));
    }
}
