//! STRIPS progression: applicability, effect application and traced
//! execution of action sequences.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::domain::GroundAction;
use crate::error::NotApplicable;
use crate::model::{literal_holds, Literal, State};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApplicabilityResult {
    pub applicable: bool,
    /// Precondition literals that do not hold.
    pub unsatisfied: BTreeSet<Literal>,
}

pub fn is_applicable(state: &State, action: &GroundAction) -> ApplicabilityResult {
    let unsatisfied: BTreeSet<Literal> = action
        .precondition
        .iter()
        .filter(|l| !literal_holds(state, l))
        .cloned()
        .collect();
    ApplicabilityResult {
        applicable: unsatisfied.is_empty(),
        unsatisfied,
    }
}

/// `(state \ del) ∪ add`, or `NotApplicable` when a precondition fails.
pub fn apply_action(state: &State, action: &GroundAction) -> Result<State, NotApplicable> {
    let check = is_applicable(state, action);
    if !check.applicable {
        return Err(NotApplicable {
            action: action.canonical(),
            unsatisfied: check.unsatisfied.into_iter().collect(),
        });
    }
    Ok(apply_effects(state, action))
}

/// Effect application without the precondition gate.
pub fn apply_effects(state: &State, action: &GroundAction) -> State {
    let mut next = state.clone();
    for f in &action.del {
        next.remove(f);
    }
    next.extend(action.add.iter().cloned());
    next
}

/// States S0..Sm visited while executing a sequence. Execution halts at
/// the first inapplicable action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub states: Vec<State>,
    /// The full input sequence, including actions after a failure.
    pub actions: Vec<GroundAction>,
    /// One entry per attempted action.
    pub checks: Vec<ApplicabilityResult>,
    pub failure_index: Option<usize>,
}

impl Trace {
    pub fn initial_state(&self) -> &State {
        &self.states[0]
    }

    /// Last reached state.
    pub fn final_state(&self) -> &State {
        self.states.last().expect("a trace always holds S0")
    }

    pub fn is_executable(&self) -> bool {
        self.failure_index.is_none()
    }

    /// Unsatisfied preconditions of the failing step, if any.
    pub fn failure(&self) -> Option<(usize, &BTreeSet<Literal>)> {
        self.failure_index.map(|i| (i, &self.checks[i].unsatisfied))
    }

    /// Line-oriented report: one canonical state per line, interleaved with
    /// `> action: ...` lines, ending with `! failed at i: ...` on failure.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for (i, state) in self.states.iter().enumerate() {
            let _ = writeln!(out, "{state}");
            if let Some(action) = self.actions.get(i).filter(|_| i < self.checks.len()) {
                let _ = writeln!(out, "> action: {action}");
            }
        }
        if let Some((i, unsatisfied)) = self.failure() {
            let lits: Vec<String> = unsatisfied.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "! failed at {i}: {}", lits.join(" "));
        }
        out
    }
}

pub fn progress(initial: &State, actions: &[GroundAction]) -> Trace {
    let mut states = vec![initial.clone()];
    let mut checks = Vec::with_capacity(actions.len());
    let mut failure_index = None;
    for (i, action) in actions.iter().enumerate() {
        let current = states.last().unwrap();
        let check = is_applicable(current, action);
        let ok = check.applicable;
        checks.push(check);
        if !ok {
            failure_index = Some(i);
            break;
        }
        let next = apply_effects(current, action);
        states.push(next);
    }
    Trace {
        states,
        actions: actions.to_vec(),
        checks,
        failure_index,
    }
}
