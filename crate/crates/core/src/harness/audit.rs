use serde::Serialize;
use thiserror::Error;

use crate::query::{Answer, Evidence};
use crate::registry::Registry;

use super::Instance;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditEntry {
    pub question_id: String,
    pub domain: String,
    pub gold: Answer,
    pub oracle: Answer,
    pub flagged: bool,
    pub evidence: Evidence,
    /// Readable account of the evidence.
    pub explanation: String,
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("instance {0} has no structured block")]
    Unauditable(String),
    #[error("instance {id}: {message}")]
    Invalid { id: String, message: String },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AuditReport {
    pub entries: Vec<AuditEntry>,
    /// Question ids without a structured block.
    pub unauditable: Vec<String>,
    /// Question ids whose structured block failed to ground.
    pub invalid: Vec<(String, String)>,
}

/// One line of the patch file. Applying it is left to the user.
#[derive(Debug, Clone, Serialize)]
struct PatchLine<'a> {
    question_id: &'a str,
    field: &'static str,
    old: Answer,
    new: Answer,
    evidence: &'a Evidence,
    explanation: &'a str,
}

impl AuditReport {
    pub fn flagged(&self) -> impl Iterator<Item = &AuditEntry> {
        self.entries.iter().filter(|e| e.flagged)
    }

    pub fn flagged_count(&self) -> usize {
        self.flagged().count()
    }

    pub fn patch_jsonl(&self) -> String {
        let lines: Vec<PatchLine<'_>> = self
            .flagged()
            .map(|e| PatchLine {
                question_id: &e.question_id,
                field: "answer",
                old: e.gold,
                new: e.oracle,
                evidence: &e.evidence,
                explanation: &e.explanation,
            })
            .collect();
        super::to_jsonl(&lines)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "audited {} instance(s), {} flagged, {} unauditable, {} invalid\n",
            self.entries.len(),
            self.flagged_count(),
            self.unauditable.len(),
            self.invalid.len()
        );
        for e in self.flagged() {
            out.push_str(&format!(
                "FLAG {} ({}): gold {} but oracle {}. {}\n",
                e.question_id, e.domain, e.gold, e.oracle, e.explanation
            ));
        }
        for (id, m) in &self.invalid {
            out.push_str(&format!("INVALID {id}: {m}\n"));
        }
        out
    }
}

fn explain(inst: &Instance, evidence: &Evidence, actions: &[String]) -> String {
    match evidence {
        Evidence::Failure { index, unsatisfied } => format!(
            "step {index} {} is not executable; unsatisfied: {}",
            actions.get(*index).map(String::as_str).unwrap_or("?"),
            unsatisfied.join(" ")
        ),
        Evidence::FailingLiterals { literals } => {
            format!("not holding at the end: {}", literals.join(", "))
        }
        Evidence::Rationale { text } => text.clone(),
        Evidence::None => format!("{} holds on the oracle trace", inst.question_category),
    }
}

pub fn audit_instance(inst: &Instance, registry: &Registry) -> Result<AuditEntry, AuditError> {
    let Some(block) = &inst.structured else {
        return Err(AuditError::Unauditable(inst.question_id.clone()));
    };
    let g = inst
        .ground(registry)
        .map_err(|message| AuditError::Invalid {
            id: inst.question_id.clone(),
            message,
        })?;
    let v = inst.oracle_verdict(&g);
    let explanation = explain(inst, &v.evidence, &block.actions);
    Ok(AuditEntry {
        question_id: inst.question_id.clone(),
        domain: inst.domain_name.clone(),
        gold: inst.answer,
        oracle: v.answer,
        flagged: v.answer != inst.answer,
        evidence: v.evidence,
        explanation,
    })
}

/// Compares every structured gold label with the oracle. Labels are never
/// changed here; see [`AuditReport::patch_jsonl`].
pub fn audit_labels(instances: &[Instance], registry: &Registry) -> AuditReport {
    let mut report = AuditReport::default();
    for inst in instances {
        match audit_instance(inst, registry) {
            Ok(e) => report.entries.push(e),
            Err(AuditError::Unauditable(id)) => report.unauditable.push(id),
            Err(AuditError::Invalid { id, message }) => report.invalid.push((id, message)),
        }
    }
    report
}
