use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Mutex;

use serde::Serialize;

use crate::pipeline::{
    run_method, BaselineRun, MethodKind, MethodOutcome, PipelineConfig, PipelineRun, Task,
};
use crate::query::Answer;
use crate::reasoner::{Reasoner, Transcript};
use crate::registry::Registry;

use super::Instance;

/// One answered (or failed) instance. Serialized as a run record line.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub question_id: String,
    pub domain: String,
    pub task: String,
    pub method: String,
    pub gold: Answer,
    /// Answer after mapping into the gold label space.
    pub predicted: Option<Answer>,
    pub correct: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<PipelineRun>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineRun>,
    /// Calls made by a failed run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_transcript: Option<Transcript>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellEntry {
    pub question_id: String,
    pub predicted: Option<Answer>,
    pub correct: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub correct: usize,
    pub incorrect: usize,
    pub method_errors: usize,
    pub total: usize,
    pub entries: Vec<CellEntry>,
}

impl Cell {
    pub fn accuracy(&self) -> String {
        format_accuracy(self.correct, self.total)
    }
}

/// Cells keyed by (method, domain, task).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResultsTable {
    pub cells: BTreeMap<(MethodKind, String, String), Cell>,
}

impl ResultsTable {
    pub fn record(&mut self, method: MethodKind, r: &RunRecord) {
        let cell = self
            .cells
            .entry((method, r.domain.clone(), r.task.clone()))
            .or_default();
        cell.total += 1;
        if r.error.is_some() {
            cell.method_errors += 1;
        } else if r.correct {
            cell.correct += 1;
        } else {
            cell.incorrect += 1;
        }
        cell.entries.push(CellEntry {
            question_id: r.question_id.clone(),
            predicted: r.predicted,
            correct: r.correct,
        });
    }

    pub fn merge(&mut self, other: ResultsTable) {
        for (key, cell) in other.cells {
            let into = self.cells.entry(key).or_default();
            into.correct += cell.correct;
            into.incorrect += cell.incorrect;
            into.method_errors += cell.method_errors;
            into.total += cell.total;
            into.entries.extend(cell.entries);
            into.entries
                .sort_by(|a, b| natural_cmp(&a.question_id, &b.question_id));
        }
    }

    pub fn get(&self, method: MethodKind, domain: &str, task: &str) -> Option<&Cell> {
        self.cells
            .get(&(method, domain.to_string(), task.to_string()))
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    fn columns(&self) -> Vec<(String, String)> {
        let cols: BTreeSet<(String, String)> = self
            .cells
            .keys()
            .map(|(_, d, t)| (d.clone(), t.clone()))
            .collect();
        cols.into_iter().collect()
    }

    fn methods(&self) -> Vec<MethodKind> {
        let ms: BTreeSet<MethodKind> = self.cells.keys().map(|(m, _, _)| *m).collect();
        ms.into_iter().collect()
    }
}

/// `100 * correct / total` in hundredths, rounded half up.
pub fn accuracy_hundredths(correct: usize, total: usize) -> u64 {
    assert!(total > 0, "accuracy of an empty cell");
    let (c, t) = (correct as u64, total as u64);
    (20000 * c + t) / (2 * t)
}

pub fn format_accuracy(correct: usize, total: usize) -> String {
    if total == 0 {
        return "-".into();
    }
    let h = accuracy_hundredths(correct, total);
    format!("{}.{:02}", h / 100, h % 100)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

impl FromStr for TableFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(TableFormat::Markdown),
            "csv" => Ok(TableFormat::Csv),
            other => Err(format!("unknown table format `{other}`")),
        }
    }
}

/// Methods as rows, `domain/task` as columns.
pub fn emit_table(t: &ResultsTable, format: TableFormat) -> String {
    let columns = t.columns();
    let mut header = vec!["method".to_string()];
    header.extend(columns.iter().map(|(d, task)| format!("{d}/{task}")));
    let rows: Vec<Vec<String>> = t
        .methods()
        .into_iter()
        .map(|m| {
            let mut row = vec![m.to_string()];
            for (d, task) in &columns {
                row.push(
                    t.get(m, d, task)
                        .map_or_else(|| "-".to_string(), Cell::accuracy),
                );
            }
            row
        })
        .collect();
    match format {
        TableFormat::Markdown => {
            let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
            let mut out = line(&header);
            out.push_str(&line(&vec!["---".to_string(); header.len()]));
            for row in &rows {
                out.push_str(&line(row));
            }
            out
        }
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header).expect("in-memory write");
            for row in &rows {
                w.write_record(row).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv of utf-8 cells")
        }
    }
}

/// Numeric ids in numeric order, then the rest in string order.
fn natural_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOutput {
    pub table: ResultsTable,
    /// One record per instance, ordered by question id.
    pub records: Vec<RunRecord>,
}

impl SuiteOutput {
    pub fn method_errors(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }
}

pub fn run_one(
    inst: &Instance,
    method: MethodKind,
    cfg: &PipelineConfig,
    reasoner: &dyn Reasoner,
    registry: &Registry,
) -> RunRecord {
    let mut record = RunRecord {
        question_id: inst.question_id.clone(),
        domain: inst.domain_name.clone(),
        task: inst.task_label(),
        method: method.id().to_string(),
        gold: inst.answer,
        predicted: None,
        correct: false,
        error: None,
        pipeline: None,
        baseline: None,
        failed_transcript: None,
    };
    let kind = match inst.kind() {
        Ok(k) => k,
        Err(e) => {
            record.error = Some(e);
            return record;
        }
    };
    let Some(bundle) = registry.get_str(&inst.domain_name) else {
        record.error = Some(format!("domain `{}` is not registered", inst.domain_name));
        return record;
    };
    let problem = inst.problem_text();
    let format = inst.answer_format();
    let task = Task {
        bundle,
        problem: &problem,
        kind,
        format: &format,
    };
    match run_method(&task, method, cfg, reasoner) {
        Ok(outcome) => {
            let predicted = inst.project(outcome.verdict().answer);
            record.predicted = Some(predicted);
            record.correct = predicted == inst.answer;
            match outcome {
                MethodOutcome::ProRac(run) => record.pipeline = Some(run),
                MethodOutcome::Baseline(run) => record.baseline = Some(run),
            }
        }
        Err(failure) => {
            record.error = Some(failure.error.to_string());
            record.failed_transcript = Some(failure.transcript);
        }
    }
    record
}

/// Runs `method` over every instance with at most `parallelism` instances
/// in flight. Records come back ordered by question id.
pub fn run_suite(
    instances: &[Instance],
    method: MethodKind,
    cfg: &PipelineConfig,
    parallelism: usize,
    reasoner: &dyn Reasoner,
    registry: &Registry,
) -> SuiteOutput {
    let next = AtomicUsize::new(0);
    let done: Mutex<Vec<(usize, RunRecord)>> = Mutex::new(Vec::with_capacity(instances.len()));
    let workers = parallelism.clamp(1, instances.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, AtomicOrdering::Relaxed);
                let Some(inst) = instances.get(i) else {
                    break;
                };
                let r = run_one(inst, method, cfg, reasoner, registry);
                if let Some(e) = &r.error {
                    tracing::warn!(question_id = %r.question_id, method = method.id(), "method error: {e}");
                }
                done.lock().unwrap().push((i, r));
            });
        }
    });
    let mut records = done.into_inner().unwrap();
    records.sort_by(|(i, a), (j, b)| natural_cmp(&a.question_id, &b.question_id).then(i.cmp(j)));
    let records: Vec<RunRecord> = records.into_iter().map(|(_, r)| r).collect();
    let mut table = ResultsTable::default();
    for r in &records {
        table.record(method, r);
    }
    SuiteOutput { table, records }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(format_accuracy(2, 4), "50.00");
        assert_eq!(format_accuracy(40, 45), "88.89");
        assert_eq!(format_accuracy(1, 3), "33.33");
        assert_eq!(format_accuracy(2, 3), "66.67");
        assert_eq!(format_accuracy(1, 8), "12.50");
        assert_eq!(format_accuracy(1, 16), "6.25");
        assert_eq!(format_accuracy(1, 1600), "0.06");
        assert_eq!(format_accuracy(0, 0), "-");
    }

    fn rec(id: &str, correct: bool, error: bool) -> RunRecord {
        RunRecord {
            question_id: id.into(),
            domain: "blocksworld".into(),
            task: "projection".into(),
            method: "prorac".into(),
            gold: Answer::True,
            predicted: (!error).then_some(if correct { Answer::True } else { Answer::False }),
            correct,
            error: error.then(|| "boom".into()),
            pipeline: None,
            baseline: None,
            failed_transcript: None,
        }
    }

    #[test]
    fn tables() {
        let mut t = ResultsTable::default();
        assert_eq!(
            emit_table(&t, TableFormat::Markdown),
            "| method |\n| --- |\n"
        );
        assert_eq!(emit_table(&t, TableFormat::Csv), "method\n");
        for (id, c, e) in [
            ("1", true, false),
            ("2", false, false),
            ("3", true, false),
            ("4", false, true),
        ] {
            t.record(MethodKind::ProRac, &rec(id, c, e));
        }
        let cell = t
            .get(MethodKind::ProRac, "blocksworld", "projection")
            .unwrap();
        assert_eq!(
            (cell.correct, cell.incorrect, cell.method_errors, cell.total),
            (2, 1, 1, 4)
        );
        let md = emit_table(&t, TableFormat::Markdown);
        assert_eq!(md.lines().count(), 3);
        assert!(md.ends_with("| ProRAC | 50.00 |\n"), "{md}");
        let csv = emit_table(&t, TableFormat::Csv);
        assert_eq!(csv, "method,blocksworld/projection\nProRAC,50.00\n");
    }

    #[test]
    fn natural_order() {
        let mut ids = vec!["10", "b", "2", "a", "1"];
        ids.sort_by(|a, b| natural_cmp(a, b));
        assert_eq!(ids, ["1", "2", "10", "a", "b"]);
    }
}
