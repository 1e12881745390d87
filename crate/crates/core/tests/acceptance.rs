//! One test per acceptance criterion. Each prints a single PASS line with
//! the measured numbers; a failing criterion fails its test.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRng, TestRunner};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rac_core::domain::{parse_problem, parse_state_text, Domain, GroundAction, Objects};
use rac_core::engine::progress;
use rac_core::fixtures;
use rac_core::harness::{
    audit_labels, classify_error, emit_table, format_accuracy, mock_for, parse_instances,
    run_suite, to_jsonl, ErrorLabel, Instance, TableFormat,
};
use rac_core::model::State;
use rac_core::pipeline::parse::vote;
use rac_core::pipeline::{run_prorac, MethodKind, PipelineConfig, PipelineMode, Task};
use rac_core::query::{Answer, Evidence, QueryKind};
use rac_core::reasoner::{
    CachedReasoner, CountingReasoner, Fault, FaultKind, Reasoner, SymbolicMock,
};
use rac_core::registry::Registry;

/// Goes straight to stderr so the line shows up without `--nocapture`.
fn pass(n: u32, detail: String) {
    let _ = writeln!(std::io::stderr(), "criterion {n:>2}: PASS  {detail}");
}

fn consistent(reg: &Registry) -> Vec<Instance> {
    parse_instances(&fixtures::consistent_instances(), reg).unwrap()
}

fn mislabeled(reg: &Registry) -> Instance {
    parse_instances(fixtures::DEPOTS_MISLABELED_INSTANCE, reg)
        .unwrap()
        .remove(0)
}

/// (domain, objects, init) of every bundled problem.
fn worlds(reg: &Registry) -> Vec<(&Domain, Objects, State)> {
    fixtures::PROBLEMS
        .iter()
        .map(|(d, text)| {
            let domain = &reg.get_str(d).unwrap().domain;
            let p = parse_problem(text, domain).unwrap();
            (domain, p.objects, p.init)
        })
        .collect()
}

// Naive evaluator over sorted string states: substitutes schema templates
// itself and scans preconditions one literal at a time.
fn naive_subst(pred: &str, args: &[usize], binding: &[String]) -> String {
    let mut s = format!("({pred}");
    for &i in args {
        s.push(' ');
        s.push_str(&binding[i]);
    }
    s.push(')');
    s
}

fn naive_run(
    domain: &Domain,
    init: &State,
    terms: &[(String, Vec<String>)],
) -> (Vec<Vec<String>>, Option<usize>) {
    let mut state: Vec<String> = init.iter().map(ToString::to_string).collect();
    state.sort();
    let mut states = vec![state.clone()];
    for (i, (name, binding)) in terms.iter().enumerate() {
        let schema = domain
            .schemas
            .values()
            .find(|s| s.name.as_str() == name)
            .unwrap();
        for lit in &schema.precondition {
            let atom = naive_subst(lit.atom.predicate.as_str(), &lit.atom.args, binding);
            let present = state.contains(&atom);
            if present != lit.positive {
                return (states, Some(i));
            }
        }
        let dels: Vec<String> = schema
            .del
            .iter()
            .map(|a| naive_subst(a.predicate.as_str(), &a.args, binding))
            .collect();
        let adds: Vec<String> = schema
            .add
            .iter()
            .map(|a| naive_subst(a.predicate.as_str(), &a.args, binding))
            .collect();
        state.retain(|f| !dels.contains(f));
        for a in adds {
            if !state.contains(&a) {
                state.push(a);
            }
        }
        state.sort();
        states.push(state.clone());
    }
    (states, None)
}

/// Uniform over applicable actions without testing all of them.
fn random_applicable<'a>(
    rng: &mut ChaCha8Rng,
    all: &'a [GroundAction],
    state: &State,
) -> Option<&'a GroundAction> {
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.shuffle(rng);
    order
        .into_iter()
        .map(|i| &all[i])
        .find(|a| rac_core::engine::is_applicable(state, a).applicable)
}

fn random_sequence(
    rng: &mut ChaCha8Rng,
    domain: &Domain,
    objects: &Objects,
    init: &State,
    len: usize,
) -> Vec<GroundAction> {
    let all = domain.all_groundings(objects);
    let mut state = init.clone();
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        // mostly applicable steps so sequences get long, sometimes anything
        let pick = if rng.random_bool(0.9) {
            random_applicable(rng, &all, &state)
        } else {
            None
        };
        let a = pick.unwrap_or_else(|| all.choose(rng).unwrap()).clone();
        state = rac_core::engine::apply_effects(&state, &a);
        out.push(a);
    }
    out
}

#[test]
fn criterion_01_engine_matches_naive_evaluator() {
    let reg = Registry::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut sequences = 0;
    let mut mismatches = 0;
    let mut domains = BTreeSet::new();
    let mut lengths = BTreeSet::new();
    let mut failures = 0;
    let mut cases: Vec<(&Domain, State, Vec<GroundAction>)> = Vec::new();
    for (domain, objects, init) in worlds(&reg) {
        for len in 0..=19 {
            let seq = random_sequence(&mut rng, domain, &objects, &init, len);
            cases.push((domain, init.clone(), seq));
        }
    }
    let dep = &reg.get_str("depots").unwrap().domain;
    let p = parse_problem(fixtures::DEPOTS_HOIST, dep).unwrap();
    let plan: Vec<_> = fixtures::DEPOTS_HOIST_PLAN
        .iter()
        .map(|t| dep.ground_term(t, &p.objects).unwrap())
        .collect();
    cases.push((dep, p.init.clone(), plan));
    for inst in consistent(&reg) {
        let g = inst.ground(&reg).unwrap();
        cases.push((&reg.get(&g.domain).unwrap().domain, g.init, g.actions));
    }

    for (domain, init, seq) in &cases {
        let trace = progress(init, seq);
        let terms: Vec<(String, Vec<String>)> = seq
            .iter()
            .map(|a| {
                (
                    a.schema.to_string(),
                    a.args.iter().map(ToString::to_string).collect(),
                )
            })
            .collect();
        let (naive_states, naive_fail) = naive_run(domain, init, &terms);
        let engine_states: Vec<Vec<String>> = trace
            .states
            .iter()
            .map(|s| {
                let mut v: Vec<String> = s.iter().map(ToString::to_string).collect();
                v.sort();
                v
            })
            .collect();
        if engine_states != naive_states || trace.failure_index != naive_fail {
            mismatches += 1;
        }
        failures += usize::from(naive_fail.is_some());
        sequences += 1;
        domains.insert(domain.name.to_string());
        lengths.insert(seq.len());
    }
    assert!(domains.len() >= 3);
    assert!(sequences >= 60);
    assert_eq!(lengths, (0..=19).collect());
    assert!(failures > 0, "no failing sequences exercised");
    assert_eq!(mismatches, 0);
    pass(
        1,
        format!(
            "{sequences} sequences over {} domains, lengths 0-19, {failures} with a failing step, 0 mismatches",
            domains.len()
        ),
    );
}

#[test]
fn criterion_02_frame_and_effect_invariants() {
    let reg = Registry::builtin();
    let worlds = worlds(&reg);
    let steps = AtomicUsize::new(0);
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: 256,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    let strategy = (0..worlds.len(), any::<u64>(), 1usize..=19);
    runner
        .run(&strategy, |(w, seed, len)| {
            let (domain, objects, init) = &worlds[w];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let all = domain.all_groundings(objects);
            let mut state = init.clone();
            for _ in 0..len {
                let Some(a) = random_applicable(&mut rng, &all, &state) else {
                    break;
                };
                let next = rac_core::engine::apply_action(&state, a).unwrap();
                for f in state.iter().chain(next.iter()) {
                    let changed = state.contains(f) != next.contains(f);
                    prop_assert!(
                        !changed || a.add.contains(f) || a.del.contains(f),
                        "frame: {f} via {a}"
                    );
                }
                for f in &a.add {
                    prop_assert!(next.contains(f), "add {f} missing after {a}");
                }
                for f in &a.del {
                    prop_assert!(!next.contains(f), "del {f} present after {a}");
                }
                steps.fetch_add(1, Ordering::Relaxed);
                state = next;
            }
            Ok(())
        })
        .unwrap();
    let steps = steps.into_inner();
    assert!(steps >= 1000, "only {steps} steps checked");
    pass(
        2,
        format!("{steps} applicable steps over 256 random walks, 0 violations"),
    );
}

fn random_state(rng: &mut ChaCha8Rng, domain: &Domain, objects: &Objects) -> State {
    let all = domain.all_fluents(objects);
    let p = rng.random_range(0.0..0.6);
    all.into_iter().filter(|_| rng.random_bool(p)).collect()
}

#[test]
fn criterion_03_canonical_state_round_trip() {
    let reg = Registry::builtin();
    let mut fixture_states: Vec<(&Domain, Objects, State)> = Vec::new();
    for (domain, objects, init) in worlds(&reg) {
        fixture_states.push((domain, objects, init));
    }
    for inst in consistent(&reg).into_iter().chain([mislabeled(&reg)]) {
        let g = inst.ground(&reg).unwrap();
        let domain = &reg.get(&g.domain).unwrap().domain;
        for s in g.trace().states {
            fixture_states.push((domain, g.objects.clone(), s));
        }
    }
    for (domain, objects, s) in &fixture_states {
        assert_eq!(
            &parse_state_text(&s.canonical(), domain, objects).unwrap(),
            s
        );
    }
    let worlds = worlds(&reg);
    let random = AtomicUsize::new(0);
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: 500,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    runner
        .run(&(0..worlds.len(), any::<u64>()), |(w, seed)| {
            let (domain, objects, _) = &worlds[w];
            let s = random_state(&mut ChaCha8Rng::seed_from_u64(seed), domain, objects);
            let back = parse_state_text(&s.canonical(), domain, objects).unwrap();
            prop_assert_eq!(back, s);
            random.fetch_add(1, Ordering::Relaxed);
            Ok(())
        })
        .unwrap();
    let random = random.into_inner();
    assert!(random >= 500);
    pass(
        3,
        format!(
            "{} fixture states and {random} random states round-trip",
            fixture_states.len()
        ),
    );
}

fn task_kinds(insts: &[Instance]) -> BTreeSet<String> {
    insts
        .iter()
        .map(|i| match (i.kind().unwrap(), i.answer.normalized().len()) {
            (_, 1) => "mcq".to_string(),
            (QueryKind::Validation, _)
                if i.semantics() == rac_core::harness::ValidationSemantics::ThreeWay =>
            {
                "validation_three_way".to_string()
            }
            (k, _) => format!("{k:?}").to_lowercase(),
        })
        .collect()
}

#[test]
fn criterion_04_prorac_ceiling_with_symbolic_mock() {
    let reg = Registry::builtin();
    let mut insts = consistent(&reg);
    insts.push(mislabeled(&reg));
    let mock = mock_for(&reg, &insts).unwrap();
    let kinds = task_kinds(&insts);
    for k in [
        "projection",
        "executability",
        "planverification",
        "validation_three_way",
        "mcq",
    ] {
        assert!(kinds.contains(k), "no {k} instance in {kinds:?}");
    }
    let mut compared = 0;
    for mode in [PipelineMode::Structured, PipelineMode::Nl] {
        let cfg = PipelineConfig {
            mode,
            ..PipelineConfig::default()
        };
        let out = run_suite(&insts, MethodKind::ProRac, &cfg, 4, &mock, &reg);
        for (r, inst) in out.records.iter().zip(sorted(&insts)) {
            assert_eq!(r.question_id, inst.question_id);
            let oracle = inst.oracle_verdict(&inst.ground(&reg).unwrap()).answer;
            assert_eq!(
                r.predicted,
                Some(oracle),
                "{mode:?} {}: {:?}",
                r.question_id,
                r.error
            );
            compared += 1;
        }
    }
    pass(
        4,
        format!("{compared}/{compared} runs (both modes) equal the oracle; kinds {kinds:?}"),
    );
}

fn sorted(insts: &[Instance]) -> Vec<&Instance> {
    let mut v: Vec<&Instance> = insts.iter().collect();
    v.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    v
}

fn task_for<'a>(
    reg: &'a Registry,
    inst: &Instance,
    problem: &'a str,
    format: &'a rac_core::pipeline::AnswerFormat,
) -> Task<'a> {
    Task {
        bundle: reg.get_str(&inst.domain_name).unwrap(),
        problem,
        kind: inst.kind().unwrap(),
        format,
    }
}

#[test]
fn criterion_05_call_count_law() {
    let reg = Registry::builtin();
    let insts = consistent(&reg);
    let cfg = PipelineConfig::default();
    let mut clean = 0;
    for inst in &insts {
        let g = inst.ground(&reg).unwrap();
        if !g.trace().is_executable() {
            continue;
        }
        let mock = CountingReasoner::new(mock_for(&reg, std::slice::from_ref(inst)).unwrap());
        let problem = inst.problem_text();
        let format = inst.answer_format();
        let run = run_prorac(&task_for(&reg, inst, &problem, &format), &cfg, &mock).unwrap();
        let k = g.actions.len();
        assert_eq!(mock.calls(), 3 + 2 * k + 1, "{}", inst.question_id);
        assert_eq!(run.transcript.len(), mock.calls());
        clean += 1;
    }

    // crafted: the 8-step bw-07 plan with a genuinely inapplicable action
    // spliced in at every index
    let base = insts.iter().find(|i| i.question_id == "bw-07").unwrap();
    let g = base.ground(&reg).unwrap();
    let domain = &reg.get_str("blocksworld").unwrap().domain;
    let trace = g.trace();
    let mut crafted = 0;
    for i in 0..g.actions.len() {
        let bad = domain
            .all_groundings(&g.objects)
            .into_iter()
            .find(|a| !rac_core::engine::is_applicable(&trace.states[i], a).applicable)
            .unwrap();
        let mut inst = base.clone();
        inst.question_id = format!("crafted-{i}");
        inst.question_category = "action_executability".into();
        inst.answer = Answer::False;
        let block = inst.structured.as_mut().unwrap();
        block.actions[i] = bad.canonical();
        block.goal.clear();
        inst.question = format!(
            "{} Step {i} was replaced. Can the sequence be executed?",
            base.question
        );
        let mock = CountingReasoner::new(mock_for(&reg, std::slice::from_ref(&inst)).unwrap());
        let problem = inst.problem_text();
        let format = inst.answer_format();
        let run = run_prorac(&task_for(&reg, &inst, &problem, &format), &cfg, &mock).unwrap();
        assert_eq!(run.short_circuit_at(), Some(i));
        assert_eq!(mock.calls(), 3 + 2 * i + 1, "short-circuit at {i}");
        assert_eq!(run.answer.answer, Answer::False);
        crafted += 1;
    }

    // the reasoner wrongly rejects a step of an executable plan
    let mut flipped = 0;
    for i in 0..g.actions.len() {
        if g.actions[..i].contains(&g.actions[i]) {
            continue;
        }
        let fault = Fault::at(FaultKind::FlipExecutability, &g.actions[i]);
        let mock = CountingReasoner::new(
            mock_for(&reg, std::slice::from_ref(base))
                .unwrap()
                .with_fault(fault),
        );
        let problem = base.problem_text();
        let format = base.answer_format();
        let run = run_prorac(&task_for(&reg, base, &problem, &format), &cfg, &mock).unwrap();
        assert_eq!(run.short_circuit_at(), Some(i));
        assert_eq!(mock.calls(), 3 + 2 * i + 1, "flipped at {i}");
        flipped += 1;
    }
    pass(
        5,
        format!(
            "{clean} clean runs use 3+2k+1 calls; short-circuit at 3+2i+1 for {crafted} crafted and {flipped} flipped indices"
        ),
    );
}

#[test]
fn criterion_06_audit_precision_and_recall() {
    let reg = Registry::builtin();
    let mut insts = consistent(&reg);
    assert_eq!(insts.len(), 20);
    let mut expected = BTreeSet::new();
    for i in [2, 9, 17] {
        let inst = &mut insts[i];
        inst.answer = match inst.answer {
            Answer::True => Answer::False,
            Answer::False => Answer::True,
            Answer::Plan => Answer::Invalid,
            Answer::Applicable => Answer::Plan,
            Answer::Invalid => Answer::Plan,
            Answer::Choice(c) => Answer::Choice(if c == 'A' { 'B' } else { 'A' }),
        };
        expected.insert(inst.question_id.clone());
    }
    let bad = mislabeled(&reg);
    // hoist1 starts available and lifting nothing
    let g = bad.ground(&reg).unwrap();
    assert!(g.init.iter().any(|f| f.to_string() == "(available hoist1)"));
    assert!(!g.init.iter().any(|f| f.predicate.as_str() == "lifting"));
    expected.insert(bad.question_id.clone());
    insts.push(bad.clone());

    let report = audit_labels(&insts, &reg);
    let flagged: BTreeSet<String> = report.flagged().map(|e| e.question_id.clone()).collect();
    let tp = flagged.intersection(&expected).count() as f64;
    let precision = tp / flagged.len() as f64;
    let recall = tp / expected.len() as f64;
    assert_eq!((precision, recall), (1.0, 1.0), "flagged {flagged:?}");
    for e in report.flagged() {
        assert_ne!(e.gold, e.oracle);
        assert!(!e.explanation.is_empty());
    }
    let ae = report
        .entries
        .iter()
        .find(|e| e.question_id == bad.question_id)
        .unwrap();
    assert_eq!(
        ae.evidence,
        Evidence::Failure {
            index: 1,
            unsatisfied: vec!["(lifting hoist1 crate2)".into()]
        }
    );
    assert_eq!(report.patch_jsonl().lines().count(), 4);
    pass(
        6,
        format!(
            "flagged {} of 21, precision {precision:.2}, recall {recall:.2}",
            flagged.len()
        ),
    );
}

#[test]
fn criterion_07_error_taxonomy() {
    let reg = Registry::builtin();
    let insts = consistent(&reg);
    let cfg = PipelineConfig::default();
    // (instance, step) pairs over executable structured plans
    let mut sites = Vec::new();
    for inst in &insts {
        let g = inst.ground(&reg).unwrap();
        if g.trace().is_executable() {
            for (i, a) in g.actions.iter().enumerate() {
                if g.actions[..i].iter().all(|b| b != a) {
                    sites.push((inst, i, a.clone()));
                }
            }
        }
    }
    let cases: [(FaultKind, ErrorLabel); 4] = [
        (FaultKind::FlipExecutability, ErrorLabel::QualificationError),
        (FaultKind::MutateUnrelatedFluent, ErrorLabel::FrameViolation),
        (FaultKind::DropEffect, ErrorLabel::EffectMiss),
        (FaultKind::CorruptExtraction, ErrorLabel::ExtractionError),
    ];
    let mut total = 0;
    let mut counts = BTreeMap::new();
    for (kind, want) in cases {
        let chosen: Vec<_> = if kind == FaultKind::CorruptExtraction {
            let mut seen = BTreeSet::new();
            sites
                .iter()
                .filter(|(inst, _, _)| seen.insert(inst.question_id.clone()))
                .take(10)
                .collect()
        } else {
            sites.iter().step_by(3).take(10).collect()
        };
        assert_eq!(chosen.len(), 10);
        for (inst, _, action) in chosen {
            let fault = if kind == FaultKind::CorruptExtraction {
                Fault::everywhere(kind)
            } else {
                Fault::at(kind, action)
            };
            let mock: SymbolicMock = mock_for(&reg, std::slice::from_ref(*inst))
                .unwrap()
                .with_fault(fault);
            let problem = inst.problem_text();
            let format = inst.answer_format();
            let run = run_prorac(&task_for(&reg, inst, &problem, &format), &cfg, &mock)
                .unwrap_or_else(|e| panic!("{} {kind:?}: {e}", inst.question_id));
            let oracle = inst.ground(&reg).unwrap().trace();
            let label = classify_error(&run, &oracle).unwrap();
            assert_eq!(label, want, "{} {kind:?} at {action}", inst.question_id);
            *counts.entry(format!("{want}")).or_insert(0) += 1;
            total += 1;
        }
    }
    // a clean run has no divergence, and nl runs cannot be compared
    let inst = &insts[0];
    let mock = mock_for(&reg, std::slice::from_ref(inst)).unwrap();
    let problem = inst.problem_text();
    let format = inst.answer_format();
    let oracle = inst.ground(&reg).unwrap().trace();
    let run = run_prorac(&task_for(&reg, inst, &problem, &format), &cfg, &mock).unwrap();
    assert_eq!(classify_error(&run, &oracle).unwrap(), ErrorLabel::None);
    let nl = PipelineConfig {
        mode: PipelineMode::Nl,
        ..cfg
    };
    let run = run_prorac(&task_for(&reg, inst, &problem, &format), &nl, &mock).unwrap();
    assert!(classify_error(&run, &oracle).is_err());
    assert_eq!(total, 40);
    pass(
        7,
        format!("{total}/40 fault-injected runs labeled correctly: {counts:?}"),
    );
}

fn brute_vote(samples: &[Option<Answer>]) -> Option<Answer> {
    let mut best: Option<(usize, String, Answer)> = None;
    for a in samples.iter().flatten() {
        let count = samples
            .iter()
            .filter(|s| s.as_ref().map(Answer::normalized) == Some(a.normalized()))
            .count();
        let key = a.normalized();
        let better = match &best {
            None => true,
            Some((c, k, _)) => count > *c || (count == *c && key < *k),
        };
        if better {
            best = Some((count, key, *a));
        }
    }
    best.map(|(_, _, a)| a)
}

#[test]
fn criterion_08_self_consistency_vote() {
    let mut patterns = 0;
    for bits in 0u32..32 {
        let samples: Vec<Option<Answer>> = (0..5)
            .map(|i| Some(Answer::from_bool(bits >> i & 1 == 1)))
            .collect();
        let trues = bits.count_ones();
        let want = Answer::from_bool(trues >= 3);
        assert_eq!(vote(&samples), Some(want), "{bits:05b}");
        assert_eq!(brute_vote(&samples), Some(want));
        patterns += 1;
    }
    // every 5-sample pattern over {A, B, C, D, unparsed}
    let opts = [Some('A'), Some('B'), Some('C'), Some('D'), None];
    let mut ties = 0;
    for code in 0..5usize.pow(5) {
        let samples: Vec<Option<Answer>> = (0..5)
            .map(|i| opts[code / 5usize.pow(i) % 5].map(Answer::Choice))
            .collect();
        assert_eq!(vote(&samples), brute_vote(&samples), "{samples:?}");
        let mut counts = BTreeMap::new();
        for s in samples.iter().flatten() {
            *counts.entry(*s).or_insert(0) += 1;
        }
        let max = counts.values().max().copied().unwrap_or(0);
        if counts.values().filter(|&&c| c == max).count() > 1 {
            ties += 1;
            let smallest = counts.iter().find(|(_, &c)| c == max).map(|(a, _)| *a);
            assert_eq!(vote(&samples), smallest);
        }
    }
    assert_eq!(
        vote(&[
            Some(Answer::Choice('C')),
            Some(Answer::Choice('B')),
            Some(Answer::Choice('B')),
            Some(Answer::Choice('C')),
            None
        ]),
        Some(Answer::Choice('B'))
    );
    pass(8, format!("{patterns} boolean patterns and 3125 choice patterns ({ties} ties) match brute-force counting"));
}

#[test]
fn criterion_09_replay_determinism() {
    let reg = Registry::builtin();
    let insts = consistent(&reg);
    let dir = tempfile::tempdir().unwrap();
    let methods = [
        MethodKind::ProRac,
        MethodKind::SelfConsistency,
        MethodKind::TwoShotCot,
    ];
    let cfg = PipelineConfig::default();
    let run_all = |r: &dyn Reasoner, parallelism: usize| {
        let mut table = rac_core::harness::ResultsTable::default();
        let mut records = Vec::new();
        for m in methods {
            let out = run_suite(&insts, m, &cfg, parallelism, r, &reg);
            table.merge(out.table);
            records.extend(out.records);
        }
        (
            emit_table(&table, TableFormat::Markdown) + &emit_table(&table, TableFormat::Csv),
            to_jsonl(&records),
        )
    };
    let recorder = CachedReasoner::record(dir.path(), Box::new(mock_for(&reg, &insts).unwrap()));
    let recorded = run_all(&recorder, 4);
    let replay = CountingReasoner::new(CachedReasoner::replay(dir.path()));
    let first = run_all(&replay, 4);
    let second = run_all(&replay, 1);
    assert_eq!(first, second);
    assert_eq!(recorded.0, first.0);
    let calls = replay.calls();
    pass(
        9,
        format!(
            "two replays ({calls} cached calls) give identical tables ({} bytes) and records ({} bytes)",
            first.0.len(),
            first.1.len()
        ),
    );
}

#[test]
fn criterion_10_accuracy_rounding() {
    assert_eq!(format_accuracy(40, 45), "88.89");
    for c in 0..=45usize {
        // exact half-up on the rational 10000c/45, written independently
        let num = 10000 * c;
        let (q, r) = (num / 45, num % 45);
        let hundredths = if 2 * r >= 45 { q + 1 } else { q };
        let want = format!("{}.{:02}", hundredths / 100, hundredths % 100);
        assert_eq!(format_accuracy(c, 45), want, "c = {c}");
    }
    let hits: Vec<usize> = (0..=45)
        .filter(|&c| format_accuracy(c, 45) == "88.89")
        .collect();
    assert_eq!(hits, [40]);
    for t in 1..=200usize {
        for c in 0..=t {
            let exact = 100.0 * c as f64 / t as f64;
            let shown: f64 = format_accuracy(c, t).parse().unwrap();
            assert!((shown - exact).abs() <= 0.005 + 1e-9, "{c}/{t}");
        }
    }
    pass(
        10,
        "40/45 -> 88.89; all c/45 match exact half-up; |error| <= 0.005 for every c/t, t <= 200"
            .into(),
    );
}
