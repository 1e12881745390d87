use rac_core::fixtures;
use rac_core::harness::{audit_labels, mock_for, parse_instances, run_suite, Instance};
use rac_core::pipeline::{MethodKind, PipelineConfig, PipelineMode};
use rac_core::query::Answer;
use rac_core::reasoner::CountingReasoner;
use rac_core::registry::Registry;

fn consistent(reg: &Registry) -> Vec<Instance> {
    parse_instances(&fixtures::consistent_instances(), reg).unwrap()
}

#[test]
fn fixture_counts() {
    let reg = Registry::builtin();
    assert_eq!(
        parse_instances(fixtures::BLOCKSWORLD_INSTANCES, &reg)
            .unwrap()
            .len(),
        12
    );
    assert_eq!(consistent(&reg).len(), 20);
}

#[test]
fn hand_labels_agree_with_oracle() {
    let reg = Registry::builtin();
    let report = audit_labels(&consistent(&reg), &reg);
    assert_eq!(report.entries.len(), 20);
    let flagged: Vec<_> = report.flagged().map(|e| e.question_id.clone()).collect();
    assert!(flagged.is_empty(), "{flagged:?}\n{}", report.render());
}

#[test]
fn prorac_ceiling_both_modes() {
    let reg = Registry::builtin();
    let insts = consistent(&reg);
    let mock = mock_for(&reg, &insts).unwrap();
    for mode in [PipelineMode::Structured, PipelineMode::Nl] {
        let cfg = PipelineConfig {
            mode,
            ..PipelineConfig::default()
        };
        let out = run_suite(&insts, MethodKind::ProRac, &cfg, 4, &mock, &reg);
        for r in &out.records {
            assert!(
                r.correct,
                "{mode:?} {}: {:?} {:?}",
                r.question_id, r.predicted, r.error
            );
        }
        for cell in out.table.cells.values() {
            assert_eq!(cell.accuracy(), "100.00");
        }
    }
}

#[test]
fn baselines_score_against_mock_oracle() {
    let reg = Registry::builtin();
    let insts = consistent(&reg);
    let mock = CountingReasoner::new(mock_for(&reg, &insts).unwrap());
    let cfg = PipelineConfig::default();
    let out = run_suite(&insts, MethodKind::SelfConsistency, &cfg, 2, &mock, &reg);
    assert!(out.records.iter().all(|r| r.correct));
    assert_eq!(mock.calls(), 20);
    // grippers has no worked examples
    let out = run_suite(&insts, MethodKind::TwoShotCot, &cfg, 2, &mock, &reg);
    let errors: Vec<_> = out
        .records
        .iter()
        .filter(|r| r.error.is_some())
        .map(|r| r.domain.as_str())
        .collect();
    assert_eq!(errors, ["grippers"; 4]);
    for cell in out.table.cells.values() {
        assert_eq!(
            cell.correct + cell.incorrect + cell.method_errors,
            cell.total
        );
    }
}

#[test]
fn mislabeled_instance_is_flagged() {
    let reg = Registry::builtin();
    let bad = parse_instances(fixtures::DEPOTS_MISLABELED_INSTANCE, &reg).unwrap();
    assert_eq!(bad[0].plan_length, 19);
    assert_eq!(bad[0].answer, Answer::True);
    let report = audit_labels(&bad, &reg);
    let e = report.flagged().next().expect("flagged");
    assert_eq!(e.oracle, Answer::False);
    assert!(
        e.explanation
            .contains("step 1 (drop hoist1 crate2 pallet1 depot1)"),
        "{}",
        e.explanation
    );
    assert!(
        e.explanation.contains("(lifting hoist1 crate2)"),
        "{}",
        e.explanation
    );
}

#[test]
fn rendered_prompts_match_live_requests() {
    use rac_core::harness::{render_prompts, run_one};
    let reg = Registry::builtin();
    let mut insts = consistent(&reg);
    insts.extend(parse_instances(fixtures::DEPOTS_MISLABELED_INSTANCE, &reg).unwrap());
    let mock = CountingReasoner::new(mock_for(&reg, &insts).unwrap());
    for mode in [PipelineMode::Structured, PipelineMode::Nl] {
        let cfg = PipelineConfig {
            mode,
            ..PipelineConfig::default()
        };
        for inst in &insts {
            for method in [
                MethodKind::ProRac,
                MethodKind::SelfConsistency,
                MethodKind::ZeroShot,
            ] {
                mock.reset();
                let rendered = render_prompts(inst, method, &cfg, &reg).unwrap();
                assert_eq!(mock.calls(), 0);
                let r = run_one(inst, method, &cfg, &mock, &reg);
                assert!(r.error.is_none(), "{}: {:?}", inst.question_id, r.error);
                let sent: Vec<_> = mock
                    .requests()
                    .iter()
                    .map(|q| (q.prompt_text().to_string(), q.n))
                    .collect();
                let got: Vec<_> = rendered.iter().map(|p| (p.prompt.clone(), p.n)).collect();
                assert_eq!(got, sent, "{} {method} {mode:?}", inst.question_id);
            }
        }
    }
}
