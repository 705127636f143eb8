mod common;

use zeroleaf::fixtures;
use zeroleaf::harness::{
    emit_report, run_evaluation, stratified_kfold, HarnessError, ModelLabel, ReportFormat,
    RunConfig, RunMode, RunResult, ScoreSource,
};
use zeroleaf::promptbank::build_text_bank;
use zeroleaf::zeroshot::ClassifyOptions;

fn config() -> RunConfig {
    RunConfig {
        run_id: "r".into(),
        model: ModelLabel {
            group: "g".into(),
            name: "m".into(),
        },
        ovr_mcc: true,
    }
}

#[test]
fn synthetic_zero_shot_separates_and_collapses() {
    common::synthetic_end_to_end().unwrap();
}

#[test]
fn fold_plan_on_field_test_layout() {
    common::fold_plan_properties().unwrap();
}

#[test]
fn per_source_matrices_sum_to_overall() {
    common::per_source_consistency().unwrap();
}

#[test]
fn report_renders_published_row() {
    common::report_fidelity().unwrap();
}

#[test]
fn mode_rules() {
    let manifest = fixtures::field_test_manifest();
    let scores = fixtures::synthetic_external_scores(&manifest, 1.0, 1);
    let plan = stratified_kfold(&manifest, 5, 42).unwrap();
    let external = ScoreSource::External {
        scores: &scores,
        tie_tol: 0.0,
    };
    assert!(matches!(
        run_evaluation(&manifest, external, None, &config()),
        Err(HarnessError::ModeMismatch(_))
    ));

    let fx = fixtures::synthetic_zero_shot(
        fixtures::potato_prompt_sets(),
        manifest.clone(),
        Default::default(),
    );
    let bank = build_text_bank(&fx.prompt_sets, &fx.text_embeddings, "s").unwrap();
    let zs = || ScoreSource::ZeroShot {
        bank: &bank,
        images: &fx.images,
        options: ClassifyOptions::default(),
    };
    let err = run_evaluation(&manifest, zs(), Some(&plan), &config()).unwrap_err();
    assert_eq!(err.name(), "ModeMismatch");
    let r = run_evaluation(&manifest, zs(), None, &config()).unwrap();
    assert_eq!(r.mode, RunMode::ZeroShotSingle);
    assert_eq!(r.folds.len(), 1);
    assert!(r.items.iter().all(|i| i.best_description.is_some()));
    assert!(r.overall.mcc_ovr_macro.is_some());
}

#[test]
fn africa_excludes_absent_class_from_macro() {
    let r = fixtures::published_clip_result();
    let africa = r.per_source.iter().find(|s| s.source == "Africa").unwrap();
    assert_eq!(africa.report.macro_classes, vec![1, 2]);
    assert!(r.notes.iter().any(|n| n.contains("Africa")));
}

#[test]
fn result_json_round_trips_and_reports_are_deterministic() {
    let r = fixtures::published_clip_result();
    let back = RunResult::from_json(&r.to_json()).unwrap();
    assert_eq!(back, r);

    let formats = [ReportFormat::Json, ReportFormat::Tsv, ReportFormat::Text];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let wa = emit_report(std::slice::from_ref(&r), &formats, a.path()).unwrap();
    let wb = emit_report(&[back], &formats, b.path()).unwrap();
    assert_eq!(wa.len(), wb.len());
    for (x, y) in wa.iter().zip(&wb) {
        assert_eq!(
            std::fs::read(x).unwrap(),
            std::fs::read(y).unwrap(),
            "{}",
            x.display()
        );
    }
}
