//! Five-fold evaluation of a supervised model's score file over the
//! 945-image field test layout (Farmy, Africa, Peru, Internet).
//!
//! The folds partition the evaluation set; no model is retrained.
//!
//!     cargo run --example cross_validate_external_scores

use zeroleaf::fixtures;
use zeroleaf::harness::{
    parse_external_scores, render_external_scores, run_evaluation, stratified_kfold, ModelLabel,
    RunConfig, ScoreSource,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manifest = fixtures::field_test_manifest();
    for t in manifest.tallies().sources {
        println!("{:<9} {:?} total {}", t.source, t.per_class, t.total);
    }

    // Score files are TSV keyed by item id; rows may come in any order.
    let scores = fixtures::synthetic_external_scores(&manifest, 1.5, 21);
    let text = render_external_scores(&manifest.item_ids(), manifest.class_names(), &scores);
    let scores = parse_external_scores(&text, &manifest, "memory")?;

    let plan = stratified_kfold(&manifest, 5, 42)?;
    let config = RunConfig {
        run_id: "resnet-demo".into(),
        model: ModelLabel {
            group: "Convolutional Models".into(),
            name: "ResNet-demo".into(),
        },
        ovr_mcc: true,
    };
    let result = run_evaluation(
        &manifest,
        ScoreSource::External {
            scores: &scores,
            tie_tol: 0.0,
        },
        Some(&plan),
        &config,
    )?;

    for f in &result.folds {
        println!(
            "fold {} n={:<3} P {:.4} R {:.4} F1 {:.4} MCC {:.4} AUC {:.4}",
            f.fold,
            f.n_items,
            f.report.precision_macro,
            f.report.recall_macro,
            f.report.f1_macro,
            f.report.mcc,
            f.report.macro_auc.unwrap_or(f64::NAN)
        );
    }
    let m = &result.cross_fold_mean;
    println!(
        "mean   P {:.4} R {:.4} F1 {:.4} MCC {:.4}",
        m.precision_macro, m.recall_macro, m.f1_macro, m.mcc
    );

    for s in &result.per_source {
        println!(
            "{:<9} n={:<3} F1 {:.4} over classes {:?}",
            s.source, s.n_items, s.report.f1_macro, s.report.macro_classes
        );
    }
    for note in &result.notes {
        println!("note: {note}");
    }
    Ok(())
}
