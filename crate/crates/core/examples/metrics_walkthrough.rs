//! Confusion matrix, macro P/R/F1, MCC and one-vs-rest ROC on a small
//! hand-made set.
//!
//!     cargo run --example metrics_walkthrough

use zeroleaf::metrics::{
    auc, confusion_matrix, macro_prf, mcc_multiclass, one_vs_rest_auc, roc_curve, MetricsReport,
    ReportOptions, ScoreMatrix,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let y_true = [0, 0, 1, 1, 1, 2, 2, 2, 2, 1];
    let y_pred = [0, 1, 1, 1, 0, 2, 2, 1, 2, 1];
    let scores = ScoreMatrix::from_rows(
        3,
        &[
            [0.7, 0.2, 0.1],
            [0.4, 0.5, 0.1],
            [0.1, 0.8, 0.1],
            [0.2, 0.6, 0.2],
            [0.5, 0.4, 0.1],
            [0.1, 0.1, 0.8],
            [0.2, 0.2, 0.6],
            [0.1, 0.5, 0.4],
            [0.3, 0.1, 0.6],
            [0.2, 0.7, 0.1],
        ],
    )?;

    let m = confusion_matrix(&y_true, &y_pred, 3)?;
    println!("confusion (rows = truth):");
    for row in m.counts() {
        println!("  {row:?}");
    }
    let prf = macro_prf(&m);
    for (k, c) in prf.per_class.iter().enumerate() {
        println!(
            "class {k}: P {:.3} R {:.3} F1 {:.3}",
            c.precision, c.recall, c.f1
        );
    }
    println!(
        "macro: P {:.4} R {:.4} F1 {:.4}",
        prf.precision_macro, prf.recall_macro, prf.f1_macro
    );
    println!("MCC {:.4}", mcc_multiclass(&m));

    // ROC for class 1 against the rest. Tied scores move as one step.
    let positive: Vec<bool> = y_true.iter().map(|&y| y == 1).collect();
    let curve = roc_curve(&scores.column(1), &positive)?;
    for p in &curve {
        println!("  fpr {:.3} tpr {:.3}", p.fpr, p.tpr);
    }
    println!("AUC(class 1) = {:.4}", auc(&curve)?);

    let ovr = one_vs_rest_auc(&scores, &y_true)?;
    println!(
        "per-class AUC {:?}, macro {:?}",
        ovr.per_class, ovr.macro_auc
    );

    let report = MetricsReport::compute(&y_true, &y_pred, &scores, ReportOptions::default())?;
    println!("report flags: {:?}", report.degenerate_flags);
    Ok(())
}
