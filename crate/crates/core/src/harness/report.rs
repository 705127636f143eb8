//! Report rendering.
//!
//! | format | files |
//! |--------|-------|
//! | `json` | `report.json`: every run in full |
//! | `tsv`  | `summary.tsv`, `folds.tsv`, `confusion.tsv`, `auc.tsv`, `mcc.tsv`, `sources.tsv`, `descriptions.tsv` |
//! | `text` | `summary.txt`: human-readable digest |
//!
//! The summary table keeps the column order Group, Model, Macro Precision,
//! Macro Recall, Macro F1-score, with values as percentages to two
//! decimals. All other TSV values use the shortest round-tripping decimal
//! form. Output is a pure function of the runs, so identical inputs give
//! byte-identical files.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::{HarnessError, RunMode, RunResult};
use crate::fsutil::write_atomic;
use crate::metrics::MetricsReport;

pub const REPORT_NOTE: &str = "Cross-validation here partitions the evaluation set of externally \
scored items into folds; models are not retrained per fold. Zero-shot runs are single-run.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReportFormat {
    Json,
    Tsv,
    Text,
}

impl FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "tsv" => Ok(ReportFormat::Tsv),
            "text" | "txt" => Ok(ReportFormat::Text),
            _ => Err(HarnessError::UnknownFormat(s.to_string())),
        }
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `Group | Model | P | R | F1` with percentages, from the cross-fold means.
pub fn render_summary_row(r: &RunResult) -> String {
    let m = &r.cross_fold_mean;
    format!(
        "{} | {} | {} | {} | {}",
        r.model.group,
        r.model.name,
        pct(m.precision_macro),
        pct(m.recall_macro),
        pct(m.f1_macro)
    )
}

#[derive(Serialize)]
struct JsonReport<'a> {
    format: &'static str,
    version: u32,
    note: &'static str,
    runs: &'a [RunResult],
}

fn render_json(runs: &[RunResult]) -> String {
    let mut s = serde_json::to_string_pretty(&JsonReport {
        format: "zeroleaf-report",
        version: 1,
        note: REPORT_NOTE,
        runs,
    })
    .expect("report serializes");
    s.push('\n');
    s
}

/// Every (scope, report) pair of a run: overall, folds, then sources.
fn scopes(r: &RunResult) -> Vec<(String, &MetricsReport)> {
    let mut out = vec![("overall".to_string(), &r.overall)];
    out.extend(
        r.folds
            .iter()
            .map(|f| (format!("fold:{}", f.fold), &f.report)),
    );
    out.extend(
        r.per_source
            .iter()
            .map(|s| (format!("source:{}", s.source), &s.report)),
    );
    out
}

fn render_tsv(runs: &[RunResult]) -> Vec<(&'static str, String)> {
    let mut summary = String::from("Group\tModel\tMacro Precision\tMacro Recall\tMacro F1-score\n");
    let mut folds = String::from(
        "run_id\tmodel\tfold\tn_items\tmacro_precision\tmacro_recall\tmacro_f1\tmcc\tmacro_auc\n",
    );
    let mut confusion = String::from("run_id\tmodel\tscope\ttrue_class\tpredicted_class\tcount\n");
    let mut auc = String::from("run_id\tmodel\tscope\tclass\tauc\n");
    let mut mcc = String::from("run_id\tmodel\tscope\tmcc\tmcc_ovr_macro\n");
    let mut sources = String::from(
        "run_id\tmodel\tsource\tn_items\tmacro_precision\tmacro_recall\tmacro_f1\tmcc\tmacro_auc\texcluded_classes\n",
    );
    let mut descriptions = String::from(
        "run_id\tmodel\titem_id\ttrue_class\tpredicted_class\tbest_class\tdescription_index\tsimilarity\tdescription_text\n",
    );

    for r in runs {
        let id = &r.run_id;
        let model = &r.model.name;
        let name = |c: usize| r.class_names[c].as_str();
        let m = &r.cross_fold_mean;
        let _ = writeln!(
            summary,
            "{}\t{}\t{}\t{}\t{}",
            r.model.group,
            model,
            pct(m.precision_macro),
            pct(m.recall_macro),
            pct(m.f1_macro)
        );
        for f in &r.folds {
            let p = &f.report;
            let _ = writeln!(
                folds,
                "{id}\t{model}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                f.fold,
                f.n_items,
                p.precision_macro,
                p.recall_macro,
                p.f1_macro,
                p.mcc,
                opt(p.macro_auc)
            );
        }
        for (scope, p) in scopes(r) {
            for (t, row) in p.confusion.counts().iter().enumerate() {
                for (c, count) in row.iter().enumerate() {
                    let _ = writeln!(
                        confusion,
                        "{id}\t{model}\t{scope}\t{}\t{}\t{count}",
                        name(t),
                        name(c)
                    );
                }
            }
            for c in &p.per_class {
                let _ = writeln!(
                    auc,
                    "{id}\t{model}\t{scope}\t{}\t{}",
                    name(c.class_id),
                    opt(c.auc)
                );
            }
            let _ = writeln!(auc, "{id}\t{model}\t{scope}\tmacro\t{}", opt(p.macro_auc));
            let _ = writeln!(
                mcc,
                "{id}\t{model}\t{scope}\t{}\t{}",
                p.mcc,
                opt(p.mcc_ovr_macro)
            );
        }
        for s in &r.per_source {
            let p = &s.report;
            let excluded: Vec<&str> = (0..r.class_names.len())
                .filter(|c| !p.macro_classes.contains(c))
                .map(name)
                .collect();
            let _ = writeln!(
                sources,
                "{id}\t{model}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.source,
                s.n_items,
                p.precision_macro,
                p.recall_macro,
                p.f1_macro,
                p.mcc,
                opt(p.macro_auc),
                excluded.join(",")
            );
        }
        for item in &r.items {
            if let Some(b) = &item.best_description {
                let _ = writeln!(
                    descriptions,
                    "{id}\t{model}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    item.item_id,
                    name(item.true_label),
                    name(item.predicted_label),
                    name(b.class_id),
                    b.description_index,
                    b.similarity,
                    b.description_text
                );
            }
        }
    }
    vec![
        ("summary.tsv", summary),
        ("folds.tsv", folds),
        ("confusion.tsv", confusion),
        ("auc.tsv", auc),
        ("mcc.tsv", mcc),
        ("sources.tsv", sources),
        ("descriptions.tsv", descriptions),
    ]
}

fn grid(out: &mut String, r: &RunResult, p: &MetricsReport) {
    let width = r
        .class_names
        .iter()
        .map(|c| c.len())
        .max()
        .unwrap_or(0)
        .max(6);
    let _ = write!(out, "    {:width$}", "true \\ pred");
    for (c, _) in r.class_names.iter().enumerate() {
        let _ = write!(out, " {c:>7}");
    }
    out.push('\n');
    for (t, row) in p.confusion.counts().iter().enumerate() {
        let _ = write!(out, "    {:width$}", format!("{t} {}", r.class_names[t]));
        for count in row {
            let _ = write!(out, " {count:>7}");
        }
        out.push('\n');
    }
}

fn render_text(runs: &[RunResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "zeroleaf evaluation report");
    let _ = writeln!(out, "{REPORT_NOTE}");
    out.push('\n');
    let _ = writeln!(
        out,
        "Group | Model | Macro Precision | Macro Recall | Macro F1-score"
    );
    for r in runs {
        let _ = writeln!(out, "{}", render_summary_row(r));
    }

    for r in runs {
        out.push('\n');
        let _ = writeln!(out, "== {} ({}) ==", r.model.name, r.run_id);
        let mode = match r.mode {
            RunMode::ZeroShotSingle => "zero-shot, single run".to_string(),
            RunMode::ExternalScoresKfold => format!(
                "external scores, {}-fold (seed {})",
                r.k.unwrap_or(r.folds.len()),
                r.seed.map(|s| s.to_string()).unwrap_or_default()
            ),
        };
        let _ = writeln!(out, "mode: {mode}");
        if let Some(a) = r.aggregation {
            let _ = writeln!(out, "aggregation: {a}");
        }
        if let Some(p) = &r.provenance {
            let _ = writeln!(out, "encoder: {p}");
        }
        let _ = writeln!(out, "items: {}", r.overall.n_items);
        let _ = writeln!(out, "macro F1 per fold:");
        for f in &r.folds {
            let _ = writeln!(
                out,
                "  fold {}: {} ({} items)",
                f.fold,
                pct(f.report.f1_macro),
                f.n_items
            );
        }
        let m = &r.cross_fold_mean;
        let _ = writeln!(
            out,
            "MCC: {:.3} (fold mean), {:.3} (all items)",
            m.mcc, r.overall.mcc
        );
        if let Some(ovr) = r.overall.mcc_ovr_macro {
            let _ = writeln!(out, "MCC, one-vs-rest macro: {ovr:.3}");
        }
        let _ = writeln!(out, "AUC (all items):");
        for c in &r.overall.per_class {
            let v = c
                .auc
                .map(|a| format!("{a:.3}"))
                .unwrap_or_else(|| "n/a".into());
            let _ = writeln!(out, "  {}: {v}", r.class_names[c.class_id]);
        }
        let macro_auc = r
            .overall
            .macro_auc
            .map(|a| format!("{a:.3}"))
            .unwrap_or_else(|| "n/a".into());
        let _ = writeln!(out, "  macro: {macro_auc}");
        let _ = writeln!(out, "confusion matrix (all items):");
        grid(&mut out, r, &r.overall);
        let _ = writeln!(out, "per source:");
        let _ = writeln!(
            out,
            "  Source | Items | Macro Precision | Macro Recall | Macro F1-score | MCC"
        );
        for s in &r.per_source {
            let p = &s.report;
            let _ = writeln!(
                out,
                "  {} | {} | {} | {} | {} | {:.3}",
                s.source,
                s.n_items,
                pct(p.precision_macro),
                pct(p.recall_macro),
                pct(p.f1_macro),
                p.mcc
            );
        }
        for note in &r.notes {
            let _ = writeln!(out, "note: {note}");
        }
        let described: Vec<_> = r
            .items
            .iter()
            .filter(|i| i.best_description.is_some())
            .collect();
        if !described.is_empty() {
            let _ = writeln!(out, "best-matching descriptions:");
            for item in described {
                let b = item.best_description.as_ref().unwrap();
                let _ = writeln!(
                    out,
                    "  {}: true {}, predicted {}; closest: \"{}\" ({:.4})",
                    item.item_id,
                    r.class_names[item.true_label],
                    r.class_names[item.predicted_label],
                    b.description_text,
                    b.similarity
                );
            }
        }
    }
    out
}

/// Writes the requested formats into `out_dir` and returns the written paths.
pub fn emit_report(
    runs: &[RunResult],
    formats: &[ReportFormat],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let formats: BTreeSet<ReportFormat> = formats.iter().copied().collect();
    let mut files: Vec<(&str, String)> = Vec::new();
    for f in formats {
        match f {
            ReportFormat::Json => files.push(("report.json", render_json(runs))),
            ReportFormat::Tsv => files.extend(render_tsv(runs)),
            ReportFormat::Text => files.push(("summary.txt", render_text(runs))),
        }
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = out_dir.join(name);
        write_atomic(&path, body.as_bytes()).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_names() {
        assert_eq!("json".parse::<ReportFormat>().unwrap(), ReportFormat::Json);
        assert_eq!("TSV".parse::<ReportFormat>().unwrap(), ReportFormat::Tsv);
        assert_eq!("txt".parse::<ReportFormat>().unwrap(), ReportFormat::Text);
        assert!(matches!(
            "xml".parse::<ReportFormat>(),
            Err(HarnessError::UnknownFormat(f)) if f == "xml"
        ));
    }

    #[test]
    fn percent_rounding() {
        assert_eq!(pct(0.6730), "67.30");
        assert_eq!(pct(0.6621), "66.21");
        assert_eq!(pct(0.6629), "66.29");
        assert_eq!(pct(1.0), "100.00");
    }
}
