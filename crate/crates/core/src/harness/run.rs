use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DatasetManifest, FoldPlan, HarnessError};
use crate::fsutil::write_atomic;
use crate::metrics::{MacroPolicy, MetricsReport, ReportOptions, ScoreMatrix};
use crate::promptbank::TextEmbeddingBank;
use crate::vecspace::EmbeddingMatrix;
use crate::zeroshot::{
    argmax_with_tie, classify_batch, Aggregation, BestDescription, ClassifyOptions, ImageBatch,
};

pub const RESULT_FORMAT: &str = "zeroleaf-run";
pub const RESULT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Every item classified once; one fold.
    ZeroShotSingle,
    /// Externally produced scores evaluated per fold of a plan.
    ExternalScoresKfold,
}

/// Where per-item class scores come from.
pub enum ScoreSource<'a> {
    ZeroShot {
        bank: &'a TextEmbeddingBank,
        /// Image embeddings aligned to manifest order. Rows are normalized
        /// before classification.
        images: &'a EmbeddingMatrix,
        options: ClassifyOptions,
    },
    External {
        scores: &'a ScoreMatrix,
        tie_tol: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelLabel {
    /// Table grouping, e.g. "Multimodal CLIP Models".
    pub group: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub run_id: String,
    pub model: ModelLabel,
    /// Also report the macro one-vs-rest binary MCC.
    pub ovr_mcc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub item_id: String,
    pub source: String,
    pub fold: usize,
    pub true_label: usize,
    pub predicted_label: usize,
    pub tie: bool,
    pub scores: Vec<f64>,
    pub best_description: Option<BestDescription>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_items: usize,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceResult {
    pub source: String,
    pub n_items: usize,
    pub report: MetricsReport,
}

/// Unweighted means of per-fold values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossFoldMean {
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    pub mcc: f64,
    /// Mean over folds with a defined macro AUC.
    pub macro_auc: Option<f64>,
}

impl CrossFoldMean {
    pub fn of(folds: &[FoldResult]) -> Self {
        let n = folds.len() as f64;
        let mean =
            |f: fn(&MetricsReport) -> f64| folds.iter().map(|x| f(&x.report)).sum::<f64>() / n;
        let aucs: Vec<f64> = folds.iter().filter_map(|f| f.report.macro_auc).collect();
        Self {
            precision_macro: mean(|r| r.precision_macro),
            recall_macro: mean(|r| r.recall_macro),
            f1_macro: mean(|r| r.f1_macro),
            mcc: mean(|r| r.mcc),
            macro_auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub format: String,
    pub version: u32,
    pub run_id: String,
    pub model: ModelLabel,
    pub mode: RunMode,
    pub class_names: Vec<String>,
    pub aggregation: Option<Aggregation>,
    pub provenance: Option<String>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub folds: Vec<FoldResult>,
    pub cross_fold_mean: CrossFoldMean,
    pub per_source: Vec<SourceResult>,
    pub overall: MetricsReport,
    pub items: Vec<ItemOutcome>,
    pub notes: Vec<String>,
}

impl RunResult {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("run result serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let r: RunResult =
            serde_json::from_str(text).map_err(|e| HarnessError::Json(e.to_string()))?;
        if r.format != RESULT_FORMAT || r.version != RESULT_VERSION {
            return Err(HarnessError::Json(format!(
                "unsupported result document {:?} v{}",
                r.format, r.version
            )));
        }
        Ok(r)
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        write_atomic(path, self.to_json().as_bytes()).map_err(|e| HarnessError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }
}

fn report_for(
    indices: &[usize],
    items: &[ItemOutcome],
    classes: usize,
    options: ReportOptions,
) -> Result<MetricsReport, HarnessError> {
    let y_true: Vec<usize> = indices.iter().map(|&i| items[i].true_label).collect();
    let y_pred: Vec<usize> = indices.iter().map(|&i| items[i].predicted_label).collect();
    let mut data = Vec::with_capacity(indices.len() * classes);
    for &i in indices {
        data.extend_from_slice(&items[i].scores);
    }
    let scores = ScoreMatrix::new(classes, data)?;
    Ok(MetricsReport::compute(&y_true, &y_pred, &scores, options)?)
}

/// Scores every manifest item, then assembles per-fold, per-source and
/// overall metrics.
///
/// Zero-shot runs take no fold plan and yield a single fold. External
/// score runs require one.
pub fn run_evaluation(
    manifest: &DatasetManifest,
    source: ScoreSource<'_>,
    fold_plan: Option<&FoldPlan>,
    config: &RunConfig,
) -> Result<RunResult, HarnessError> {
    let classes = manifest.num_classes();
    let n = manifest.len();
    if n == 0 {
        return Err(HarnessError::ModeMismatch("manifest has no items".into()));
    }
    let mode = match (&source, fold_plan) {
        (ScoreSource::ZeroShot { .. }, None) => RunMode::ZeroShotSingle,
        (ScoreSource::External { .. }, Some(_)) => RunMode::ExternalScoresKfold,
        (ScoreSource::ZeroShot { .. }, Some(_)) => {
            return Err(HarnessError::ModeMismatch(
                "zero-shot runs are single-run and take no fold plan".into(),
            ))
        }
        (ScoreSource::External { .. }, None) => {
            return Err(HarnessError::ModeMismatch(
                "external score runs require a fold plan".into(),
            ))
        }
    };
    let fold_sets: Vec<Vec<usize>> = match fold_plan {
        Some(plan) => plan.fold_indices(manifest)?,
        None => vec![(0..n).collect()],
    };
    let mut fold_of = vec![0usize; n];
    for (f, idx) in fold_sets.iter().enumerate() {
        for &i in idx {
            fold_of[i] = f;
        }
    }

    let entries = manifest.entries();
    let mut notes = Vec::new();
    let (items, aggregation, provenance): (Vec<ItemOutcome>, _, _) = match source {
        ScoreSource::ZeroShot {
            bank,
            images,
            options,
        } => {
            if bank.class_names() != manifest.class_names() {
                return Err(HarnessError::ClassNameMismatch {
                    expected: manifest.class_names().to_vec(),
                    found: bank.class_names(),
                });
            }
            if images.rows() != n {
                return Err(HarnessError::ModeMismatch(format!(
                    "{} image rows for {n} manifest items",
                    images.rows()
                )));
            }
            let batch = ImageBatch::new(
                manifest.item_ids(),
                entries.iter().map(|e| Some(e.true_label)).collect(),
                images.l2_normalized()?,
            )?;
            let records = classify_batch(&batch, bank, options)?;
            let items = records
                .into_iter()
                .zip(entries)
                .enumerate()
                .map(|(i, (r, e))| ItemOutcome {
                    item_id: r.item_id,
                    source: e.source.clone(),
                    fold: fold_of[i],
                    true_label: e.true_label,
                    predicted_label: r.predicted_label,
                    tie: r.tie,
                    scores: r.scores.class_scores,
                    best_description: Some(r.best_description),
                })
                .collect();
            notes
                .push("zero-shot run: every item classified once, no cross-validation".to_string());
            (
                items,
                Some(options.aggregation),
                Some(bank.provenance().to_string()),
            )
        }
        ScoreSource::External { scores, tie_tol } => {
            if scores.rows() != n || scores.classes() != classes {
                return Err(HarnessError::ModeMismatch(format!(
                    "score matrix is {}×{}, manifest is {n}×{classes}",
                    scores.rows(),
                    scores.classes()
                )));
            }
            let mut items = Vec::with_capacity(n);
            for (i, e) in entries.iter().enumerate() {
                let row = scores.row(i);
                let (predicted_label, tie) = argmax_with_tie(row, tie_tol)?;
                items.push(ItemOutcome {
                    item_id: e.item_id.clone(),
                    source: e.source.clone(),
                    fold: fold_of[i],
                    true_label: e.true_label,
                    predicted_label,
                    tie,
                    scores: row.to_vec(),
                    best_description: None,
                });
            }
            notes.push(
                "k-fold run over externally scored items: folds partition the evaluation set; \
                 metrics are computed per fold and averaged without weighting"
                    .to_string(),
            );
            (items, None, None)
        }
    };

    let fold_options = ReportOptions {
        macro_policy: MacroPolicy::AllClasses,
        ovr_mcc: config.ovr_mcc,
    };
    let source_options = ReportOptions {
        macro_policy: MacroPolicy::PresentClasses,
        ovr_mcc: config.ovr_mcc,
    };

    let folds = fold_sets
        .par_iter()
        .enumerate()
        .map(|(fold, idx)| {
            Ok(FoldResult {
                fold,
                n_items: idx.len(),
                report: report_for(idx, &items, classes, fold_options)?,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let sources = manifest.sources();
    let per_source = sources
        .par_iter()
        .map(|s| {
            let idx: Vec<usize> = (0..n).filter(|&i| &entries[i].source == s).collect();
            Ok(SourceResult {
                source: s.clone(),
                n_items: idx.len(),
                report: report_for(&idx, &items, classes, source_options)?,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    for s in &per_source {
        let absent: Vec<&str> = (0..classes)
            .filter(|c| !s.report.macro_classes.contains(c))
            .map(|c| manifest.class_names()[c].as_str())
            .collect();
        if !absent.is_empty() {
            notes.push(format!(
                "source {:?}: no items of {}; excluded from its macro means",
                s.source,
                absent.join(", ")
            ));
        }
    }

    let all: Vec<usize> = (0..n).collect();
    let overall = report_for(&all, &items, classes, fold_options)?;

    Ok(RunResult {
        format: RESULT_FORMAT.to_string(),
        version: RESULT_VERSION,
        run_id: config.run_id.clone(),
        model: config.model.clone(),
        mode,
        class_names: manifest.class_names().to_vec(),
        aggregation,
        provenance,
        k: fold_plan.map(|p| p.k),
        seed: fold_plan.map(|p| p.seed),
        cross_fold_mean: CrossFoldMean::of(&folds),
        folds,
        per_source,
        overall,
        items,
        notes,
    })
}
