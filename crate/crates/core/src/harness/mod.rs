//! Evaluation harness: labeled manifests with per-source provenance,
//! stratified fold plans, external score ingestion, run orchestration and
//! report emission.

mod folds;
mod manifest;
mod report;
mod run;
mod scores;

use std::path::PathBuf;

use thiserror::Error;

use crate::exchange::ExchangeError;
use crate::metrics::MetricsError;
use crate::promptbank::BankError;
use crate::vecspace::VecError;
use crate::zeroshot::ZeroShotError;

pub use folds::{stratified_kfold, FoldAssignment, FoldPlan, FOLDS_HEADER};
pub use manifest::{
    load_manifest, DatasetManifest, EmbeddingRef, ManifestEntry, SourceTally, Tallies,
    MANIFEST_HEADER,
};
pub use report::{emit_report, render_summary_row, ReportFormat, REPORT_NOTE};
pub use run::{
    run_evaluation, CrossFoldMean, FoldResult, ItemOutcome, ModelLabel, RunConfig, RunMode,
    RunResult, ScoreSource, SourceResult,
};
pub use scores::{
    ingest_external_scores, parse_external_scores, render_external_scores, SCORES_HEADER,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("item id {0:?} appears more than once")]
    DuplicateItemId(String),
    #[error("unresolvable embedding references for items: {}", .ids.join(", "))]
    UnresolvableEmbeddingRef { ids: Vec<String> },
    #[error("embedding row for {item_id:?} is described as {found:?} in its sidecar")]
    EmbeddingRefMismatch { item_id: String, found: String },
    #[error("item {item_id:?} has no embedding reference")]
    MissingEmbedding { item_id: String },
    #[error("invalid k = {k} for {items} items (need 2 ≤ k ≤ items)")]
    InvalidK { k: usize, items: usize },
    #[error("score file is missing rows for: {}", .ids.join(", "))]
    MissingRows { ids: Vec<String> },
    #[error("score file has rows for unknown items: {}", .ids.join(", "))]
    ExtraRows { ids: Vec<String> },
    #[error("line {line}: expected {expected} score columns, found {actual}")]
    ColumnCountMismatch {
        line: usize,
        expected: usize,
        actual: usize,
    },
    #[error("class names differ: expected {expected:?}, found {found:?}")]
    ClassNameMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("non-finite score for item {item_id:?}, column {column}")]
    NonFiniteScore { item_id: String, column: usize },
    #[error("mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("fold plan does not match manifest: {0}")]
    PlanMismatch(String),
    #[error("unknown report format {0:?} (expected json, tsv or text)")]
    UnknownFormat(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Json(String),
    #[error(transparent)]
    ZeroShot(#[from] ZeroShotError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Exchange(#[from] ExchangeError),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Vec(#[from] VecError),
}

impl HarnessError {
    pub fn name(&self) -> &'static str {
        match self {
            HarnessError::Parse { .. } => "ParseError",
            HarnessError::DuplicateItemId(_) => "DuplicateItemId",
            HarnessError::UnresolvableEmbeddingRef { .. } => "UnresolvableEmbeddingRef",
            HarnessError::EmbeddingRefMismatch { .. } => "EmbeddingRefMismatch",
            HarnessError::MissingEmbedding { .. } => "MissingEmbedding",
            HarnessError::InvalidK { .. } => "InvalidK",
            HarnessError::MissingRows { .. } => "MissingRows",
            HarnessError::ExtraRows { .. } => "ExtraRows",
            HarnessError::ColumnCountMismatch { .. } => "ColumnCountMismatch",
            HarnessError::ClassNameMismatch { .. } => "ClassNameMismatch",
            HarnessError::NonFiniteScore { .. } => "NonFiniteScore",
            HarnessError::ModeMismatch(_) => "ModeMismatch",
            HarnessError::PlanMismatch(_) => "PlanMismatch",
            HarnessError::UnknownFormat(_) => "UnknownFormat",
            HarnessError::Io { .. } => "IoFailure",
            HarnessError::Json(_) => "ParseError",
            HarnessError::ZeroShot(e) => e.name(),
            HarnessError::Metrics(e) => e.name(),
            HarnessError::Exchange(e) => e.name(),
            HarnessError::Bank(e) => e.name(),
            HarnessError::Vec(e) => e.name(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Splits a tab-separated line, keeping empty fields.
pub(crate) fn tab_fields(line: &str) -> Vec<&str> {
    line.split('\t').map(str::trim).collect()
}

/// Yields `(1-based line number, trimmed line)` for non-blank, non-comment
/// lines.
pub(crate) fn meaningful_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let t = l.trim_end_matches(['\r', '\n']);
        let probe = t.trim();
        (!probe.is_empty() && !probe.starts_with('#')).then_some((i + 1, t))
    })
}
