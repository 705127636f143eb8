//! Online classification against a text-embedding bank: per-class score
//! aggregation over each class's description embeddings, argmax prediction,
//! and the best-matching description for interpretability.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsutil::write_atomic;
use crate::promptbank::TextEmbeddingBank;
use crate::vecspace::{cosine_unchecked, EmbeddingMatrix, EmbeddingVector};

#[derive(Debug, Error)]
pub enum ZeroShotError {
    #[error("dimension mismatch: bank has dim {expected}, input has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("image embedding is not normalized")]
    NotNormalized,
    #[error("item id {0:?} appears more than once")]
    DuplicateItemId(String),
    #[error("score vector is empty")]
    EmptyScores,
    #[error("score at class {0} is not finite")]
    NonFiniteScore(usize),
    #[error("{what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

impl ZeroShotError {
    pub fn name(&self) -> &'static str {
        match self {
            ZeroShotError::DimensionMismatch { .. } => "DimensionMismatch",
            ZeroShotError::NotNormalized => "NotNormalized",
            ZeroShotError::DuplicateItemId(_) => "DuplicateItemId",
            ZeroShotError::EmptyScores => "EmptyScores",
            ZeroShotError::NonFiniteScore(_) => "NonFiniteScore",
            ZeroShotError::LengthMismatch { .. } => "LengthMismatch",
            ZeroShotError::Io { .. } => "IoFailure",
        }
    }
}

/// How per-description similarities are combined into a class score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// `S_c = Σ_j cos(v, t_c^j)`.
    #[default]
    Sum,
    /// The sum divided by the class's description count.
    Mean,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Sum => "sum",
            Aggregation::Mean => "mean",
        })
    }
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sum" => Ok(Aggregation::Sum),
            "mean" => Ok(Aggregation::Mean),
            other => Err(format!("unknown aggregation {other:?} (expected sum|mean)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub aggregation: Aggregation,
    pub class_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestDescription {
    pub class_id: usize,
    /// Zero-based position within the class's description list.
    pub description_index: usize,
    pub similarity: f64,
    pub description_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub class_id: usize,
    pub class_name: String,
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub item_id: String,
    pub true_label: Option<usize>,
    pub predicted_label: usize,
    pub predicted_name: String,
    pub tie: bool,
    pub scores: ScoreVector,
    pub best_description: BestDescription,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub aggregation: Aggregation,
    /// Another class within this distance of the maximum counts as a tie.
    pub tie_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            aggregation: Aggregation::Sum,
            tie_tol: 0.0,
        }
    }
}

/// Normalized image embeddings with per-row ids and optional labels.
#[derive(Debug, Clone)]
pub struct ImageBatch {
    pub ids: Vec<String>,
    pub true_labels: Vec<Option<usize>>,
    pub embeddings: EmbeddingMatrix,
}

impl ImageBatch {
    pub fn new(
        ids: Vec<String>,
        true_labels: Vec<Option<usize>>,
        embeddings: EmbeddingMatrix,
    ) -> Result<Self, ZeroShotError> {
        if ids.len() != embeddings.rows() {
            return Err(ZeroShotError::LengthMismatch {
                what: "item ids vs embedding rows",
                expected: embeddings.rows(),
                actual: ids.len(),
            });
        }
        if true_labels.len() != ids.len() {
            return Err(ZeroShotError::LengthMismatch {
                what: "labels vs item ids",
                expected: ids.len(),
                actual: true_labels.len(),
            });
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(ZeroShotError::DuplicateItemId(id.clone()));
            }
        }
        Ok(Self {
            ids,
            true_labels,
            embeddings,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

fn check_image(image: &EmbeddingVector, bank: &TextEmbeddingBank) -> Result<(), ZeroShotError> {
    if image.dim() != bank.dim() {
        return Err(ZeroShotError::DimensionMismatch {
            expected: bank.dim(),
            actual: image.dim(),
        });
    }
    if !image.is_normalized() {
        return Err(ZeroShotError::NotNormalized);
    }
    Ok(())
}

fn scores_for(image: &[f32], bank: &TextEmbeddingBank, aggregation: Aggregation) -> ScoreVector {
    let class_scores = bank
        .classes()
        .iter()
        .map(|class| {
            let sum: f64 = class
                .embeddings()
                .iter_rows()
                .map(|t| cosine_unchecked(image, t))
                .sum();
            match aggregation {
                Aggregation::Sum => sum,
                Aggregation::Mean => sum / class.len() as f64,
            }
        })
        .collect();
    ScoreVector {
        aggregation,
        class_scores,
    }
}

fn best_for(image: &[f32], bank: &TextEmbeddingBank) -> BestDescription {
    let mut best: Option<(usize, usize, f64)> = None;
    for class in bank.classes() {
        for (j, t) in class.embeddings().iter_rows().enumerate() {
            let s = cosine_unchecked(image, t);
            if best.is_none_or(|(_, _, b)| s > b) {
                best = Some((class.class_id(), j, s));
            }
        }
    }
    let (class_id, description_index, similarity) = best.expect("bank has at least one row");
    BestDescription {
        class_id,
        description_index,
        similarity,
        description_text: bank.class(class_id).descriptions()[description_index].clone(),
    }
}

/// Per-class aggregated similarity of a normalized image embedding.
pub fn aggregate_scores(
    image: &EmbeddingVector,
    bank: &TextEmbeddingBank,
    aggregation: Aggregation,
) -> Result<ScoreVector, ZeroShotError> {
    check_image(image, bank)?;
    Ok(scores_for(image.values(), bank, aggregation))
}

/// Index of the first maximum, and whether any other entry lies within
/// `tie_tol` of it.
pub fn argmax_with_tie(scores: &[f64], tie_tol: f64) -> Result<(usize, bool), ZeroShotError> {
    if scores.is_empty() {
        return Err(ZeroShotError::EmptyScores);
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(ZeroShotError::NonFiniteScore(i));
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    let max = scores[best];
    let tie = scores
        .iter()
        .enumerate()
        .any(|(i, &s)| i != best && max - s <= tie_tol);
    Ok((best, tie))
}

/// Argmax with exact-equality tie detection.
pub fn predict(scores: &[f64], class_names: &[String]) -> Result<Prediction, ZeroShotError> {
    predict_with_tolerance(scores, class_names, 0.0)
}

pub fn predict_with_tolerance(
    scores: &[f64],
    class_names: &[String],
    tie_tol: f64,
) -> Result<Prediction, ZeroShotError> {
    if class_names.len() != scores.len() {
        return Err(ZeroShotError::LengthMismatch {
            what: "class names vs scores",
            expected: scores.len(),
            actual: class_names.len(),
        });
    }
    let (class_id, tie) = argmax_with_tie(scores, tie_tol)?;
    Ok(Prediction {
        class_id,
        class_name: class_names[class_id].clone(),
        tie,
    })
}

/// The single (class, description) pair most similar to the image. Ties go
/// to the smaller class id, then the smaller description index.
pub fn best_description(
    image: &EmbeddingVector,
    bank: &TextEmbeddingBank,
) -> Result<BestDescription, ZeroShotError> {
    check_image(image, bank)?;
    Ok(best_for(image.values(), bank))
}

/// Classifies a single normalized embedding.
pub fn classify_one(
    item_id: &str,
    true_label: Option<usize>,
    image: &EmbeddingVector,
    bank: &TextEmbeddingBank,
    options: ClassifyOptions,
) -> Result<PredictionRecord, ZeroShotError> {
    check_image(image, bank)?;
    Ok(classify_row(
        item_id,
        true_label,
        image.values(),
        bank,
        options,
    ))
}

fn classify_row(
    item_id: &str,
    true_label: Option<usize>,
    image: &[f32],
    bank: &TextEmbeddingBank,
    options: ClassifyOptions,
) -> PredictionRecord {
    let scores = scores_for(image, bank, options.aggregation);
    // Bank scores are finite and C ≥ 1, so argmax cannot fail.
    let (predicted_label, tie) =
        argmax_with_tie(&scores.class_scores, options.tie_tol).expect("finite non-empty scores");
    PredictionRecord {
        item_id: item_id.to_string(),
        true_label,
        predicted_label,
        predicted_name: bank.class(predicted_label).class_name().to_string(),
        tie,
        scores,
        best_description: best_for(image, bank),
    }
}

/// Classifies every row of the batch. Output order follows input order.
pub fn classify_batch(
    batch: &ImageBatch,
    bank: &TextEmbeddingBank,
    options: ClassifyOptions,
) -> Result<Vec<PredictionRecord>, ZeroShotError> {
    let images = &batch.embeddings;
    if images.dim() != bank.dim() {
        return Err(ZeroShotError::DimensionMismatch {
            expected: bank.dim(),
            actual: images.dim(),
        });
    }
    if !images.is_normalized() {
        return Err(ZeroShotError::NotNormalized);
    }
    Ok((0..batch.len())
        .into_par_iter()
        .map(|i| {
            classify_row(
                &batch.ids[i],
                batch.true_labels[i],
                images.row(i),
                bank,
                options,
            )
        })
        .collect())
}

/// One JSON object per line, fields in declaration order.
pub fn predictions_to_jsonl(records: &[PredictionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<(), ZeroShotError> {
    write_atomic(path, predictions_to_jsonl(records).as_bytes()).map_err(|source| {
        ZeroShotError::Io {
            path: path.to_path_buf(),
            source,
        }
    })
}
