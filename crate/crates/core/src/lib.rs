//! Zero-shot classification with prompt ensembles, and the evaluation
//! harness around it.
//!
//! Encoders live outside this crate. Their output arrives as ZSEB embedding
//! files ([`exchange`]): one file of prompt embeddings, built once into a
//! normalized [`promptbank::TextEmbeddingBank`], and one file of image
//! embeddings. Each image is scored against every class by summing (or
//! averaging) its cosine similarity to that class's descriptions, and the
//! highest-scoring class wins ([`zeroshot`]). The [`harness`] runs that
//! over a labeled manifest, or evaluates another model's score file over a
//! stratified fold plan, and [`metrics`] supplies macro precision / recall /
//! F1, MCC, confusion matrices and one-vs-rest ROC/AUC.

#![allow(clippy::tabs_in_doc_comments)]

pub mod cli;
pub mod exchange;
pub mod fixtures;
mod fsutil;
pub mod harness;
pub mod metrics;
pub mod promptbank;
pub mod vecspace;
pub mod zeroshot;

pub use exchange::{read_embedding_file, write_embedding_file, ReadOptions, Sidecar};
pub use harness::{run_evaluation, stratified_kfold, DatasetManifest, FoldPlan, RunResult};
pub use metrics::{ConfusionMatrix, MetricsReport, ScoreMatrix};
pub use promptbank::{build_text_bank, ClassPromptSet, TextEmbeddingBank};
pub use vecspace::{cosine_similarity, l2_normalize, EmbeddingMatrix, EmbeddingVector};
pub use zeroshot::{classify_batch, predict, Aggregation, ClassifyOptions, PredictionRecord};
