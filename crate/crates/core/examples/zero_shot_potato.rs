//! Zero-shot diagnosis of potato leaves with the shipped prompt ensemble.
//!
//! Real encoders run outside this crate, so the embeddings here come from
//! the synthetic generator: one orthogonal direction per disease, prompts
//! and images scattered around it.
//!
//!     cargo run --example zero_shot_potato

use zeroleaf::fixtures::{self, SyntheticConfig};
use zeroleaf::promptbank::build_text_bank;
use zeroleaf::vecspace::cosine_similarity;
use zeroleaf::zeroshot::{classify_batch, predict, ClassifyOptions, ImageBatch};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // The argmax step on its own: scores for (Early Blight, Late Blight, Healthy).
    let names: Vec<String> = fixtures::POTATO_CLASSES
        .iter()
        .map(|s| s.to_string())
        .collect();
    let p = predict(&[0.35, 0.89, 0.12], &names)?;
    println!("scores (0.35, 0.89, 0.12) -> {}", p.class_name);

    let manifest = fixtures::balanced_manifest(&fixtures::POTATO_CLASSES, 4, "field");
    let fx = fixtures::synthetic_zero_shot(
        fixtures::potato_prompt_sets(),
        manifest,
        SyntheticConfig {
            dim: 32,
            image_sigma: 0.08,
            ..SyntheticConfig::default()
        },
    );
    let bank = build_text_bank(&fx.prompt_sets, &fx.text_embeddings, "synthetic")?;
    println!(
        "bank: {} classes, {} descriptions, dim {}",
        bank.num_classes(),
        bank.total_descriptions(),
        bank.dim()
    );

    let first = bank.class(1).embeddings().row_vector(0);
    let second = bank.class(1).embeddings().row_vector(1);
    println!(
        "cos(late blight #0, late blight #1) = {:.3}",
        cosine_similarity(&first, &second)?
    );

    let batch = ImageBatch::new(
        fx.manifest.item_ids(),
        fx.manifest
            .entries()
            .iter()
            .map(|e| Some(e.true_label))
            .collect(),
        fx.images.l2_normalized()?,
    )?;
    let records = classify_batch(&batch, &bank, ClassifyOptions::default())?;
    let mut correct = 0;
    for r in &records {
        let ok = r.true_label == Some(r.predicted_label);
        correct += ok as usize;
        println!(
            "{:<16} {:<20} S = [{}]  best: #{} {:?} ({:.3})",
            r.item_id,
            r.predicted_name,
            r.scores
                .class_scores
                .iter()
                .map(|s| format!("{s:.3}"))
                .collect::<Vec<_>>()
                .join(", "),
            r.best_description.description_index,
            r.best_description.description_text,
            r.best_description.similarity,
        );
    }
    println!("{correct}/{} correct", records.len());
    Ok(())
}
