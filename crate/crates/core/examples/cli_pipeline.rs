//! The whole pipeline through the command-line entry point: build a bank,
//! classify, plan folds, evaluate both run modes, report.
//!
//!     cargo run --example cli_pipeline

use std::path::Path;

use zeroleaf::exchange::{write_embedding_file, ImageRow, RowDescriptors, Sidecar, TextRow};
use zeroleaf::fixtures::{self, SyntheticConfig};
use zeroleaf::harness::{render_external_scores, DatasetManifest, EmbeddingRef, ManifestEntry};

fn run(args: &[&str]) {
    let argv = std::iter::once("zeroleaf").chain(args.iter().copied());
    let code = zeroleaf::cli::dispatch(argv);
    println!("  exit {code}");
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

    let manifest = fixtures::balanced_manifest(&fixtures::POTATO_CLASSES, 10, "synthetic");
    let fx = fixtures::synthetic_zero_shot(
        fixtures::potato_prompt_sets(),
        manifest,
        SyntheticConfig::default(),
    );

    // Exporter-side artifacts: prompt document, text and image embeddings.
    std::fs::write(p("prompts.txt"), fixtures::POTATO_PROMPTS)?;
    let text_rows = fx
        .prompt_sets
        .iter()
        .flat_map(|s| {
            s.descriptions.iter().enumerate().map(|(j, d)| TextRow {
                class_id: s.class_id,
                class_name: s.class_name.clone(),
                description_index: j,
                description_text: d.clone(),
            })
        })
        .collect();
    write_embedding_file(
        Path::new(&p("text.zseb")),
        &fx.text_embeddings,
        &Sidecar::new("synthetic", RowDescriptors::Text(text_rows)),
    )?;
    let image_rows = fx
        .manifest
        .entries()
        .iter()
        .map(|e| ImageRow {
            item_id: e.item_id.clone(),
            source: e.source.clone(),
            true_label: Some(e.true_label),
        })
        .collect();
    write_embedding_file(
        Path::new(&p("images.zseb")),
        &fx.images,
        &Sidecar::new("synthetic", RowDescriptors::Image(image_rows)),
    )?;

    // Manifest rows point at image rows.
    let entries = fx
        .manifest
        .entries()
        .iter()
        .enumerate()
        .map(|(i, e)| ManifestEntry {
            embedding_ref: Some(EmbeddingRef {
                path: dir.path().join("images.zseb"),
                row: i as u64,
            }),
            ..e.clone()
        })
        .collect();
    let manifest = DatasetManifest::new(fx.manifest.class_names().to_vec(), entries)?;
    std::fs::write(p("manifest.tsv"), manifest.render())?;

    let scores = fixtures::synthetic_external_scores(&manifest, 2.0, 5);
    std::fs::write(
        p("scores.tsv"),
        render_external_scores(&manifest.item_ids(), manifest.class_names(), &scores),
    )?;

    run(&[
        "bank",
        "--prompts",
        &p("prompts.txt"),
        "--text-embeddings",
        &p("text.zseb"),
        "--out",
        &p("bank.zseb"),
    ]);
    run(&[
        "classify",
        "--bank",
        &p("bank.zseb"),
        "--images",
        &p("images.zseb"),
        "--out",
        &p("preds.jsonl"),
    ]);
    run(&[
        "folds",
        "--manifest",
        &p("manifest.tsv"),
        "--k",
        "5",
        "--seed",
        "42",
        "--out",
        &p("plan.tsv"),
    ]);
    run(&[
        "evaluate",
        "--manifest",
        &p("manifest.tsv"),
        "--mode",
        "zero-shot",
        "--bank",
        &p("bank.zseb"),
        "--out",
        &p("zs.json"),
        "--model",
        "synthetic-clip",
        "--group",
        "Multimodal CLIP Models",
    ]);
    run(&[
        "evaluate",
        "--manifest",
        &p("manifest.tsv"),
        "--mode",
        "kfold",
        "--scores",
        &p("scores.tsv"),
        "--folds",
        &p("plan.tsv"),
        "--out",
        &p("kf.json"),
        "--model",
        "synthetic-cnn",
        "--group",
        "CNN",
    ]);
    run(&[
        "report",
        "--result",
        &p("zs.json"),
        &p("kf.json"),
        "--out-dir",
        &p("report"),
    ]);
    print!("{}", std::fs::read_to_string(p("report/summary.tsv"))?);

    // Mixing run modes is a usage error.
    run(&[
        "evaluate",
        "--manifest",
        &p("manifest.tsv"),
        "--mode",
        "zero-shot",
        "--bank",
        &p("bank.zseb"),
        "--folds",
        &p("plan.tsv"),
        "--out",
        &p("bad.json"),
        "--model",
        "x",
    ]);
    Ok(())
}
