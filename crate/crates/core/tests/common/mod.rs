//! Independent oracles and randomized suites shared by the integration
//! tests and the acceptance runner. Each suite returns a one-line detail on
//! success and the first violation on failure.

#![allow(dead_code)]

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use zeroleaf::exchange::{
    decode, encode, read_embedding_file, write_embedding_file, ImageRow, ReadOptions,
    RowDescriptors, Sidecar,
};
use zeroleaf::fixtures::{self, SyntheticConfig};
use zeroleaf::harness::{
    render_summary_row, run_evaluation, stratified_kfold, ModelLabel, RunConfig, RunResult,
    ScoreSource,
};
use zeroleaf::metrics::{
    auc, confusion_matrix, macro_prf, mcc_multiclass, one_vs_rest_auc, roc_curve, ConfusionMatrix,
    MetricsReport, ReportOptions, ScoreMatrix,
};
use zeroleaf::promptbank::{build_text_bank, ClassPromptSet, TextEmbeddingBank};
use zeroleaf::vecspace::EmbeddingMatrix;
use zeroleaf::zeroshot::{classify_batch, predict, Aggregation, ClassifyOptions, ImageBatch};

pub type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($msg)+)),
        }
    };
}

pub const GOLDEN_HEX: &str =
    "5a5345420100030000000200000000000000000000803f000000c00000003f0000803e00004040000000be";
pub const GOLDEN_VALUES: [f32; 6] = [1.0, -2.0, 0.5, 0.25, 3.0, -0.125];

pub fn golden_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/golden.zseb")
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn class_names(c: usize) -> Vec<String> {
    (0..c).map(|k| format!("class-{k}")).collect()
}

/// Random prompt sets with `counts[c]` descriptions per class.
pub fn prompt_sets(counts: &[usize]) -> Vec<ClassPromptSet> {
    counts
        .iter()
        .enumerate()
        .map(|(c, &n)| ClassPromptSet {
            class_id: c,
            class_name: format!("class-{c}"),
            descriptions: (0..n)
                .map(|j| format!("class {c} description {j}"))
                .collect(),
        })
        .collect()
}

// ---------------------------------------------------------------- oracles

/// Nested-loop class scores over stored unit vectors.
pub fn oracle_scores(image: &[f32], bank: &TextEmbeddingBank, mean: bool) -> Vec<f64> {
    let mut out = Vec::new();
    for class in bank.classes() {
        let mut s = 0.0f64;
        for j in 0..class.len() {
            let t = class.embeddings().row(j);
            let mut cos = 0.0f64;
            for d in 0..image.len() {
                cos += image[d] as f64 * t[d] as f64;
            }
            s += cos;
        }
        if mean {
            s /= class.len() as f64;
        }
        out.push(s);
    }
    out
}

pub fn oracle_argmax(s: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..s.len() {
        if s[i] > s[best] {
            best = i;
        }
    }
    best
}

/// Per-class (precision, recall, f1) straight from label vectors.
pub fn oracle_prf(y_true: &[usize], y_pred: &[usize], c: usize) -> Vec<(f64, f64, f64)> {
    (0..c)
        .map(|k| {
            let mut tp = 0.0;
            let mut fp = 0.0;
            let mut fn_ = 0.0;
            for (&t, &p) in y_true.iter().zip(y_pred) {
                match (t == k, p == k) {
                    (true, true) => tp += 1.0,
                    (false, true) => fp += 1.0,
                    (true, false) => fn_ += 1.0,
                    _ => {}
                }
            }
            let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            let f = if p + r > 0.0 {
                2.0 * p * r / (p + r)
            } else {
                0.0
            };
            (p, r, f)
        })
        .collect()
}

/// Binary MCC with class 1 as the positive class.
pub fn oracle_mcc_binary(y_true: &[usize], y_pred: &[usize]) -> f64 {
    let (mut tp, mut tn, mut fp, mut fn_) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == 1, p == 1) {
            (true, true) => tp += 1.0,
            (false, false) => tn += 1.0,
            (false, true) => fp += 1.0,
            (true, false) => fn_ += 1.0,
        }
    }
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    if den == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / den
    }
}

/// Mann–Whitney pair count, ties worth one half. `None` without both
/// positives and negatives.
pub fn oracle_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let pos: Vec<f64> = scores
        .iter()
        .zip(positive)
        .filter(|(_, &p)| p)
        .map(|(s, _)| *s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(positive)
        .filter(|(_, &p)| !p)
        .map(|(s, _)| *s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for a in &pos {
        for b in &neg {
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ------------------------------------------------------------------ suites

pub fn worked_example() -> Outcome {
    // Named scores: Healthy 0.12, Early Blight 0.35, Late Blight 0.89.
    let names: Vec<String> = fixtures::POTATO_CLASSES
        .iter()
        .map(|s| s.to_string())
        .collect();
    let by_name = |n: &str| match n {
        "Potato Healthy" => 0.12,
        "Potato Early Blight" => 0.35,
        "Potato Late Blight" => 0.89,
        _ => unreachable!(),
    };
    let scores: Vec<f64> = names.iter().map(|n| by_name(n)).collect();
    let start = Instant::now();
    let p = predict(&scores, &names).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(
        p.class_name == "Potato Late Blight",
        "predicted {}",
        p.class_name
    );
    ensure!(
        p.class_id == 1 && !p.tie,
        "class {} tie {}",
        p.class_id,
        p.tie
    );
    ensure!(elapsed.as_secs_f64() < 1e-3, "took {elapsed:?}");
    Ok(format!("Potato Late Blight in {elapsed:?}"))
}

pub fn algorithm_oracle(trials: u64) -> Outcome {
    let start = Instant::now();
    let mut images_checked = 0;
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let dim = rng.random_range(1..=64);
        let c = rng.random_range(2..=10);
        let counts: Vec<usize> = (0..c).map(|_| rng.random_range(1..=8)).collect();
        let total: usize = counts.iter().sum();
        let sets = prompt_sets(&counts);
        let raw_text = gaussian(&mut rng, total * dim);
        let text = EmbeddingMatrix::new(dim, raw_text.clone()).map_err(|e| e.to_string())?;
        let bank = build_text_bank(&sets, &text, "oracle").map_err(|e| e.to_string())?;

        // Stored rows are the raw rows over their f64 norm, rounded to f32.
        let mut row = 0;
        for class in bank.classes() {
            for j in 0..class.len() {
                let r = &raw_text[row * dim..(row + 1) * dim];
                let n = r.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
                for (d, &x) in r.iter().enumerate() {
                    let want = x as f64 / n;
                    let got = class.embeddings().row(j)[d] as f64;
                    ensure!(
                        close(want, got, 1e-6),
                        "trial {trial}: bank row {row} not normalized"
                    );
                }
                row += 1;
            }
        }

        let m = rng.random_range(1..=20);
        let ids: Vec<String> = (0..m).map(|i| format!("img-{i}")).collect();
        let images = EmbeddingMatrix::new(dim, gaussian(&mut rng, m * dim))
            .and_then(|x| x.l2_normalized())
            .map_err(|e| e.to_string())?;
        let batch = ImageBatch::new(ids, vec![None; m], images).map_err(|e| e.to_string())?;
        let aggregation = if trial % 2 == 0 {
            Aggregation::Sum
        } else {
            Aggregation::Mean
        };
        let records = classify_batch(
            &batch,
            &bank,
            ClassifyOptions {
                aggregation,
                tie_tol: 0.0,
            },
        )
        .map_err(|e| e.to_string())?;
        ensure!(
            records.len() == m,
            "trial {trial}: {} records for {m} images",
            records.len()
        );
        for (i, r) in records.iter().enumerate() {
            let u = batch.embeddings.row(i);
            let s = oracle_scores(u, &bank, aggregation == Aggregation::Mean);
            for (a, b) in s.iter().zip(&r.scores.class_scores) {
                worst = worst.max((a - b).abs());
                ensure!(
                    close(*a, *b, 1e-12),
                    "trial {trial} image {i}: S {a} vs {b}"
                );
            }
            let want = oracle_argmax(&s);
            ensure!(
                r.predicted_label == want,
                "trial {trial} image {i}: predicted {} oracle {want}",
                r.predicted_label
            );
            // Best single description: strict improvement, class-major scan.
            let mut best = (0usize, 0usize, f64::NEG_INFINITY);
            for class in bank.classes() {
                for j in 0..class.len() {
                    let t = class.embeddings().row(j);
                    let cos: f64 = u.iter().zip(t).map(|(&a, &b)| a as f64 * b as f64).sum();
                    if cos > best.2 {
                        best = (class.class_id(), j, cos);
                    }
                }
            }
            let bd = &r.best_description;
            ensure!(
                (bd.class_id, bd.description_index) == (best.0, best.1),
                "trial {trial} image {i}: best description mismatch"
            );
            images_checked += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    Ok(format!(
        "{trials} instances, {images_checked} images, max |ΔS| {worst:.1e}, {elapsed:.2?}"
    ))
}

fn random_scores(rng: &mut ChaCha8Rng, n: usize, c: usize) -> ScoreMatrix {
    let discrete = rng.random_bool(0.4);
    let data = (0..n * c)
        .map(|_| {
            if discrete {
                rng.random_range(0..5) as f64 / 4.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    ScoreMatrix::new(c, data).unwrap()
}

pub fn metrics_oracle(trials: u64) -> Outcome {
    let start = Instant::now();
    let (mut binary, mut aucs) = (0, 0);
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + trial);
        let n = rng.random_range(1..=50);
        let c = rng.random_range(2..=5);
        let y_true: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let y_pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let scores = random_scores(&mut rng, n, c);

        let m = confusion_matrix(&y_true, &y_pred, c).map_err(|e| e.to_string())?;
        let prf = macro_prf(&m);
        let oracle = oracle_prf(&y_true, &y_pred, c);
        for (k, (got, want)) in prf.per_class.iter().zip(&oracle).enumerate() {
            ensure!(
                close(got.precision, want.0, 1e-12)
                    && close(got.recall, want.1, 1e-12)
                    && close(got.f1, want.2, 1e-12),
                "trial {trial} class {k}: prf mismatch"
            );
        }
        let mean = |f: fn(&(f64, f64, f64)) -> f64| oracle.iter().map(f).sum::<f64>() / c as f64;
        ensure!(
            close(prf.precision_macro, mean(|x| x.0), 1e-12)
                && close(prf.recall_macro, mean(|x| x.1), 1e-12)
                && close(prf.f1_macro, mean(|x| x.2), 1e-12),
            "trial {trial}: macro mismatch"
        );

        let mcc = mcc_multiclass(&m);
        ensure!(
            close(mcc, mcc_multiclass(&m.transpose()), 1e-12),
            "trial {trial}: MCC not symmetric under transposition"
        );
        ensure!(
            (-1.0..=1.0).contains(&mcc),
            "trial {trial}: MCC {mcc} out of range"
        );
        if c == 2 {
            let want = oracle_mcc_binary(&y_true, &y_pred);
            ensure!(
                close(mcc, want, 1e-12),
                "trial {trial}: MCC {mcc} vs binary {want}"
            );
            binary += 1;
        }

        let ovr = one_vs_rest_auc(&scores, &y_true).map_err(|e| e.to_string())?;
        for k in 0..c {
            let positive: Vec<bool> = y_true.iter().map(|&t| t == k).collect();
            let want = oracle_auc(&scores.column(k), &positive);
            match (ovr.per_class[k], want) {
                (None, None) => {}
                (Some(a), Some(b)) if close(a, b, 1e-12) => aucs += 1,
                (a, b) => {
                    return Err(format!(
                        "trial {trial} class {k}: AUC {a:?} vs oracle {b:?}"
                    ))
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    Ok(format!(
        "{trials} instances, {binary} binary MCC checks, {aucs} AUCs, {elapsed:.2?}"
    ))
}

fn random_bank(
    rng: &mut ChaCha8Rng,
    counts: &[usize],
    dim: usize,
) -> (Vec<ClassPromptSet>, EmbeddingMatrix) {
    let total: usize = counts.iter().sum();
    let m = EmbeddingMatrix::new(dim, gaussian(rng, total * dim)).unwrap();
    (prompt_sets(counts), m)
}

fn classify_raw(
    bank: &TextEmbeddingBank,
    raw: &EmbeddingMatrix,
    aggregation: Aggregation,
) -> Vec<(usize, Vec<f64>)> {
    let ids = (0..raw.rows()).map(|i| i.to_string()).collect();
    let batch = ImageBatch::new(ids, vec![None; raw.rows()], raw.l2_normalized().unwrap()).unwrap();
    classify_batch(
        &batch,
        bank,
        ClassifyOptions {
            aggregation,
            tie_tol: 0.0,
        },
    )
    .unwrap()
    .into_iter()
    .map(|r| (r.predicted_label, r.scores.class_scores))
    .collect()
}

/// Argmax unchanged when unnormalized image embeddings are scaled by λ > 0.
pub fn scale_invariance(trials: u64) -> Outcome {
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + trial);
        let dim = rng.random_range(2..=48);
        let c = rng.random_range(2..=6);
        let counts: Vec<usize> = (0..c).map(|_| rng.random_range(1..=6)).collect();
        let (sets, text) = random_bank(&mut rng, &counts, dim);
        let bank = build_text_bank(&sets, &text, "t").unwrap();
        let raw = EmbeddingMatrix::new(dim, gaussian(&mut rng, 8 * dim)).unwrap();
        let lambda = 10f32.powf(rng.random_range(-3.0..3.0));
        let scaled =
            EmbeddingMatrix::new(dim, raw.data().iter().map(|x| x * lambda).collect()).unwrap();
        let a = classify_raw(&bank, &raw, Aggregation::Sum);
        let b = classify_raw(&bank, &scaled, Aggregation::Sum);
        for (i, (x, y)) in a.iter().zip(&b).enumerate() {
            ensure!(
                x.0 == y.0,
                "trial {trial} image {i}: λ = {lambda} changed the prediction"
            );
        }
    }
    Ok(format!("{trials} trials"))
}

/// Reordering descriptions within each class leaves scores and predictions
/// unchanged, and the best description follows its text.
pub fn permutation_invariance(trials: u64) -> Outcome {
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(8000 + trial);
        let dim = rng.random_range(2..=48);
        let c = rng.random_range(2..=6);
        let counts: Vec<usize> = (0..c).map(|_| rng.random_range(1..=8)).collect();
        let (sets, text) = random_bank(&mut rng, &counts, dim);
        let mut psets = sets.clone();
        let mut rows = Vec::new();
        let mut start = 0;
        for (set, pset) in sets.iter().zip(psets.iter_mut()) {
            let mut order: Vec<usize> = (0..set.descriptions.len()).collect();
            order.shuffle(&mut rng);
            pset.descriptions = order.iter().map(|&j| set.descriptions[j].clone()).collect();
            rows.extend(order.iter().map(|&j| start + j));
            start += set.descriptions.len();
        }
        let bank = build_text_bank(&sets, &text, "t").unwrap();
        let pbank = build_text_bank(&psets, &text.select_rows(&rows), "t").unwrap();
        let raw = EmbeddingMatrix::new(dim, gaussian(&mut rng, 8 * dim)).unwrap();
        let images = raw.l2_normalized().unwrap();
        let ids: Vec<String> = (0..8).map(|i| i.to_string()).collect();
        let batch = ImageBatch::new(ids, vec![None; 8], images).unwrap();
        let a = classify_batch(&batch, &bank, ClassifyOptions::default()).unwrap();
        let b = classify_batch(&batch, &pbank, ClassifyOptions::default()).unwrap();
        for (i, (x, y)) in a.iter().zip(&b).enumerate() {
            ensure!(
                x.predicted_label == y.predicted_label,
                "trial {trial} image {i}: prediction changed"
            );
            for (s, t) in x.scores.class_scores.iter().zip(&y.scores.class_scores) {
                ensure!(
                    close(*s, *t, 1e-12),
                    "trial {trial} image {i}: score {s} vs {t}"
                );
            }
            ensure!(
                x.best_description.description_text == y.best_description.description_text,
                "trial {trial} image {i}: best description moved"
            );
        }
    }
    Ok(format!("{trials} trials"))
}

/// With equal description counts, sum and mean pick the same class.
pub fn sum_mean_equivalence(trials: u64) -> Outcome {
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + trial);
        let dim = rng.random_range(2..=48);
        let c = rng.random_range(2..=8);
        let n = rng.random_range(1..=8);
        let (sets, text) = random_bank(&mut rng, &vec![n; c], dim);
        let bank = build_text_bank(&sets, &text, "t").unwrap();
        let raw = EmbeddingMatrix::new(dim, gaussian(&mut rng, 8 * dim)).unwrap();
        let a = classify_raw(&bank, &raw, Aggregation::Sum);
        let b = classify_raw(&bank, &raw, Aggregation::Mean);
        for (i, (x, y)) in a.iter().zip(&b).enumerate() {
            ensure!(
                x.0 == y.0,
                "trial {trial} image {i}: sum picks {} mean picks {}",
                x.0,
                y.0
            );
        }
    }
    Ok(format!("{trials} trials"))
}

/// Swapping positives and negatives maps AUC to 1 − AUC.
pub fn auc_label_flip(trials: u64) -> Outcome {
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + trial);
        let n = rng.random_range(2..=60);
        let scores = random_scores(&mut rng, n, 1).column(0);
        let mut positive: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        positive[0] = true;
        positive[1] = false;
        let flipped: Vec<bool> = positive.iter().map(|p| !p).collect();
        let a = auc(&roc_curve(&scores, &positive).unwrap()).unwrap();
        let b = auc(&roc_curve(&scores, &flipped).unwrap()).unwrap();
        ensure!(close(a + b, 1.0, 1e-12), "trial {trial}: {a} + {b} ≠ 1");
    }
    Ok(format!("{trials} trials"))
}

/// Permuting items jointly leaves every metric unchanged.
pub fn joint_shuffle_invariance(trials: u64) -> Outcome {
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(11_000 + trial);
        let n = rng.random_range(2..=50);
        let c = rng.random_range(2..=5);
        let y_true: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let y_pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let scores = random_scores(&mut rng, n, c);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let yt: Vec<usize> = order.iter().map(|&i| y_true[i]).collect();
        let yp: Vec<usize> = order.iter().map(|&i| y_pred[i]).collect();
        let s = scores.select_rows(&order);
        let a =
            MetricsReport::compute(&y_true, &y_pred, &scores, ReportOptions::default()).unwrap();
        let b = MetricsReport::compute(&yt, &yp, &s, ReportOptions::default()).unwrap();
        ensure!(a == b, "trial {trial}: report changed under joint shuffle");
    }
    Ok(format!("{trials} trials"))
}

fn synthetic_f1(sigma: f64) -> Result<(f64, f64), String> {
    let manifest = fixtures::balanced_manifest(&fixtures::POTATO_CLASSES, 100, "synthetic");
    let fx = fixtures::synthetic_zero_shot(
        fixtures::potato_prompt_sets(),
        manifest,
        SyntheticConfig {
            dim: 64,
            prompt_sigma: 0.05,
            image_sigma: sigma,
            seed: 17,
        },
    );
    let mut max_cos = 0.0f64;
    for i in 0..fx.centroids.len() {
        for j in i + 1..fx.centroids.len() {
            let d: f64 = fx.centroids[i]
                .iter()
                .zip(&fx.centroids[j])
                .map(|(a, b)| a * b)
                .sum();
            max_cos = max_cos.max(d.abs());
        }
    }
    let bank = build_text_bank(&fx.prompt_sets, &fx.text_embeddings, "synthetic")
        .map_err(|e| e.to_string())?;
    let config = RunConfig {
        run_id: format!("sigma-{sigma}"),
        model: ModelLabel {
            group: "synthetic".into(),
            name: "synthetic".into(),
        },
        ovr_mcc: false,
    };
    let r = run_evaluation(
        &fx.manifest,
        ScoreSource::ZeroShot {
            bank: &bank,
            images: &fx.images,
            options: ClassifyOptions::default(),
        },
        None,
        &config,
    )
    .map_err(|e| e.to_string())?;
    Ok((r.overall.f1_macro, max_cos))
}

pub fn synthetic_end_to_end() -> Outcome {
    let start = Instant::now();
    let (clean, max_cos) = synthetic_f1(0.05)?;
    ensure!(max_cos < 0.1, "centroid cosine {max_cos}");
    ensure!(clean >= 0.99, "macro F1 {clean} at σ = 0.05");
    let (noisy, _) = synthetic_f1(20.0)?;
    ensure!((0.15..=0.50).contains(&noisy), "macro F1 {noisy} at σ = 20");
    let elapsed = start.elapsed();
    ensure!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    Ok(format!(
        "F1 {clean:.4} at σ = 0.05, {noisy:.4} at σ = 20, max centroid cos {max_cos:.1e}, {elapsed:.2?}"
    ))
}

fn field_test_kfold_run() -> Result<RunResult, String> {
    let manifest = fixtures::field_test_manifest();
    let scores = fixtures::synthetic_external_scores(&manifest, 1.2, 99);
    let plan = stratified_kfold(&manifest, 5, 42).map_err(|e| e.to_string())?;
    run_evaluation(
        &manifest,
        ScoreSource::External {
            scores: &scores,
            tie_tol: 0.0,
        },
        Some(&plan),
        &RunConfig {
            run_id: "kfold".into(),
            model: ModelLabel {
                group: "g".into(),
                name: "m".into(),
            },
            ovr_mcc: false,
        },
    )
    .map_err(|e| e.to_string())
}

pub fn fold_plan_properties() -> Outcome {
    let manifest = fixtures::field_test_manifest();
    let plan = stratified_kfold(&manifest, 5, 42).map_err(|e| e.to_string())?;
    let folds = plan.fold_indices(&manifest).map_err(|e| e.to_string())?;
    let mut seen = vec![0u32; manifest.len()];
    for f in &folds {
        for &i in f {
            seen[i] += 1;
        }
    }
    ensure!(
        seen.iter().all(|&s| s == 1),
        "folds are not a disjoint cover"
    );
    let labels = manifest.labels();
    let totals = [203usize, 480, 262];
    for (k, f) in folds.iter().enumerate() {
        for (c, &n_c) in totals.iter().enumerate() {
            let got = f.iter().filter(|&&i| labels[i] == c).count() as f64;
            ensure!(
                (got - n_c as f64 / 5.0).abs() <= 1.0,
                "fold {k} class {c}: {got} items, ideal {}",
                n_c as f64 / 5.0
            );
        }
    }
    ensure!(
        plan == stratified_kfold(&manifest, 5, 42).map_err(|e| e.to_string())?,
        "same seed gave a different plan"
    );

    let r = field_test_kfold_run()?;
    let n = r.folds.len() as f64;
    let mean = |f: fn(&MetricsReport) -> f64| r.folds.iter().map(|x| f(&x.report)).sum::<f64>() / n;
    let m = &r.cross_fold_mean;
    ensure!(
        close(m.precision_macro, mean(|x| x.precision_macro), 1e-12)
            && close(m.recall_macro, mean(|x| x.recall_macro), 1e-12)
            && close(m.f1_macro, mean(|x| x.f1_macro), 1e-12)
            && close(m.mcc, mean(|x| x.mcc), 1e-12),
        "cross-fold means differ from per-fold arithmetic means"
    );
    Ok(format!(
        "fold sizes {:?}, cross-fold F1 {:.4}",
        folds.iter().map(Vec::len).collect::<Vec<_>>(),
        m.f1_macro
    ))
}

pub fn per_source_consistency() -> Outcome {
    let manifest = fixtures::field_test_manifest();
    let fx = fixtures::synthetic_zero_shot(
        fixtures::potato_prompt_sets(),
        manifest,
        SyntheticConfig {
            image_sigma: 0.2,
            ..SyntheticConfig::default()
        },
    );
    let bank =
        build_text_bank(&fx.prompt_sets, &fx.text_embeddings, "s").map_err(|e| e.to_string())?;
    let zero_shot = run_evaluation(
        &fx.manifest,
        ScoreSource::ZeroShot {
            bank: &bank,
            images: &fx.images,
            options: ClassifyOptions::default(),
        },
        None,
        &RunConfig {
            run_id: "zs".into(),
            model: ModelLabel {
                group: "g".into(),
                name: "m".into(),
            },
            ovr_mcc: false,
        },
    )
    .map_err(|e| e.to_string())?;
    let mut checked = Vec::new();
    for r in [zero_shot, field_test_kfold_run()?] {
        let mut sum = ConfusionMatrix::zeros(3);
        for s in &r.per_source {
            sum = sum.merged(&s.report.confusion).map_err(|e| e.to_string())?;
        }
        ensure!(
            sum == r.overall.confusion,
            "{}: per-source matrices do not sum to overall",
            r.run_id
        );
        let totals: Vec<(String, u64)> = r
            .per_source
            .iter()
            .map(|s| (s.source.clone(), s.report.confusion.total()))
            .collect();
        let want = [
            ("Farmy", 224),
            ("Africa", 94),
            ("Peru", 346),
            ("Internet", 281),
        ];
        ensure!(
            totals
                .iter()
                .zip(want)
                .all(|((a, n), (b, m))| a == b && *n == m),
            "per-source totals {totals:?}"
        );
        ensure!(
            r.overall.confusion.total() == 945,
            "grand total {}",
            r.overall.confusion.total()
        );
        checked.push(r.run_id);
    }
    Ok(format!("224 + 94 + 346 + 281 = 945 for runs {checked:?}"))
}

pub fn exchange_format(trials: u64) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(12_000 + trial);
        let dim = rng.random_range(1..=96);
        let rows = rng.random_range(0..=40);
        let mut m = EmbeddingMatrix::new(dim, gaussian(&mut rng, rows * dim)).unwrap();
        if trial % 3 == 0 && rows > 0 {
            m = m.l2_normalized().unwrap();
        }
        let desc = (0..rows)
            .map(|i| ImageRow {
                item_id: format!("t{trial}-{i}"),
                source: "rt".into(),
                true_label: (i % 2 == 0).then_some(i % 3),
            })
            .collect();
        let path = dir.path().join(format!("t{trial}.zseb"));
        let sidecar =
            write_embedding_file(&path, &m, &Sidecar::new("rt", RowDescriptors::Image(desc)))
                .map_err(|e| e.to_string())?;
        let (back, sc) =
            read_embedding_file(&path, ReadOptions { strict: true }).map_err(|e| e.to_string())?;
        let bits = |x: &EmbeddingMatrix| x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        ensure!(
            bits(&back) == bits(&m) && back.dim() == dim,
            "trial {trial}: payload changed"
        );
        ensure!(
            back.is_normalized() == m.is_normalized(),
            "trial {trial}: flag changed"
        );
        ensure!(sc == sidecar, "trial {trial}: sidecar changed");
    }

    let golden = std::fs::read(golden_path()).map_err(|e| e.to_string())?;
    let hex: String = golden.iter().map(|b| format!("{b:02x}")).collect();
    ensure!(hex == GOLDEN_HEX, "golden file bytes changed: {hex}");
    let m = EmbeddingMatrix::new(3, GOLDEN_VALUES.to_vec()).unwrap();
    ensure!(
        encode(&m) == golden,
        "encoder output differs from golden bytes"
    );
    let (gm, _) =
        read_embedding_file(&golden_path(), ReadOptions::default()).map_err(|e| e.to_string())?;
    ensure!(gm.data() == GOLDEN_VALUES, "golden values differ");

    let mut bad = golden.clone();
    bad[0] = b'X';
    ensure!(
        matches!(decode(&bad), Err(e) if e.name() == "BadMagic"),
        "bad magic not detected"
    );
    let short = &golden[..golden.len() - 3];
    ensure!(
        matches!(decode(short), Err(e) if e.name() == "TruncatedPayload"),
        "truncated payload not detected"
    );
    let path = dir.path().join("corrupt.zseb");
    std::fs::copy(golden_path(), &path).map_err(|e| e.to_string())?;
    std::fs::copy(
        golden_path().with_extension("zseb.json"),
        dir.path().join("corrupt.zseb.json"),
    )
    .map_err(|e| e.to_string())?;
    let mut flipped = golden.clone();
    flipped[golden.len() - 1] ^= 0x40;
    std::fs::write(&path, flipped).map_err(|e| e.to_string())?;
    ensure!(
        matches!(read_embedding_file(&path, ReadOptions::default()), Err(e) if e.name() == "DigestMismatch"),
        "digest mismatch not detected"
    );
    Ok(format!(
        "{trials} round trips bit-exact, golden bytes stable, 3 error cases raised"
    ))
}

pub fn report_fidelity() -> Outcome {
    let r = fixtures::published_clip_result();
    let row = render_summary_row(&r);
    ensure!(
        row.ends_with("CLIP-ViT-B-16 | 67.30 | 66.21 | 66.29"),
        "summary row {row:?}"
    );
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    zeroleaf::harness::emit_report(&[r], &[zeroleaf::harness::ReportFormat::Tsv], dir.path())
        .map_err(|e| e.to_string())?;
    let tsv = std::fs::read_to_string(dir.path().join("summary.tsv")).map_err(|e| e.to_string())?;
    let mut lines = tsv.lines();
    ensure!(
        lines.next() == Some("Group\tModel\tMacro Precision\tMacro Recall\tMacro F1-score"),
        "summary.tsv header"
    );
    ensure!(
        lines.next() == Some("Multimodal CLIP Models\tCLIP-ViT-B-16\t67.30\t66.21\t66.29"),
        "summary.tsv row"
    );
    Ok(row)
}
