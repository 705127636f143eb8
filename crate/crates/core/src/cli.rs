//! Command-line surface: `bank`, `classify`, `folds`, `evaluate`, `report`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error. Each successful
//! subcommand prints one summary line on stdout. Setting `ZEROLEAF_LOG` to
//! anything but `0` adds progress lines on stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::exchange::{read_embedding_file, ReadOptions, RowDescriptors};
use crate::harness::{
    emit_report, ingest_external_scores, load_manifest, run_evaluation, stratified_kfold,
    DatasetManifest, FoldPlan, HarnessError, ModelLabel, ReportFormat, RunConfig, RunResult,
    ScoreSource,
};
use crate::promptbank::{build_text_bank, load_prompt_sets, BankError, TextEmbeddingBank};
use crate::vecspace::EmbeddingMatrix;
use crate::zeroshot::{
    classify_batch, write_predictions, Aggregation, ClassifyOptions, ImageBatch,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "zeroleaf",
    version,
    about = "Zero-shot prompt-ensemble classification and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Classify every item once with a text bank.
    ZeroShot,
    /// Evaluate an external score file over a fold plan.
    Kfold,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a normalized text-embedding bank.
    Bank {
        /// Prompt document.
        #[arg(long)]
        prompts: PathBuf,
        /// ZSEB file with one row per prompt, class-major.
        #[arg(long)]
        text_embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the provenance recorded in the embedding sidecar.
        #[arg(long)]
        provenance: Option<String>,
    },
    /// Classify image embeddings and write JSONL prediction records.
    Classify {
        #[arg(long)]
        bank: PathBuf,
        /// ZSEB file with an image sidecar.
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = Aggregation::Sum)]
        aggregation: Aggregation,
        #[arg(long, default_value_t = 0.0)]
        tie_tol: f64,
    },
    /// Write a stratified k-fold plan for a manifest.
    Folds {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an evaluation and write its result document.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Text bank (zero-shot).
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Image embeddings keyed by item id (zero-shot). Defaults to the
        /// manifest's embedding references.
        #[arg(long)]
        images: Option<PathBuf>,
        /// External score file (kfold).
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Fold plan (kfold).
        #[arg(long)]
        folds: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long, default_value = "")]
        group: String,
        #[arg(long)]
        run_id: Option<String>,
        #[arg(long, default_value_t = Aggregation::Sum)]
        aggregation: Aggregation,
        #[arg(long, default_value_t = 0.0)]
        tie_tol: f64,
        /// Also report macro one-vs-rest MCC.
        #[arg(long)]
        ovr_mcc: bool,
    },
    /// Render one or more result documents.
    Report {
        #[arg(long = "result", required = true, num_args = 1..)]
        results: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Comma-separated: json, tsv, text.
        #[arg(long, value_delimiter = ',', default_value = "json,tsv,text")]
        format: Vec<String>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{name}: {message}")]
    Runtime { name: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime { .. } => EXIT_RUNTIME,
        }
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Runtime { name: e.name(), message: e.to_string() }
            }
        }
    )*};
}

runtime_from!(
    HarnessError,
    BankError,
    crate::exchange::ExchangeError,
    crate::zeroshot::ZeroShotError,
    crate::vecspace::VecError
);

fn log(msg: impl AsRef<str>) {
    if std::env::var("ZEROLEAF_LOG").is_ok_and(|v| v != "0") {
        eprintln!("zeroleaf: {}", msg.as_ref());
    }
}

/// Parses `argv` (including the program name), runs the subcommand, prints
/// its output, and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!(
                    "\n{}",
                    <Cli as clap::CommandFactory>::command().render_usage()
                );
            }
            e.exit_code()
        }
    }
}

/// Runs a parsed subcommand and returns its summary line.
pub fn execute(command: Command) -> Result<String, CliError> {
    match command {
        Command::Bank {
            prompts,
            text_embeddings,
            out,
            provenance,
        } => cmd_bank(&prompts, &text_embeddings, &out, provenance),
        Command::Classify {
            bank,
            images,
            out,
            aggregation,
            tie_tol,
        } => cmd_classify(
            &bank,
            &images,
            &out,
            ClassifyOptions {
                aggregation,
                tie_tol: check_tol(tie_tol)?,
            },
        ),
        Command::Folds {
            manifest,
            k,
            seed,
            out,
        } => {
            let m = load_manifest(&manifest)?;
            let plan = stratified_kfold(&m, k, seed)?;
            for w in &plan.warnings {
                eprintln!("warning: {w}");
            }
            plan.write(&out)?;
            Ok(format!(
                "folds: k={k} seed={seed} items={} -> {}",
                m.len(),
                out.display()
            ))
        }
        Command::Evaluate {
            manifest,
            mode,
            bank,
            images,
            scores,
            folds,
            out,
            model,
            group,
            run_id,
            aggregation,
            tie_tol,
            ovr_mcc,
        } => {
            let tie_tol = check_tol(tie_tol)?;
            let config = RunConfig {
                run_id: run_id.unwrap_or_else(|| model.clone()),
                model: ModelLabel { group, name: model },
                ovr_mcc,
            };
            let result = match mode {
                ModeArg::ZeroShot => {
                    if folds.is_some() || scores.is_some() {
                        return Err(CliError::Usage(
                            "ModeMismatch: zero-shot runs take no --folds or --scores".into(),
                        ));
                    }
                    let bank = bank.ok_or_else(|| {
                        CliError::Usage("--mode zero-shot requires --bank".into())
                    })?;
                    let m = load_manifest(&manifest)?;
                    let bank = TextEmbeddingBank::read(&bank)?;
                    let images = match images {
                        Some(p) => images_by_id(&p, &m)?,
                        None => m.resolve_embeddings()?,
                    };
                    log(format!("zero-shot over {} items", m.len()));
                    let source = ScoreSource::ZeroShot {
                        bank: &bank,
                        images: &images,
                        options: ClassifyOptions {
                            aggregation,
                            tie_tol,
                        },
                    };
                    run_evaluation(&m, source, None, &config)?
                }
                ModeArg::Kfold => {
                    if bank.is_some() || images.is_some() {
                        return Err(CliError::Usage(
                            "ModeMismatch: kfold runs take no --bank or --images".into(),
                        ));
                    }
                    let (Some(scores), Some(folds)) = (scores, folds) else {
                        return Err(CliError::Usage(
                            "--mode kfold requires --scores and --folds".into(),
                        ));
                    };
                    let m = load_manifest(&manifest)?;
                    let s = ingest_external_scores(&scores, &m)?;
                    let plan = FoldPlan::read(&folds)?;
                    log(format!("kfold over {} items, k = {}", m.len(), plan.k));
                    run_evaluation(
                        &m,
                        ScoreSource::External {
                            scores: &s,
                            tie_tol,
                        },
                        Some(&plan),
                        &config,
                    )?
                }
            };
            result.write(&out)?;
            Ok(format!(
                "evaluate: {} items={} folds={} macro_f1={:.4} mcc={:.4} -> {}",
                result.run_id,
                result.items.len(),
                result.folds.len(),
                result.cross_fold_mean.f1_macro,
                result.cross_fold_mean.mcc,
                out.display()
            ))
        }
        Command::Report {
            results,
            out_dir,
            format,
        } => {
            let formats = format
                .iter()
                .map(|f| f.parse::<ReportFormat>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let runs = results
                .iter()
                .map(|p| RunResult::read(p))
                .collect::<Result<Vec<_>, _>>()?;
            let written = emit_report(&runs, &formats, &out_dir)?;
            Ok(format!(
                "report: runs={} files={} -> {}",
                runs.len(),
                written.len(),
                out_dir.display()
            ))
        }
    }
}

fn check_tol(tie_tol: f64) -> Result<f64, CliError> {
    if tie_tol.is_finite() && tie_tol >= 0.0 {
        Ok(tie_tol)
    } else {
        Err(CliError::Usage(format!(
            "--tie-tol must be finite and ≥ 0, got {tie_tol}"
        )))
    }
}

fn cmd_bank(
    prompts: &Path,
    text_embeddings: &Path,
    out: &Path,
    provenance: Option<String>,
) -> Result<String, CliError> {
    let sets = load_prompt_sets(prompts)?;
    let (matrix, sidecar) = read_embedding_file(text_embeddings, ReadOptions::default())?;
    if let RowDescriptors::Text(rows) = &sidecar.descriptors {
        crate::promptbank::check_text_rows(&sets, rows)?;
    }
    let provenance = provenance.unwrap_or(sidecar.provenance);
    let bank = build_text_bank(&sets, &matrix, &provenance)?;
    let diag = crate::promptbank::validate_bank(&bank);
    for w in &diag.warnings {
        eprintln!("warning: {w:?}");
    }
    bank.write(out)?;
    Ok(format!(
        "bank: classes={} descriptions={} dim={} -> {}",
        bank.num_classes(),
        bank.total_descriptions(),
        bank.dim(),
        out.display()
    ))
}

fn cmd_classify(
    bank: &Path,
    images: &Path,
    out: &Path,
    options: ClassifyOptions,
) -> Result<String, CliError> {
    let bank = TextEmbeddingBank::read(bank)?;
    let (matrix, sidecar) = read_embedding_file(images, ReadOptions::default())?;
    let RowDescriptors::Image(rows) = sidecar.descriptors else {
        return Err(CliError::Runtime {
            name: "WrongSidecarKind",
            message: format!("{} does not describe image rows", images.display()),
        });
    };
    let batch = ImageBatch::new(
        rows.iter().map(|r| r.item_id.clone()).collect(),
        rows.iter().map(|r| r.true_label).collect(),
        matrix.l2_normalized()?,
    )?;
    let records = classify_batch(&batch, &bank, options)?;
    write_predictions(out, &records)?;
    let ties = records.iter().filter(|r| r.tie).count();
    Ok(format!(
        "classify: items={} classes={} aggregation={} ties={ties} -> {}",
        records.len(),
        bank.num_classes(),
        options.aggregation,
        out.display()
    ))
}

/// Image rows from an image-sidecar file, reordered to manifest order.
fn images_by_id(path: &Path, manifest: &DatasetManifest) -> Result<EmbeddingMatrix, CliError> {
    let (matrix, sidecar) = read_embedding_file(path, ReadOptions::default())?;
    let RowDescriptors::Image(rows) = sidecar.descriptors else {
        return Err(CliError::Runtime {
            name: "WrongSidecarKind",
            message: format!("{} does not describe image rows", path.display()),
        });
    };
    let index: std::collections::HashMap<&str, usize> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (r.item_id.as_str(), i))
        .collect();
    let mut missing = Vec::new();
    let picks: Vec<usize> = manifest
        .entries()
        .iter()
        .filter_map(|e| {
            let found = index.get(e.item_id.as_str()).copied();
            if found.is_none() {
                missing.push(e.item_id.clone());
            }
            found
        })
        .collect();
    if !missing.is_empty() {
        return Err(HarnessError::UnresolvableEmbeddingRef { ids: missing }.into());
    }
    Ok(matrix.select_rows(&picks))
}
