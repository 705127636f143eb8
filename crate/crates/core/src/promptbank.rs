//! Per-class description sets and the normalized text-embedding bank built
//! from them once, offline.
//!
//! Prompt documents are plain text:
//!
//! ```text
//! zeroleaf-prompts v1
//! # comment lines and blank lines are ignored
//! [Potato Early Blight]
//! This is a photo of a potato leaf with concentric brown spots ...
//! ...
//! [Potato Late Blight]
//! ...
//! ```
//!
//! The first meaningful line must be the version header. Each `[name]` line
//! opens a class; every following non-blank line is one description, taken
//! verbatim after trimming surrounding whitespace. Class ids follow document
//! order starting at 0.

use std::collections::HashSet;
use std::path::Path;

use thiserror::Error;

use crate::exchange::{self, ExchangeError, ReadOptions, RowDescriptors, Sidecar, TextRow};
use crate::vecspace::{cosine_unchecked, norm, EmbeddingMatrix, VecError};

pub const PROMPT_HEADER: &str = "zeroleaf-prompts v1";

#[derive(Debug, Error)]
pub enum BankError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("class {0:?} has no descriptions")]
    EmptyClass(String),
    #[error("class name {0:?} appears more than once")]
    DuplicateClassName(String),
    #[error("no classes defined")]
    NoClasses,
    #[error("class ids must be 0..C in order; found {found} at position {position}")]
    ClassIdGap { position: usize, found: usize },
    #[error("embedding rows {actual} != total descriptions {expected}")]
    RowCountMismatch { expected: usize, actual: usize },
    #[error("row {row}: text embedding sidecar does not match prompt document ({detail})")]
    PromptMismatch { row: usize, detail: String },
    #[error("expected a text sidecar, found image rows")]
    WrongSidecarKind,
    #[error(transparent)]
    Vec(#[from] VecError),
    #[error(transparent)]
    Exchange(#[from] ExchangeError),
}

impl BankError {
    pub fn name(&self) -> &'static str {
        match self {
            BankError::Parse { .. } => "ParseError",
            BankError::EmptyClass(_) => "EmptyClass",
            BankError::DuplicateClassName(_) => "DuplicateClassName",
            BankError::NoClasses => "NoClasses",
            BankError::ClassIdGap { .. } => "ClassIdGap",
            BankError::RowCountMismatch { .. } => "RowCountMismatch",
            BankError::PromptMismatch { .. } => "PromptMismatch",
            BankError::WrongSidecarKind => "WrongSidecarKind",
            BankError::Vec(e) => e.name(),
            BankError::Exchange(e) => e.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPromptSet {
    pub class_id: usize,
    pub class_name: String,
    pub descriptions: Vec<String>,
}

fn check_prompt_sets(sets: &[ClassPromptSet]) -> Result<(), BankError> {
    if sets.is_empty() {
        return Err(BankError::NoClasses);
    }
    let mut names = HashSet::new();
    for (position, set) in sets.iter().enumerate() {
        if set.class_id != position {
            return Err(BankError::ClassIdGap {
                position,
                found: set.class_id,
            });
        }
        if !names.insert(set.class_name.as_str()) {
            return Err(BankError::DuplicateClassName(set.class_name.clone()));
        }
        if set.descriptions.is_empty() || set.descriptions.iter().any(|d| d.trim().is_empty()) {
            return Err(BankError::EmptyClass(set.class_name.clone()));
        }
    }
    Ok(())
}

/// Parses a prompt document.
pub fn parse_prompt_sets(text: &str) -> Result<Vec<ClassPromptSet>, BankError> {
    let mut sets: Vec<ClassPromptSet> = Vec::new();
    let mut seen_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if line != PROMPT_HEADER {
                return Err(BankError::Parse {
                    line: line_no,
                    message: format!("expected header {PROMPT_HEADER:?}, found {line:?}"),
                });
            }
            seen_header = true;
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| BankError::Parse {
                line: line_no,
                message: "unterminated class header".into(),
            })?;
            let name = name.trim();
            if name.is_empty() {
                return Err(BankError::Parse {
                    line: line_no,
                    message: "empty class name".into(),
                });
            }
            if let Some(prev) = sets.last() {
                if prev.descriptions.is_empty() {
                    return Err(BankError::EmptyClass(prev.class_name.clone()));
                }
            }
            if sets.iter().any(|s| s.class_name == name) {
                return Err(BankError::DuplicateClassName(name.to_string()));
            }
            sets.push(ClassPromptSet {
                class_id: sets.len(),
                class_name: name.to_string(),
                descriptions: Vec::new(),
            });
            continue;
        }
        match sets.last_mut() {
            Some(set) => set.descriptions.push(line.to_string()),
            None => {
                return Err(BankError::Parse {
                    line: line_no,
                    message: "description before any [class] header".into(),
                })
            }
        }
    }
    if !seen_header {
        return Err(BankError::Parse {
            line: 1,
            message: format!("missing header {PROMPT_HEADER:?}"),
        });
    }
    check_prompt_sets(&sets)?;
    Ok(sets)
}

/// Reads and parses a prompt document from disk.
pub fn load_prompt_sets(path: &Path) -> Result<Vec<ClassPromptSet>, BankError> {
    let text = std::fs::read_to_string(path).map_err(|source| {
        BankError::Exchange(ExchangeError::Io {
            path: path.to_path_buf(),
            source,
        })
    })?;
    parse_prompt_sets(&text)
}

/// Renders prompt sets back into the document format.
pub fn render_prompt_document(sets: &[ClassPromptSet]) -> String {
    let mut out = String::from(PROMPT_HEADER);
    out.push('\n');
    for set in sets {
        out.push('\n');
        out.push_str(&format!("[{}]\n", set.class_name));
        for d in &set.descriptions {
            out.push_str(d);
            out.push('\n');
        }
    }
    out
}

/// One class of a [`TextEmbeddingBank`].
#[derive(Debug, Clone, PartialEq)]
pub struct BankClass {
    class_id: usize,
    class_name: String,
    descriptions: Vec<String>,
    embeddings: EmbeddingMatrix,
    /// Row index in the matrix the bank was built from, per description.
    source_rows: Vec<usize>,
}

impl BankClass {
    pub fn class_id(&self) -> usize {
        self.class_id
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }

    pub fn descriptions(&self) -> &[String] {
        &self.descriptions
    }

    /// Normalized prompt embeddings, one row per description.
    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn source_rows(&self) -> &[usize] {
        &self.source_rows
    }

    pub fn len(&self) -> usize {
        self.descriptions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptions.is_empty()
    }
}

/// Normalized text embeddings for every class description. Immutable once
/// built.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbeddingBank {
    classes: Vec<BankClass>,
    dim: usize,
    provenance: String,
}

/// Slices `embeddings` class-major into a bank, re-normalizing every row.
pub fn build_text_bank(
    prompt_sets: &[ClassPromptSet],
    embeddings: &EmbeddingMatrix,
    provenance: &str,
) -> Result<TextEmbeddingBank, BankError> {
    check_prompt_sets(prompt_sets)?;
    let expected: usize = prompt_sets.iter().map(|s| s.descriptions.len()).sum();
    if embeddings.rows() != expected {
        return Err(BankError::RowCountMismatch {
            expected,
            actual: embeddings.rows(),
        });
    }
    let mut classes = Vec::with_capacity(prompt_sets.len());
    let mut start = 0;
    for set in prompt_sets {
        let end = start + set.descriptions.len();
        classes.push(BankClass {
            class_id: set.class_id,
            class_name: set.class_name.clone(),
            descriptions: set.descriptions.clone(),
            embeddings: embeddings.slice_rows(start, end).l2_normalized()?,
            source_rows: (start..end).collect(),
        });
        start = end;
    }
    Ok(TextEmbeddingBank {
        classes,
        dim: embeddings.dim(),
        provenance: provenance.to_string(),
    })
}

/// Checks that text-embedding sidecar rows line up with the prompt sets.
pub fn check_text_rows(prompt_sets: &[ClassPromptSet], rows: &[TextRow]) -> Result<(), BankError> {
    let expected: usize = prompt_sets.iter().map(|s| s.descriptions.len()).sum();
    if rows.len() != expected {
        return Err(BankError::RowCountMismatch {
            expected,
            actual: rows.len(),
        });
    }
    let flat = prompt_sets.iter().flat_map(|s| {
        s.descriptions
            .iter()
            .enumerate()
            .map(move |(j, d)| (s.class_id, s.class_name.as_str(), j, d.as_str()))
    });
    for (row, (r, (c, name, j, text))) in rows.iter().zip(flat).enumerate() {
        let detail = if r.class_id != c {
            Some(format!("class_id {} != {}", r.class_id, c))
        } else if r.class_name != name {
            Some(format!("class_name {:?} != {:?}", r.class_name, name))
        } else if r.description_index != j {
            Some(format!(
                "description_index {} != {}",
                r.description_index, j
            ))
        } else if r.description_text != text {
            Some(format!(
                "description text differs: {:?}",
                r.description_text
            ))
        } else {
            None
        };
        if let Some(detail) = detail {
            return Err(BankError::PromptMismatch { row, detail });
        }
    }
    Ok(())
}

/// Reconstructs prompt sets from text sidecar rows.
pub fn prompt_sets_from_rows(rows: &[TextRow]) -> Result<Vec<ClassPromptSet>, BankError> {
    let mut sets: Vec<ClassPromptSet> = Vec::new();
    for (row, r) in rows.iter().enumerate() {
        match sets.last_mut() {
            Some(set) if set.class_id == r.class_id => {
                if r.class_name != set.class_name || r.description_index != set.descriptions.len() {
                    return Err(BankError::PromptMismatch {
                        row,
                        detail: "rows are not class-major in description order".into(),
                    });
                }
                set.descriptions.push(r.description_text.clone());
            }
            _ => {
                if r.class_id != sets.len() || r.description_index != 0 {
                    return Err(BankError::ClassIdGap {
                        position: sets.len(),
                        found: r.class_id,
                    });
                }
                sets.push(ClassPromptSet {
                    class_id: r.class_id,
                    class_name: r.class_name.clone(),
                    descriptions: vec![r.description_text.clone()],
                });
            }
        }
    }
    check_prompt_sets(&sets)?;
    Ok(sets)
}

impl TextEmbeddingBank {
    pub fn classes(&self) -> &[BankClass] {
        &self.classes
    }

    pub fn class(&self, class_id: usize) -> &BankClass {
        &self.classes[class_id]
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.class_name.clone()).collect()
    }

    pub fn total_descriptions(&self) -> usize {
        self.classes.iter().map(|c| c.len()).sum()
    }

    pub fn prompt_sets(&self) -> Vec<ClassPromptSet> {
        self.classes
            .iter()
            .map(|c| ClassPromptSet {
                class_id: c.class_id,
                class_name: c.class_name.clone(),
                descriptions: c.descriptions.clone(),
            })
            .collect()
    }

    /// Flattens the bank into an exchange matrix (normalized flag set) and
    /// text sidecar.
    pub fn to_exchange(&self) -> (EmbeddingMatrix, Sidecar) {
        let mut data = Vec::with_capacity(self.total_descriptions() * self.dim);
        let mut rows = Vec::with_capacity(self.total_descriptions());
        for class in &self.classes {
            data.extend_from_slice(class.embeddings.data());
            for (j, d) in class.descriptions.iter().enumerate() {
                rows.push(TextRow {
                    class_id: class.class_id,
                    class_name: class.class_name.clone(),
                    description_index: j,
                    description_text: d.clone(),
                });
            }
        }
        let matrix = EmbeddingMatrix::new(self.dim, data)
            .expect("bank rows are finite")
            .with_normalized_flag(true);
        (
            matrix,
            Sidecar::new(self.provenance.clone(), RowDescriptors::Text(rows)),
        )
    }

    pub fn from_exchange(matrix: &EmbeddingMatrix, sidecar: &Sidecar) -> Result<Self, BankError> {
        let RowDescriptors::Text(rows) = &sidecar.descriptors else {
            return Err(BankError::WrongSidecarKind);
        };
        let sets = prompt_sets_from_rows(rows)?;
        build_text_bank(&sets, matrix, &sidecar.provenance)
    }

    pub fn write(&self, path: &Path) -> Result<Sidecar, BankError> {
        let (matrix, sidecar) = self.to_exchange();
        Ok(exchange::write_embedding_file(path, &matrix, &sidecar)?)
    }

    pub fn read(path: &Path) -> Result<Self, BankError> {
        let (matrix, sidecar) = exchange::read_embedding_file(path, ReadOptions::default())?;
        Self::from_exchange(&matrix, &sidecar)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDiagnostics {
    pub class_id: usize,
    pub class_name: String,
    pub descriptions: usize,
    pub min_norm: f64,
    pub max_norm: f64,
    /// Mean cosine over all unordered description pairs; `None` when the
    /// class has a single description.
    pub mean_intra_cosine: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BankWarning {
    DuplicateRow {
        class_id: usize,
        first: usize,
        second: usize,
    },
    NormOutOfTolerance {
        class_id: usize,
        description_index: usize,
        norm: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankDiagnostics {
    pub dim: usize,
    pub classes: Vec<ClassDiagnostics>,
    pub warnings: Vec<BankWarning>,
}

/// Read-only health report for a bank.
pub fn validate_bank(bank: &TextEmbeddingBank) -> BankDiagnostics {
    const NORM_TOL: f64 = 1e-6;
    let mut warnings = Vec::new();
    let mut classes = Vec::with_capacity(bank.num_classes());
    for class in bank.classes() {
        let m = class.embeddings();
        let norms: Vec<f64> = m.iter_rows().map(norm).collect();
        for (j, &n) in norms.iter().enumerate() {
            if (n - 1.0).abs() > NORM_TOL {
                warnings.push(BankWarning::NormOutOfTolerance {
                    class_id: class.class_id,
                    description_index: j,
                    norm: n,
                });
            }
        }
        let mut pair_sum = 0.0;
        let mut pairs = 0usize;
        for a in 0..m.rows() {
            for b in a + 1..m.rows() {
                if m.row(a) == m.row(b) {
                    warnings.push(BankWarning::DuplicateRow {
                        class_id: class.class_id,
                        first: a,
                        second: b,
                    });
                }
                pair_sum += cosine_unchecked(m.row(a), m.row(b));
                pairs += 1;
            }
        }
        classes.push(ClassDiagnostics {
            class_id: class.class_id,
            class_name: class.class_name.clone(),
            descriptions: class.len(),
            min_norm: norms.iter().copied().fold(f64::INFINITY, f64::min),
            max_norm: norms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_intra_cosine: (pairs > 0).then(|| pair_sum / pairs as f64),
        });
    }
    BankDiagnostics {
        dim: bank.dim(),
        classes,
        warnings,
    }
}
