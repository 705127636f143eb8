//! Dataset manifest documents.
//!
//! ```text
//! zeroleaf-manifest v1
//! classes	Potato Early Blight	Potato Late Blight	Potato Healthy
//! # item_id	source	label	embedding_ref
//! farmy-0001	Farmy	Potato Early Blight	field.zseb#0
//! ```
//!
//! Fields are tab-separated. `label` is a class name from the `classes`
//! line. `embedding_ref` is `<file>#<row>` (file relative to the manifest's
//! directory) or `-` for items that carry no embedding, such as items only
//! evaluated through external scores.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{meaningful_lines, tab_fields, HarnessError};
use crate::exchange::{read_embedding_file, read_header, ReadOptions, RowDescriptors};
use crate::vecspace::EmbeddingMatrix;

pub const MANIFEST_HEADER: &str = "zeroleaf-manifest v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingRef {
    pub path: PathBuf,
    pub row: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub item_id: String,
    pub source: String,
    pub true_label: usize,
    pub embedding_ref: Option<EmbeddingRef>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    class_names: Vec<String>,
    entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceTally {
    pub source: String,
    pub per_class: Vec<usize>,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tallies {
    /// In order of first appearance in the manifest.
    pub sources: Vec<SourceTally>,
    pub overall: Vec<usize>,
    pub total: usize,
}

impl DatasetManifest {
    pub fn new(
        class_names: Vec<String>,
        entries: Vec<ManifestEntry>,
    ) -> Result<Self, HarnessError> {
        if class_names.is_empty() {
            return Err(HarnessError::Parse {
                path: String::new(),
                line: 0,
                message: "manifest declares no classes".into(),
            });
        }
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !seen.insert(e.item_id.as_str()) {
                return Err(HarnessError::DuplicateItemId(e.item_id.clone()));
            }
            if e.true_label >= class_names.len() {
                return Err(HarnessError::Parse {
                    path: String::new(),
                    line: 0,
                    message: format!(
                        "item {:?} has label {} out of range",
                        e.item_id, e.true_label
                    ),
                });
            }
        }
        Ok(Self {
            class_names,
            entries,
        })
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn item_ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.item_id.clone()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.true_label).collect()
    }

    /// Source tags in order of first appearance.
    pub fn sources(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.source) {
                out.push(e.source.clone());
            }
        }
        out
    }

    pub fn tallies(&self) -> Tallies {
        let c = self.num_classes();
        let mut sources: Vec<SourceTally> = Vec::new();
        let mut overall = vec![0; c];
        for e in &self.entries {
            overall[e.true_label] += 1;
            let idx = match sources.iter().position(|s| s.source == e.source) {
                Some(i) => i,
                None => {
                    sources.push(SourceTally {
                        source: e.source.clone(),
                        per_class: vec![0; c],
                        total: 0,
                    });
                    sources.len() - 1
                }
            };
            sources[idx].per_class[e.true_label] += 1;
            sources[idx].total += 1;
        }
        Tallies {
            sources,
            overall,
            total: self.entries.len(),
        }
    }

    /// Renders the manifest document. Embedding paths are written as stored.
    pub fn render(&self) -> String {
        let mut out = format!("{MANIFEST_HEADER}\nclasses");
        for name in &self.class_names {
            out.push('\t');
            out.push_str(name);
        }
        out.push_str("\n# item_id\tsource\tlabel\tembedding_ref\n");
        for e in &self.entries {
            let r = match &e.embedding_ref {
                Some(r) => format!("{}#{}", r.path.display(), r.row),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.item_id, e.source, self.class_names[e.true_label], r
            ));
        }
        out
    }

    /// Parses a manifest document. Relative embedding paths are joined onto
    /// `base_dir`. Embedding references are not checked here.
    pub fn parse(text: &str, base_dir: &Path, origin: &str) -> Result<Self, HarnessError> {
        let err = |line: usize, message: String| HarnessError::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        let mut lines = meaningful_lines(text);
        match lines.next() {
            Some((_, l)) if l.trim() == MANIFEST_HEADER => {}
            Some((n, l)) => {
                return Err(err(n, format!("expected {MANIFEST_HEADER:?}, found {l:?}")));
            }
            None => return Err(err(1, format!("missing header {MANIFEST_HEADER:?}"))),
        }
        let class_names: Vec<String> = match lines.next() {
            Some((n, l)) => {
                let f = tab_fields(l);
                if f[0] != "classes" || f.len() < 2 {
                    return Err(err(n, "expected a `classes` line".into()));
                }
                f[1..].iter().map(|s| s.to_string()).collect()
            }
            None => return Err(err(1, "missing `classes` line".into())),
        };
        let mut entries = Vec::new();
        for (n, l) in lines {
            let f = tab_fields(l);
            if f.len() != 4 {
                return Err(err(n, format!("expected 4 fields, found {}", f.len())));
            }
            if f[0].is_empty() {
                return Err(err(n, "empty item id".into()));
            }
            let true_label = class_names
                .iter()
                .position(|c| c == f[2])
                .ok_or_else(|| err(n, format!("unknown class label {:?}", f[2])))?;
            let embedding_ref = if f[3] == "-" {
                None
            } else {
                let (p, row) = f[3]
                    .rsplit_once('#')
                    .ok_or_else(|| err(n, format!("embedding ref {:?} lacks `#row`", f[3])))?;
                let row = row
                    .parse::<u64>()
                    .map_err(|_| err(n, format!("bad row index in {:?}", f[3])))?;
                Some(EmbeddingRef {
                    path: base_dir.join(p),
                    row,
                })
            };
            entries.push(ManifestEntry {
                item_id: f[0].to_string(),
                source: f[1].to_string(),
                true_label,
                embedding_ref,
            });
        }
        Self::new(class_names, entries).map_err(|e| match e {
            HarnessError::Parse { line, message, .. } => err(line, message),
            other => other,
        })
    }

    /// Lists items whose embedding reference does not point at an existing
    /// row. Only file headers are read.
    pub fn unresolvable_refs(&self) -> Vec<String> {
        let mut counts: BTreeMap<&Path, Option<u64>> = BTreeMap::new();
        let mut bad = Vec::new();
        for e in &self.entries {
            let Some(r) = &e.embedding_ref else { continue };
            let count = *counts
                .entry(r.path.as_path())
                .or_insert_with(|| read_header(&r.path).ok().map(|h| h.count));
            if count.is_none_or(|c| r.row >= c) {
                bad.push(e.item_id.clone());
            }
        }
        bad
    }

    /// Loads every referenced embedding row, in manifest order. Files with
    /// image sidecars must name the same item at the referenced row.
    pub fn resolve_embeddings(&self) -> Result<EmbeddingMatrix, HarnessError> {
        let mut files: BTreeMap<&Path, (EmbeddingMatrix, RowDescriptors)> = BTreeMap::new();
        let mut data = Vec::new();
        let mut dim: Option<usize> = None;
        for e in &self.entries {
            let r = e
                .embedding_ref
                .as_ref()
                .ok_or_else(|| HarnessError::MissingEmbedding {
                    item_id: e.item_id.clone(),
                })?;
            if !files.contains_key(r.path.as_path()) {
                let (m, sc) = read_embedding_file(&r.path, ReadOptions::default())?;
                files.insert(r.path.as_path(), (m, sc.descriptors));
            }
            let (m, desc) = &files[r.path.as_path()];
            let row = r.row as usize;
            if row >= m.rows() {
                return Err(HarnessError::UnresolvableEmbeddingRef {
                    ids: vec![e.item_id.clone()],
                });
            }
            if let RowDescriptors::Image(rows) = desc {
                if rows[row].item_id != e.item_id {
                    return Err(HarnessError::EmbeddingRefMismatch {
                        item_id: e.item_id.clone(),
                        found: rows[row].item_id.clone(),
                    });
                }
            }
            match dim {
                None => dim = Some(m.dim()),
                Some(d) if d != m.dim() => {
                    return Err(HarnessError::Vec(
                        crate::vecspace::VecError::DimensionMismatch {
                            expected: d,
                            actual: m.dim(),
                        },
                    ))
                }
                _ => {}
            }
            data.extend_from_slice(m.row(row));
        }
        let dim = dim.ok_or_else(|| HarnessError::ModeMismatch("manifest has no items".into()))?;
        Ok(EmbeddingMatrix::new(dim, data)?)
    }
}

/// Reads a manifest and checks that every embedding reference resolves.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let manifest = DatasetManifest::parse(&text, base, &path.display().to_string())?;
    let ids = manifest.unresolvable_refs();
    if !ids.is_empty() {
        return Err(HarnessError::UnresolvableEmbeddingRef { ids });
    }
    Ok(manifest)
}
