//! External score files: per-item class scores produced by another model
//! (logits or probabilities), keyed by item id.
//!
//! ```text
//! zeroleaf-scores v1
//! item_id	Potato Early Blight	Potato Late Blight	Potato Healthy
//! farmy-0001	2.31	-0.70	0.05
//! ```
//!
//! The header row fixes C and the class order; it must match the manifest.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use super::{meaningful_lines, tab_fields, DatasetManifest, HarnessError};
use crate::metrics::ScoreMatrix;

pub const SCORES_HEADER: &str = "zeroleaf-scores v1";

/// Parses a score document and aligns its rows to manifest order.
pub fn parse_external_scores(
    text: &str,
    manifest: &DatasetManifest,
    origin: &str,
) -> Result<ScoreMatrix, HarnessError> {
    let err = |line: usize, message: String| HarnessError::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut lines = meaningful_lines(text);
    match lines.next() {
        Some((_, l)) if l.trim() == SCORES_HEADER => {}
        Some((n, l)) => return Err(err(n, format!("expected {SCORES_HEADER:?}, found {l:?}"))),
        None => return Err(err(1, format!("missing header {SCORES_HEADER:?}"))),
    }
    let (hn, header) = lines
        .next()
        .ok_or_else(|| err(1, "missing column header row".into()))?;
    let cols = tab_fields(header);
    if cols[0] != "item_id" {
        return Err(err(hn, "column header must start with `item_id`".into()));
    }
    let classes = cols.len() - 1;
    let expected = manifest.num_classes();
    if classes != expected {
        return Err(HarnessError::ColumnCountMismatch {
            line: hn,
            expected,
            actual: classes,
        });
    }
    let found: Vec<String> = cols[1..].iter().map(|s| s.to_string()).collect();
    if found != manifest.class_names() {
        return Err(HarnessError::ClassNameMismatch {
            expected: manifest.class_names().to_vec(),
            found,
        });
    }

    let known: HashSet<&str> = manifest
        .entries()
        .iter()
        .map(|e| e.item_id.as_str())
        .collect();
    let mut rows: HashMap<String, Vec<f64>> = HashMap::new();
    let mut extra = Vec::new();
    for (n, l) in lines {
        let f = tab_fields(l);
        if f.len() - 1 != classes {
            return Err(HarnessError::ColumnCountMismatch {
                line: n,
                expected: classes,
                actual: f.len() - 1,
            });
        }
        let id = f[0].to_string();
        let mut values = Vec::with_capacity(classes);
        for (column, s) in f[1..].iter().enumerate() {
            let v: f64 = s
                .parse()
                .map_err(|_| err(n, format!("bad score {s:?} in column {column}")))?;
            if !v.is_finite() {
                return Err(HarnessError::NonFiniteScore {
                    item_id: id,
                    column,
                });
            }
            values.push(v);
        }
        if !known.contains(id.as_str()) {
            extra.push(id);
            continue;
        }
        if rows.insert(id.clone(), values).is_some() {
            return Err(HarnessError::DuplicateItemId(id));
        }
    }
    let missing: Vec<String> = manifest
        .entries()
        .iter()
        .filter(|e| !rows.contains_key(&e.item_id))
        .map(|e| e.item_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(HarnessError::MissingRows { ids: missing });
    }
    if !extra.is_empty() {
        return Err(HarnessError::ExtraRows { ids: extra });
    }
    let mut data = Vec::with_capacity(manifest.len() * classes);
    for e in manifest.entries() {
        data.extend_from_slice(&rows[&e.item_id]);
    }
    Ok(ScoreMatrix::new(classes, data)?)
}

/// Reads a score file and aligns it to the manifest.
pub fn ingest_external_scores(
    path: &Path,
    manifest: &DatasetManifest,
) -> Result<ScoreMatrix, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_external_scores(&text, manifest, &path.display().to_string())
}

/// Renders a score document. Values use the shortest round-tripping form.
pub fn render_external_scores(
    ids: &[String],
    class_names: &[String],
    scores: &ScoreMatrix,
) -> String {
    let mut out = format!("{SCORES_HEADER}\nitem_id");
    for c in class_names {
        out.push('\t');
        out.push_str(c);
    }
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        out.push_str(id);
        for v in scores.row(i) {
            out.push('\t');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}
