//! Stratified k-fold plans.
//!
//! Each class's items are shuffled with a ChaCha8 stream keyed by
//! `(seed, class_id)` and dealt round-robin onto the folds. The deal for
//! class `c` starts where class `c − 1` stopped, so fold sizes stay within
//! one of each other while every class still lands within ±1 of `n_c / k`
//! per fold.
//!
//! Plan documents:
//!
//! ```text
//! zeroleaf-folds v1
//! k	5
//! seed	42
//! item_id	fold
//! farmy-0001	3
//! ```

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{meaningful_lines, tab_fields, DatasetManifest, HarnessError};
use crate::fsutil::write_atomic;

pub const FOLDS_HEADER: &str = "zeroleaf-folds v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub item_id: String,
    pub fold: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// One entry per manifest item, in manifest order.
    pub assignments: Vec<FoldAssignment>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

pub fn stratified_kfold(
    manifest: &DatasetManifest,
    k: usize,
    seed: u64,
) -> Result<FoldPlan, HarnessError> {
    let n = manifest.len();
    if k < 2 || k > n {
        return Err(HarnessError::InvalidK { k, items: n });
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); manifest.num_classes()];
    for (i, e) in manifest.entries().iter().enumerate() {
        by_class[e.true_label].push(i);
    }
    let mut folds = vec![0usize; n];
    let mut warnings = Vec::new();
    let mut next = 0usize;
    for (class_id, mut items) in by_class.into_iter().enumerate() {
        let name = &manifest.class_names()[class_id];
        if items.is_empty() {
            warnings.push(format!("class {name:?} has no items"));
            continue;
        }
        if items.len() < k {
            warnings.push(format!(
                "class {name:?} has {} items, fewer than k = {k}",
                items.len()
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class_id as u64);
        items.shuffle(&mut rng);
        for item in items {
            folds[item] = next % k;
            next += 1;
        }
    }
    Ok(FoldPlan {
        k,
        seed,
        assignments: manifest
            .entries()
            .iter()
            .zip(folds)
            .map(|(e, fold)| FoldAssignment {
                item_id: e.item_id.clone(),
                fold,
            })
            .collect(),
        warnings,
    })
}

impl FoldPlan {
    /// Manifest row indices per fold, each list ascending. Fails unless the
    /// plan covers exactly the manifest's items.
    pub fn fold_indices(
        &self,
        manifest: &DatasetManifest,
    ) -> Result<Vec<Vec<usize>>, HarnessError> {
        if self.assignments.len() != manifest.len() {
            return Err(HarnessError::PlanMismatch(format!(
                "plan has {} items, manifest has {}",
                self.assignments.len(),
                manifest.len()
            )));
        }
        let by_id: HashMap<&str, usize> = self
            .assignments
            .iter()
            .map(|a| (a.item_id.as_str(), a.fold))
            .collect();
        if by_id.len() != self.assignments.len() {
            return Err(HarnessError::PlanMismatch("plan repeats an item id".into()));
        }
        let mut out = vec![Vec::new(); self.k];
        for (i, e) in manifest.entries().iter().enumerate() {
            let fold = *by_id.get(e.item_id.as_str()).ok_or_else(|| {
                HarnessError::PlanMismatch(format!("item {:?} is not in the plan", e.item_id))
            })?;
            if fold >= self.k {
                return Err(HarnessError::PlanMismatch(format!(
                    "item {:?} assigned to fold {fold} ≥ k = {}",
                    e.item_id, self.k
                )));
            }
            out[fold].push(i);
        }
        Ok(out)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "{FOLDS_HEADER}\nk\t{}\nseed\t{}\nitem_id\tfold\n",
            self.k, self.seed
        );
        for a in &self.assignments {
            out.push_str(&format!("{}\t{}\n", a.item_id, a.fold));
        }
        out
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, HarnessError> {
        let err = |line: usize, message: String| HarnessError::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        let mut lines = meaningful_lines(text);
        match lines.next() {
            Some((_, l)) if l.trim() == FOLDS_HEADER => {}
            Some((n, l)) => return Err(err(n, format!("expected {FOLDS_HEADER:?}, found {l:?}"))),
            None => return Err(err(1, format!("missing header {FOLDS_HEADER:?}"))),
        }
        let mut field = |name: &str| -> Result<(usize, String), HarnessError> {
            match lines.next() {
                Some((n, l)) => {
                    let f = tab_fields(l);
                    if f.len() != 2 || f[0] != name {
                        return Err(err(n, format!("expected `{name}` line")));
                    }
                    Ok((n, f[1].to_string()))
                }
                None => Err(err(0, format!("missing `{name}` line"))),
            }
        };
        let (kn, k) = field("k")?;
        let k: usize = k.parse().map_err(|_| err(kn, format!("bad k {k:?}")))?;
        let (sn, seed) = field("seed")?;
        let seed: u64 = seed
            .parse()
            .map_err(|_| err(sn, format!("bad seed {seed:?}")))?;
        field("item_id")?;
        let mut assignments = Vec::new();
        for (n, l) in lines {
            let f = tab_fields(l);
            if f.len() != 2 {
                return Err(err(n, format!("expected 2 fields, found {}", f.len())));
            }
            let fold: usize = f[1]
                .parse()
                .map_err(|_| err(n, format!("bad fold {:?}", f[1])))?;
            if fold >= k {
                return Err(err(n, format!("fold {fold} out of range for k = {k}")));
            }
            assignments.push(FoldAssignment {
                item_id: f[0].to_string(),
                fold,
            });
        }
        Ok(Self {
            k,
            seed,
            assignments,
            warnings: Vec::new(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        write_atomic(path, self.render().as_bytes()).map_err(|e| HarnessError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}
