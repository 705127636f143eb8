//! Multiclass evaluation: confusion matrix, macro precision / recall / F1,
//! multiclass MCC, and one-vs-rest ROC/AUC.
//!
//! Zero denominators never produce NaN. The affected value is reported as 0
//! and a [`DegenerateFlag`] records which class and which quantity it was.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("{what}: lengths differ ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("label {label} at position {index} is outside 0..{classes}")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        classes: usize,
    },
    #[error("no items to evaluate")]
    EmptyInput,
    #[error("need at least {needed} classes, got {classes}")]
    TooFewClasses { needed: usize, classes: usize },
    #[error("ROC needs positives and negatives (got {positives} positive, {negatives} negative)")]
    DegenerateLabels { positives: usize, negatives: usize },
    #[error("malformed ROC curve: {0}")]
    MalformedCurve(String),
    #[error("score at row {row}, column {col} is not finite")]
    NonFiniteScore { row: usize, col: usize },
}

impl MetricsError {
    pub fn name(&self) -> &'static str {
        match self {
            MetricsError::LengthMismatch { .. } => "LengthMismatch",
            MetricsError::LabelOutOfRange { .. } => "LabelOutOfRange",
            MetricsError::EmptyInput => "EmptyInput",
            MetricsError::TooFewClasses { .. } => "TooFewClasses",
            MetricsError::DegenerateLabels { .. } => "DegenerateLabels",
            MetricsError::MalformedCurve(_) => "MalformedCurve",
            MetricsError::NonFiniteScore { .. } => "NonFiniteScore",
        }
    }
}

/// N×C grid of per-item, per-class scores (aggregated similarities, logits
/// or probabilities).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    classes: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(classes: usize, data: Vec<f64>) -> Result<Self, MetricsError> {
        if classes == 0 {
            return Err(MetricsError::TooFewClasses { needed: 1, classes });
        }
        if !data.len().is_multiple_of(classes) {
            return Err(MetricsError::LengthMismatch {
                what: "score data vs class count",
                left: data.len(),
                right: classes,
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(MetricsError::NonFiniteScore {
                row: i / classes,
                col: i % classes,
            });
        }
        Ok(Self { classes, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(classes: usize, rows: &[R]) -> Result<Self, MetricsError> {
        let mut data = Vec::with_capacity(rows.len() * classes);
        for r in rows {
            let r = r.as_ref();
            if r.len() != classes {
                return Err(MetricsError::LengthMismatch {
                    what: "score row vs class count",
                    left: r.len(),
                    right: classes,
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(classes, data)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.classes..(i + 1) * self.classes]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.data.chunks_exact(self.classes).map(|r| r[c]).collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.classes);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            classes: self.classes,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, MetricsError> {
        let classes = counts.len();
        if classes == 0 {
            return Err(MetricsError::TooFewClasses { needed: 1, classes });
        }
        for row in &counts {
            if row.len() != classes {
                return Err(MetricsError::LengthMismatch {
                    what: "confusion row vs class count",
                    left: row.len(),
                    right: classes,
                });
            }
        }
        Ok(Self { classes, counts })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    pub fn class_counts(&self, c: usize) -> ClassCounts {
        let tp = self.counts[c][c];
        let fn_ = self.row_sum(c) - tp;
        let fp = self.col_sum(c) - tp;
        let tn = self.total() - tp - fn_ - fp;
        ClassCounts { tp, fp, fn_, tn }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.classes);
        for i in 0..self.classes {
            for j in 0..self.classes {
                t.counts[j][i] = self.counts[i][j];
            }
        }
        t
    }

    /// Entry-wise sum.
    pub fn merged(&self, other: &Self) -> Result<Self, MetricsError> {
        if other.classes != self.classes {
            return Err(MetricsError::LengthMismatch {
                what: "confusion matrix class counts",
                left: self.classes,
                right: other.classes,
            });
        }
        let mut out = self.clone();
        for (row, orow) in out.counts.iter_mut().zip(&other.counts) {
            for (a, b) in row.iter_mut().zip(orow) {
                *a += b;
            }
        }
        Ok(out)
    }
}

fn check_labels(labels: &[usize], classes: usize) -> Result<(), MetricsError> {
    match labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        Some((index, &label)) => Err(MetricsError::LabelOutOfRange {
            index,
            label,
            classes,
        }),
        None => Ok(()),
    }
}

pub fn confusion_matrix(
    y_true: &[usize],
    y_pred: &[usize],
    classes: usize,
) -> Result<ConfusionMatrix, MetricsError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch {
            what: "y_true vs y_pred",
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if classes == 0 {
        return Err(MetricsError::TooFewClasses { needed: 1, classes });
    }
    check_labels(y_true, classes)?;
    check_labels(y_pred, classes)?;
    let mut m = ConfusionMatrix::zeros(classes);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        m.counts[t][p] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateKind {
    PrecisionDenominatorZero,
    RecallDenominatorZero,
    F1DenominatorZero,
    MccDenominatorZero,
    AucUndefined,
    /// The class has no true items and was left out of the macro means.
    ClassAbsent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegenerateFlag {
    pub class: Option<usize>,
    pub kind: DegenerateKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroPrf {
    pub per_class: Vec<ClassPrf>,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    pub flags: Vec<DegenerateFlag>,
}

fn ratio_or_flag(
    num: f64,
    den: f64,
    class: usize,
    kind: DegenerateKind,
    flags: &mut Vec<DegenerateFlag>,
) -> f64 {
    if den == 0.0 {
        flags.push(DegenerateFlag {
            class: Some(class),
            kind,
        });
        0.0
    } else {
        num / den
    }
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

/// Per-class precision, recall and F1 with unweighted means over all classes.
pub fn macro_prf(m: &ConfusionMatrix) -> MacroPrf {
    let all: Vec<usize> = (0..m.classes()).collect();
    macro_prf_over(m, &all)
}

/// Like [`macro_prf`], with the macro means taken over `macro_classes` only.
/// Per-class values are still reported for every class.
pub fn macro_prf_over(m: &ConfusionMatrix, macro_classes: &[usize]) -> MacroPrf {
    let mut flags = Vec::new();
    let per_class: Vec<ClassPrf> = (0..m.classes())
        .map(|c| {
            let k = m.class_counts(c);
            let tp = k.tp as f64;
            let precision = ratio_or_flag(
                tp,
                (k.tp + k.fp) as f64,
                c,
                DegenerateKind::PrecisionDenominatorZero,
                &mut flags,
            );
            let recall = ratio_or_flag(
                tp,
                (k.tp + k.fn_) as f64,
                c,
                DegenerateKind::RecallDenominatorZero,
                &mut flags,
            );
            let f1 = ratio_or_flag(
                2.0 * precision * recall,
                precision + recall,
                c,
                DegenerateKind::F1DenominatorZero,
                &mut flags,
            );
            ClassPrf {
                precision,
                recall,
                f1,
            }
        })
        .collect();
    let pick = |f: fn(&ClassPrf) -> f64| mean(macro_classes.iter().map(|&c| f(&per_class[c])));
    MacroPrf {
        precision_macro: pick(|p| p.precision),
        recall_macro: pick(|p| p.recall),
        f1_macro: pick(|p| p.f1),
        per_class,
        flags,
    }
}

/// Numerator and the two denominator factors of the multiclass MCC, exact.
fn mcc_terms(m: &ConfusionMatrix) -> (i128, i128, i128) {
    let n = m.total() as i128;
    let c = m.classes();
    let correct: i128 = (0..c).map(|k| m.get(k, k) as i128).sum();
    let rows: Vec<i128> = (0..c).map(|k| m.row_sum(k) as i128).collect();
    let cols: Vec<i128> = (0..c).map(|k| m.col_sum(k) as i128).collect();
    let num = n * correct - rows.iter().zip(&cols).map(|(r, p)| r * p).sum::<i128>();
    let d_pred = n * n - cols.iter().map(|p| p * p).sum::<i128>();
    let d_true = n * n - rows.iter().map(|r| r * r).sum::<i128>();
    (num, d_pred, d_true)
}

/// Whether [`mcc_multiclass`] hit its zero-denominator convention.
pub fn mcc_is_degenerate(m: &ConfusionMatrix) -> bool {
    let (_, a, b) = mcc_terms(m);
    a == 0 || b == 0
}

/// Multiclass Matthews correlation computed from the confusion matrix:
///
/// `(N·Σ_k M_kk − Σ_k r_k·p_k) / sqrt((N² − Σ_k p_k²)(N² − Σ_k r_k²))`
///
/// with `r_k` row (true) sums and `p_k` column (predicted) sums. Returns 0
/// when either denominator factor is 0. Integer parts are exact, so the
/// value is invariant under transposition and equals the binary formula at
/// C = 2.
pub fn mcc_multiclass(m: &ConfusionMatrix) -> f64 {
    let (num, a, b) = mcc_terms(m);
    if a == 0 || b == 0 {
        return 0.0;
    }
    num as f64 / ((a * b) as f64).sqrt()
}

/// Binary MCC of one class against the rest; 0 on a zero denominator.
pub fn mcc_binary(k: ClassCounts) -> f64 {
    let (tp, fp, fn_, tn) = (k.tp as i128, k.fp as i128, k.fn_ as i128, k.tn as i128);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) as f64 / (den as f64).sqrt()
}

/// Unweighted mean of per-class one-vs-rest binary MCC. Auxiliary view for
/// comparison with [`mcc_multiclass`].
pub fn mcc_ovr_macro(m: &ConfusionMatrix) -> f64 {
    mean((0..m.classes()).map(|c| mcc_binary(m.class_counts(c))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// Threshold sweep over descending distinct scores. Items sharing a score
/// enter the curve together, so ties produce a diagonal segment.
pub fn roc_curve(scores: &[f64], is_positive: &[bool]) -> Result<Vec<RocPoint>, MetricsError> {
    if scores.len() != is_positive.len() {
        return Err(MetricsError::LengthMismatch {
            what: "scores vs labels",
            left: scores.len(),
            right: is_positive.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore { row: i, col: 0 });
    }
    let positives = is_positive.iter().filter(|&&p| p).count();
    let negatives = is_positive.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::DegenerateLabels {
            positives,
            negatives,
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if is_positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n,
            tpr: tp as f64 / p,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a ROC curve.
pub fn auc(curve: &[RocPoint]) -> Result<f64, MetricsError> {
    let (first, last) = match (curve.first(), curve.last()) {
        (Some(f), Some(l)) if curve.len() >= 2 => (f, l),
        _ => return Err(MetricsError::MalformedCurve("fewer than two points".into())),
    };
    if first.fpr != 0.0 || first.tpr != 0.0 {
        return Err(MetricsError::MalformedCurve(
            "does not start at (0, 0)".into(),
        ));
    }
    if last.fpr != 1.0 || last.tpr != 1.0 {
        return Err(MetricsError::MalformedCurve(
            "does not end at (1, 1)".into(),
        ));
    }
    let mut area = 0.0;
    for w in curve.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.fpr < a.fpr || b.tpr < a.tpr {
            return Err(MetricsError::MalformedCurve(
                "points are not monotone non-decreasing".into(),
            ));
        }
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    }
    Ok(area)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrAuc {
    /// `None` where the class had no positives or no negatives.
    pub per_class: Vec<Option<f64>>,
    pub curves: Vec<Option<Vec<RocPoint>>>,
    /// Mean over classes with a defined AUC; `None` if there are none.
    pub macro_auc: Option<f64>,
    pub flags: Vec<DegenerateFlag>,
}

/// One-vs-rest ROC/AUC for each column of `scores`.
pub fn one_vs_rest_auc(scores: &ScoreMatrix, y_true: &[usize]) -> Result<OvrAuc, MetricsError> {
    if scores.rows() != y_true.len() {
        return Err(MetricsError::LengthMismatch {
            what: "score rows vs labels",
            left: scores.rows(),
            right: y_true.len(),
        });
    }
    if scores.classes() < 2 {
        return Err(MetricsError::TooFewClasses {
            needed: 2,
            classes: scores.classes(),
        });
    }
    check_labels(y_true, scores.classes())?;
    let mut per_class = Vec::with_capacity(scores.classes());
    let mut curves = Vec::with_capacity(scores.classes());
    let mut flags = Vec::new();
    for c in 0..scores.classes() {
        let positive: Vec<bool> = y_true.iter().map(|&t| t == c).collect();
        match roc_curve(&scores.column(c), &positive) {
            Ok(curve) => {
                per_class.push(Some(auc(&curve)?));
                curves.push(Some(curve));
            }
            Err(MetricsError::DegenerateLabels { .. }) => {
                flags.push(DegenerateFlag {
                    class: Some(c),
                    kind: DegenerateKind::AucUndefined,
                });
                per_class.push(None);
                curves.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    let macro_auc = (!defined.is_empty()).then(|| mean(defined.into_iter()));
    Ok(OvrAuc {
        per_class,
        curves,
        macro_auc,
        flags,
    })
}

/// Which classes enter the macro precision / recall / F1 means.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacroPolicy {
    #[default]
    AllClasses,
    /// Classes with no true items are flagged and excluded.
    PresentClasses,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportOptions {
    pub macro_policy: MacroPolicy,
    /// Also compute the macro one-vs-rest binary MCC.
    pub ovr_mcc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_id: usize,
    pub support: u64,
    pub counts: ClassCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
    pub roc: Option<Vec<RocPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_items: u64,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassReport>,
    pub macro_classes: Vec<usize>,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    pub mcc: f64,
    pub mcc_ovr_macro: Option<f64>,
    pub macro_auc: Option<f64>,
    pub degenerate_flags: Vec<DegenerateFlag>,
}

impl MetricsReport {
    /// Full report for one evaluated set. `scores` feeds the ROC analysis.
    pub fn compute(
        y_true: &[usize],
        y_pred: &[usize],
        scores: &ScoreMatrix,
        options: ReportOptions,
    ) -> Result<Self, MetricsError> {
        let classes = scores.classes();
        let confusion = confusion_matrix(y_true, y_pred, classes)?;
        let mut flags = Vec::new();
        let macro_classes: Vec<usize> = match options.macro_policy {
            MacroPolicy::AllClasses => (0..classes).collect(),
            MacroPolicy::PresentClasses => (0..classes)
                .filter(|&c| {
                    let present = confusion.row_sum(c) > 0;
                    if !present {
                        flags.push(DegenerateFlag {
                            class: Some(c),
                            kind: DegenerateKind::ClassAbsent,
                        });
                    }
                    present
                })
                .collect(),
        };
        let prf = macro_prf_over(&confusion, &macro_classes);
        flags.extend(prf.flags.iter().copied());
        let mcc = mcc_multiclass(&confusion);
        if mcc_is_degenerate(&confusion) {
            flags.push(DegenerateFlag {
                class: None,
                kind: DegenerateKind::MccDenominatorZero,
            });
        }
        let ovr = if classes >= 2 {
            let o = one_vs_rest_auc(scores, y_true)?;
            flags.extend(o.flags.iter().copied());
            o
        } else {
            flags.push(DegenerateFlag {
                class: Some(0),
                kind: DegenerateKind::AucUndefined,
            });
            OvrAuc {
                per_class: vec![None; classes],
                curves: vec![None; classes],
                macro_auc: None,
                flags: Vec::new(),
            }
        };
        let per_class = (0..classes)
            .map(|c| ClassReport {
                class_id: c,
                support: confusion.row_sum(c),
                counts: confusion.class_counts(c),
                precision: prf.per_class[c].precision,
                recall: prf.per_class[c].recall,
                f1: prf.per_class[c].f1,
                auc: ovr.per_class[c],
                roc: ovr.curves[c].clone(),
            })
            .collect();
        Ok(Self {
            n_items: confusion.total(),
            per_class,
            macro_classes,
            precision_macro: prf.precision_macro,
            recall_macro: prf.recall_macro,
            f1_macro: prf.f1_macro,
            mcc,
            mcc_ovr_macro: options.ovr_mcc.then(|| mcc_ovr_macro(&confusion)),
            macro_auc: ovr.macro_auc,
            confusion,
            degenerate_flags: flags,
        })
    }
}
