//! Confusion matrices and classification metrics.
//!
//! Per-class metrics are one-vs-rest. A metric whose denominator is zero is
//! `None` rather than 0.
//!
//! `balanced_auc` is the closed form `(recall + specificity) / 2`, i.e. the
//! balanced accuracy at the single operating point of the confusion matrix.
//! It is not the area under a threshold-swept ROC curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts indexed `[true class][predicted class]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.len();
        if c == 0 {
            return Err(Error::ShapeMismatch(
                "confusion matrix needs at least one class".into(),
            ));
        }
        if let Some((i, row)) = counts.iter().enumerate().find(|(_, row)| row.len() != c) {
            return Err(Error::ShapeMismatch(format!(
                "confusion matrix row {i} has {} entries, expected {c}",
                row.len()
            )));
        }
        Ok(Self { counts })
    }

    pub fn zeros(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
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

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|k| self.counts[k][k]).sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        self.counts[truth].iter().sum()
    }

    pub fn column_sum(&self, predicted: usize) -> u64 {
        self.counts.iter().map(|row| row[predicted]).sum()
    }

    /// `(tp, tn, fp, fn)` treating `class_index` as the positive class.
    pub fn one_vs_rest(&self, class_index: usize) -> Result<(u64, u64, u64, u64)> {
        if class_index >= self.classes() {
            return Err(Error::IndexOutOfRange {
                index: class_index,
                len: self.classes(),
            });
        }
        let tp = self.counts[class_index][class_index];
        let fn_ = self.row_sum(class_index) - tp;
        let fp = self.column_sum(class_index) - tp;
        let tn = self.total() - tp - fn_ - fp;
        Ok((tp, tn, fp, fn_))
    }

    /// 2×2 matrix of `positive` (index 0) against every other class (index 1).
    pub fn collapse_to_binary(&self, positive: usize) -> Result<Self> {
        let (tp, tn, fp, fn_) = self.one_vs_rest(positive)?;
        Ok(Self {
            counts: vec![vec![tp, fn_], vec![fp, tn]],
        })
    }
}

/// Tallies `counts[label][prediction]`.
pub fn confusion_matrix(
    predictions: &[usize],
    labels: &[usize],
    classes: usize,
) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(classes);
    for (&p, &t) in predictions.iter().zip(labels) {
        for index in [p, t] {
            if index >= classes {
                return Err(Error::IndexOutOfRange {
                    index,
                    len: classes,
                });
            }
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

fn ratio(numerator: f64, denominator: f64) -> Option<f64> {
    (denominator != 0.0).then(|| numerator / denominator)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_index: usize,
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    pub balanced_auc: Option<f64>,
    pub mcc: Option<f64>,
}

pub fn class_metrics(cm: &ConfusionMatrix, class_index: usize) -> Result<ClassMetrics> {
    let (tp, tn, fp, fn_) = cm.one_vs_rest(class_index)?;
    let (tpf, tnf, fpf, fnf) = (tp as f64, tn as f64, fp as f64, fn_ as f64);

    let accuracy = ratio(tpf + tnf, tpf + tnf + fpf + fnf);
    let precision = ratio(tpf, tpf + fpf);
    let recall = ratio(tpf, tpf + fnf);
    let specificity = ratio(tnf, tnf + fpf);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) => ratio(2.0 * p * r, p + r),
        _ => None,
    };
    let balanced_auc = match (recall, specificity) {
        (Some(r), Some(s)) => Some((r + s) / 2.0),
        _ => None,
    };
    let mcc = ratio(
        tpf * tnf - fnf * fpf,
        ((tpf + fnf) * (tnf + fpf) * (tpf + fpf) * (tnf + fnf)).sqrt(),
    );

    Ok(ClassMetrics {
        class_index,
        tp,
        tn,
        fp,
        fn_,
        accuracy,
        precision,
        recall,
        specificity,
        f1,
        balanced_auc,
        mcc,
    })
}

/// Aggregate report. Macro values are unweighted means over classes and are
/// `None` when any class leaves that metric undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub classes: usize,
    pub total: u64,
    /// trace / total
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    pub balanced_auc: Option<f64>,
    /// Unweighted mean of the per-class one-vs-rest MCC.
    pub mcc_macro: Option<f64>,
    /// Multiclass MCC computed from the full matrix.
    pub mcc_multiclass: Option<f64>,
    pub per_class: Vec<ClassMetrics>,
}

fn macro_mean(
    per_class: &[ClassMetrics],
    pick: impl Fn(&ClassMetrics) -> Option<f64>,
) -> Option<f64> {
    let values: Option<Vec<f64>> = per_class.iter().map(pick).collect();
    values.map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// Multiclass Matthews correlation from the full matrix:
/// `(c·s − Σ p_k t_k) / sqrt((s² − Σ p_k²)(s² − Σ t_k²))`, with `c` the trace,
/// `s` the total, `t_k` row sums and `p_k` column sums.
pub fn multiclass_mcc(cm: &ConfusionMatrix) -> Option<f64> {
    let s = cm.total() as f64;
    let c = cm.trace() as f64;
    let (mut pt, mut pp, mut tt) = (0.0, 0.0, 0.0);
    for k in 0..cm.classes() {
        let t = cm.row_sum(k) as f64;
        let p = cm.column_sum(k) as f64;
        pt += p * t;
        pp += p * p;
        tt += t * t;
    }
    ratio(c * s - pt, ((s * s - pp) * (s * s - tt)).sqrt())
}

pub fn macro_metrics(cm: &ConfusionMatrix) -> Result<MacroMetrics> {
    if cm.classes() < 2 {
        return Err(Error::ShapeMismatch(format!(
            "macro metrics need at least 2 classes, got {}",
            cm.classes()
        )));
    }
    let per_class = (0..cm.classes())
        .map(|k| class_metrics(cm, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(MacroMetrics {
        classes: cm.classes(),
        total: cm.total(),
        accuracy: ratio(cm.trace() as f64, cm.total() as f64),
        precision: macro_mean(&per_class, |m| m.precision),
        recall: macro_mean(&per_class, |m| m.recall),
        specificity: macro_mean(&per_class, |m| m.specificity),
        f1: macro_mean(&per_class, |m| m.f1),
        balanced_auc: macro_mean(&per_class, |m| m.balanced_auc),
        mcc_macro: macro_mean(&per_class, |m| m.mcc),
        mcc_multiclass: multiclass_mcc(cm),
        per_class,
    })
}
