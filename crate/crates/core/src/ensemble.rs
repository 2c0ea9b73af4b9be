//! Ensemble forward pass on precomputed features and density fitting.
//!
//! The N criterion feature matrices are Choquet-fused into one B×M matrix,
//! pushed through a frozen linear head and a softmax. Fitting searches the
//! per-criterion densities with differential evolution, scoring each
//! candidate by mean cross-entropy on a labelled validation set.

use std::sync::Mutex;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::choquet::{choquet_aggregate, EvidenceBatch};
use crate::de::{optimize, DeConfig, DeHistory};
use crate::error::{Error, Result};
use crate::fuzzy_measure::{DensityVector, SugenoMeasure};

/// Candidate densities are clipped into `[DENSITY_FLOOR, DENSITY_CEILING]` before λ is solved.
pub const DENSITY_FLOOR: f64 = 1e-6;
pub const DENSITY_CEILING: f64 = 1.0 - 1e-6;

/// Probabilities are floored at this value inside the log of the cross-entropy.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Frozen prediction layer: `logits = features · weights + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    weights: Array2<f64>,
    bias: Array1<f64>,
}

impl LinearHead {
    /// `weights` is M×C, `bias` has length C; needs M ≥ 1 and C ≥ 2.
    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        let (m, c) = weights.dim();
        if m == 0 || c < 2 {
            return Err(Error::ShapeMismatch(format!(
                "head needs at least 1 input and 2 classes, got {m}x{c}"
            )));
        }
        if bias.len() != c {
            return Err(Error::ShapeMismatch(format!(
                "head bias has {} entries for {c} classes",
                bias.len()
            )));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch(
                "head contains non-finite values".into(),
            ));
        }
        Ok(Self { weights, bias })
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn classes(&self) -> usize {
        self.weights.ncols()
    }

    /// Row-wise class probabilities for a B×M feature matrix.
    pub fn probabilities(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.inputs() {
            return Err(Error::ShapeMismatch(format!(
                "features have {} columns, head expects {}",
                features.ncols(),
                self.inputs()
            )));
        }
        let mut logits = features.dot(&self.weights);
        logits += &self.bias;
        for mut row in logits.rows_mut() {
            let p = softmax(row.as_slice().expect("standard layout"));
            row.assign(&ArrayView1::from(&p));
        }
        Ok(logits)
    }
}

/// Numerically stable softmax (the maximum logit is subtracted first).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `softmax(choquet(evidence) · W + b)` per row.
pub fn ensemble_forward(
    evidence: &EvidenceBatch,
    measure: &SugenoMeasure,
    head: &LinearHead,
) -> Result<Array2<f64>> {
    if evidence.dims() != head.inputs() {
        return Err(Error::ShapeMismatch(format!(
            "evidence has {} dimensions, head expects {}",
            evidence.dims(),
            head.inputs()
        )));
    }
    let fused = choquet_aggregate(evidence, measure)?;
    head.probabilities(&fused)
}

/// Mean over samples of `−ln(max(p[label], 1e-12))`.
pub fn cross_entropy(probabilities: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    let (rows, classes) = probabilities.dim();
    if rows != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{rows} probability rows for {} labels",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::ShapeMismatch(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    if rows == 0 {
        return Ok(0.0);
    }
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(r, &l)| -probabilities[[r, l]].max(PROBABILITY_FLOOR).ln())
        .sum();
    Ok(total / rows as f64)
}

/// Per-row argmax; the lowest class index wins ties.
pub fn argmax_rows(probabilities: &Array2<f64>) -> Vec<usize> {
    probabilities
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(0, |best, (i, &p)| if p > row[best] { i } else { best })
        })
        .collect()
}

/// Validation evidence with one class label per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    evidence: EvidenceBatch,
    labels: Vec<usize>,
    classes: usize,
}

impl LabeledSet {
    pub fn new(evidence: EvidenceBatch, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if labels.len() != evidence.samples() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} samples",
                labels.len(),
                evidence.samples()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::ShapeMismatch(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        Ok(Self {
            evidence,
            labels,
            classes,
        })
    }

    pub fn evidence(&self) -> &EvidenceBatch {
        &self.evidence
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub de_config: DeConfig,
    pub final_loss: f64,
    pub history: DeHistory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedEnsemble {
    pub measure: SugenoMeasure,
    pub head: LinearHead,
    pub criteria: Vec<String>,
    pub metadata: Option<FitMetadata>,
}

impl FittedEnsemble {
    pub fn new(measure: SugenoMeasure, head: LinearHead, criteria: Vec<String>) -> Result<Self> {
        if criteria.len() != measure.criteria_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} criteria names for {} densities",
                criteria.len(),
                measure.criteria_count()
            )));
        }
        Ok(Self {
            measure,
            head,
            criteria,
            metadata: None,
        })
    }

    pub fn forward(&self, evidence: &EvidenceBatch) -> Result<Array2<f64>> {
        ensemble_forward(evidence, &self.measure, &self.head)
    }
}

/// Clips each candidate density into `[DENSITY_FLOOR, DENSITY_CEILING]`.
pub fn clip_densities(candidate: &[f64]) -> Vec<f64> {
    candidate
        .iter()
        .map(|g| g.clamp(DENSITY_FLOOR, DENSITY_CEILING))
        .collect()
}

/// Measure for a raw DE candidate. A single criterion always gets density 1.
pub fn measure_from_candidate(candidate: &[f64]) -> Result<SugenoMeasure> {
    let densities = if candidate.len() == 1 {
        vec![1.0]
    } else {
        clip_densities(candidate)
    };
    SugenoMeasure::new(DensityVector::new(densities)?)
}

/// Validation loss of the ensemble built from a raw DE candidate.
pub fn candidate_loss(
    candidate: &[f64],
    validation: &LabeledSet,
    head: &LinearHead,
) -> Result<f64> {
    let measure = measure_from_candidate(candidate)?;
    let probabilities = ensemble_forward(validation.evidence(), &measure, head)?;
    cross_entropy(&probabilities, validation.labels())
}

/// Fits the fuzzy densities by minimising validation cross-entropy.
pub fn fit_densities(
    validation: &LabeledSet,
    head: &LinearHead,
    de_config: &DeConfig,
) -> Result<FittedEnsemble> {
    let n = validation.evidence().criteria_count();
    if de_config.dimension() != n {
        return Err(Error::ShapeMismatch(format!(
            "search dimension {} does not match {n} criteria",
            de_config.dimension()
        )));
    }
    if validation.evidence().dims() != head.inputs() {
        return Err(Error::ShapeMismatch(format!(
            "evidence has {} dimensions, head expects {}",
            validation.evidence().dims(),
            head.inputs()
        )));
    }
    if validation.classes() != head.classes() {
        return Err(Error::ShapeMismatch(format!(
            "labels use {} classes, head predicts {}",
            validation.classes(),
            head.classes()
        )));
    }
    let bounds = &de_config.bounds;
    if bounds.lower.iter().any(|&lo| lo < 0.0) || bounds.upper.iter().any(|&hi| hi > 1.0) {
        return Err(Error::InvalidConfig(
            "density search bounds must lie inside [0, 1]".into(),
        ));
    }

    let failure = Mutex::new(None);
    let outcome = optimize(
        |candidate: &[f64]| match candidate_loss(candidate, validation, head) {
            Ok(loss) => loss,
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                f64::NAN
            }
        },
        de_config,
    );
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let outcome = outcome?;

    let measure = measure_from_candidate(&outcome.best)?;
    let mut fitted = FittedEnsemble::new(
        measure,
        head.clone(),
        validation.evidence().names().to_vec(),
    )?;
    fitted.metadata = Some(FitMetadata {
        de_config: de_config.clone(),
        final_loss: outcome.best_fitness,
        history: outcome.history,
    });
    Ok(fitted)
}

/// Predicted class per sample.
pub fn predict(evidence: &EvidenceBatch, ensemble: &FittedEnsemble) -> Result<Vec<usize>> {
    Ok(argmax_rows(&ensemble.forward(evidence)?))
}
