//! Choquet-integral aggregation of per-criterion evidence.
//!
//! Every (sample, dimension) position is fused independently: the N
//! criterion values are sorted in descending order, each value is weighted by
//! the increase in coalition measure it brings, and the cumulative measure of
//! the full coalition is pinned to 1.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fuzzy_measure::SugenoMeasure;

/// Largest criterion count accepted by [`choquet_oracle`], which tabulates all 2^N coalitions.
pub const ORACLE_MAX_CRITERIA: usize = 12;

/// N aligned evidence matrices (B samples × M dimensions), one per criterion.
///
/// Criterion `i` is the `i`-th matrix; densities are matched to criteria by
/// this position.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceBatch {
    matrices: Vec<Array2<f64>>,
    names: Vec<String>,
}

impl EvidenceBatch {
    pub fn new(matrices: Vec<Array2<f64>>) -> Result<Self> {
        let first = matrices.first().ok_or_else(|| {
            Error::ShapeMismatch("evidence batch needs at least one criterion".into())
        })?;
        let shape = first.dim();
        for (i, m) in matrices.iter().enumerate() {
            if m.dim() != shape {
                return Err(Error::ShapeMismatch(format!(
                    "criterion {i} has shape {:?}, criterion 0 has {:?}",
                    m.dim(),
                    shape
                )));
            }
            if let Some(((row, col), v)) = m.indexed_iter().find(|(_, v)| !v.is_finite()) {
                return Err(Error::ShapeMismatch(format!(
                    "criterion {i} has non-finite value {v} at row {row}, column {col}"
                )));
            }
        }
        let names = (0..matrices.len())
            .map(|i| format!("criterion_{i}"))
            .collect();
        Ok(Self { matrices, names })
    }

    /// Replaces the default `criterion_<i>` names.
    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.matrices.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} names for {} criteria",
                names.len(),
                self.matrices.len()
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn criteria_count(&self) -> usize {
        self.matrices.len()
    }

    /// Number of samples (rows).
    pub fn samples(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// Evidence dimensions per sample (columns).
    pub fn dims(&self) -> usize {
        self.matrices[0].ncols()
    }

    pub fn matrices(&self) -> &[Array2<f64>] {
        &self.matrices
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Choquet integral of one vector of criterion values.
///
/// Ties in the descending sort keep ascending criterion order.
pub fn choquet_integral(values: &[f64], measure: &SugenoMeasure) -> Result<f64> {
    let n = measure.criteria_count();
    if values.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} values for a measure over {n} criteria",
            values.len()
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Ok(integrate_into(values, measure, &mut order))
}

/// Core accumulation; `order` is scratch space of length N.
fn integrate_into(values: &[f64], measure: &SugenoMeasure, order: &mut [usize]) -> f64 {
    let n = order.len();
    for (slot, i) in order.iter_mut().zip(0..n) {
        *slot = i;
    }
    // stable: equal values keep ascending criterion index
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let densities = measure.densities().values();
    let lambda = measure.lambda();
    let mut previous = 0.0;
    let mut total = 0.0;
    for (rank, &criterion) in order.iter().enumerate() {
        let g = densities[criterion];
        let cumulative = if rank + 1 == n {
            1.0
        } else {
            previous + g + lambda * previous * g
        };
        total += values[criterion] * (cumulative - previous);
        previous = cumulative;
    }
    total
}

/// Fuses the evidence batch position by position into one B×M matrix.
///
/// Rows are evaluated in parallel; each position is computed by the same
/// sequential code, so the result does not depend on scheduling.
pub fn choquet_aggregate(evidence: &EvidenceBatch, measure: &SugenoMeasure) -> Result<Array2<f64>> {
    let n = evidence.criteria_count();
    if n != measure.criteria_count() {
        return Err(Error::ShapeMismatch(format!(
            "{n} evidence matrices for a measure over {} criteria",
            measure.criteria_count()
        )));
    }
    let (rows, cols) = (evidence.samples(), evidence.dims());
    let matrices = evidence.matrices();
    let mut out = vec![0.0; rows * cols];
    if cols > 0 {
        out.par_chunks_mut(cols)
            .enumerate()
            .for_each(|(r, out_row)| {
                let mut values = vec![0.0; n];
                let mut order = vec![0usize; n];
                for (c, slot) in out_row.iter_mut().enumerate() {
                    for (v, m) in values.iter_mut().zip(matrices) {
                        *v = m[[r, c]];
                    }
                    *slot = integrate_into(&values, measure, &mut order);
                }
            });
    }
    Ok(Array2::from_shape_vec((rows, cols), out).expect("buffer sized rows*cols"))
}

/// Reference Choquet integral for testing.
///
/// Tabulates the measure of every coalition through
/// [`SugenoMeasure::measure_of_subset`], orders the criteria by repeated
/// maximum selection, and sums `h_π(i) (g(A_i) − g(A_{i−1}))` with the
/// computed (not pinned) full-set measure.
pub fn choquet_oracle(values: &[f64], measure: &SugenoMeasure) -> Result<f64> {
    let n = measure.criteria_count();
    if values.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} values for a measure over {n} criteria",
            values.len()
        )));
    }
    if n > ORACLE_MAX_CRITERIA {
        return Err(Error::ShapeMismatch(format!(
            "oracle enumerates coalitions for at most {ORACLE_MAX_CRITERIA} criteria, got {n}"
        )));
    }

    let mut table = vec![0.0; 1 << n];
    for (mask, slot) in table.iter_mut().enumerate() {
        let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        *slot = measure.measure_of_subset(&members)?;
    }

    let mut used = 0usize;
    let mut previous = 0.0;
    let mut total = 0.0;
    for _ in 0..n {
        let mut pick = None;
        for i in (0..n).filter(|i| used & (1 << i) == 0) {
            match pick {
                Some(p) if values[i] <= values[p] => {}
                _ => pick = Some(i),
            }
        }
        let pick = pick.expect("an unused criterion remains");
        used |= 1 << pick;
        total += values[pick] * (table[used] - previous);
        previous = table[used];
    }
    Ok(total)
}
