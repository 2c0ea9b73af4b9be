//! Sugeno-λ fuzzy measures.
//!
//! A Sugeno-λ measure on N criteria is fixed by the N singleton densities
//! `g_i`. The parameter λ is the unique root in `(-1, ∞) \ {0}` of
//!
//! ```text
//! 1 + λ = ∏ (1 + λ g_i)
//! ```
//!
//! (or exactly 0 when the densities already sum to one), and the measure of
//! any coalition follows from folding the union rule
//! `g(A ∪ B) = g(A) + g(B) + λ g(A) g(B)` over its members.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Densities whose sum is within this distance of 1 give an additive measure (λ = 0).
pub const ADDITIVE_SUM_TOLERANCE: f64 = 1e-12;

/// Accepted residual of the λ identity, scaled by `1 + |λ|`.
pub const LAMBDA_RESIDUAL_TOLERANCE: f64 = 1e-9;

const MAX_SOLVER_ITERATIONS: usize = 200;

/// Per-criterion fuzzy densities (singleton measures).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DensityVector(Vec<f64>);

impl DensityVector {
    /// Validates the densities: a single criterion must carry density 1,
    /// otherwise every value must be finite and strictly inside (0, 1).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        match values.as_slice() {
            [] => Err(Error::ShapeMismatch(
                "a density vector needs at least one criterion".into(),
            )),
            [only] => {
                if *only == 1.0 {
                    Ok(Self(values))
                } else {
                    Err(Error::InvalidDensity {
                        index: 0,
                        value: *only,
                        reason: "a single criterion must have density 1",
                    })
                }
            }
            _ => {
                for (index, &value) in values.iter().enumerate() {
                    if !value.is_finite() {
                        return Err(Error::InvalidDensity {
                            index,
                            value,
                            reason: "not finite",
                        });
                    }
                    if value <= 0.0 || value >= 1.0 {
                        return Err(Error::InvalidDensity {
                            index,
                            value,
                            reason: "must lie in the open interval (0, 1)",
                        });
                    }
                }
                Ok(Self(values))
            }
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl TryFrom<Vec<f64>> for DensityVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<DensityVector> for Vec<f64> {
    fn from(densities: DensityVector) -> Self {
        densities.0
    }
}

/// `∏(1 + λ g_i) − (1 + λ)`, the defining identity written as a residual.
pub fn lambda_residual(densities: &[f64], lambda: f64) -> f64 {
    densities.iter().map(|g| 1.0 + lambda * g).product::<f64>() - (1.0 + lambda)
}

/// Coefficients of `(∏(1 + λ g_i) − 1 − λ) / λ` in ascending powers of λ.
///
/// With `e_k` the elementary symmetric polynomials of the densities, this is
/// `(e_1 − 1) + e_2 λ + … + e_N λ^(N−1)`. Dividing out the trivial root at
/// zero leaves a function that is strictly increasing on (−1, ∞), so the
/// admissible root is its only sign change there.
fn deflated_coefficients(densities: &[f64]) -> Vec<f64> {
    // elementary[k] = e_k, built up one density at a time.
    let mut elementary = vec![0.0; densities.len() + 1];
    elementary[0] = 1.0;
    for (seen, &g) in densities.iter().enumerate() {
        for k in (1..=seen + 1).rev() {
            elementary[k] += g * elementary[k - 1];
        }
    }
    let mut coefficients = elementary.split_off(1);
    coefficients[0] -= 1.0;
    coefficients
}

/// Value and derivative of the polynomial with the given ascending coefficients.
fn horner(coefficients: &[f64], x: f64) -> (f64, f64) {
    let mut value = 0.0;
    let mut slope = 0.0;
    for &c in coefficients.iter().rev() {
        slope = slope * x + value;
        value = value * x + c;
    }
    (value, slope)
}

/// Solves the λ identity for the given densities.
///
/// Returns 0 for a single criterion and for densities summing to one.
/// Otherwise λ lies in (−1, 0) when the densities sum above one and is
/// positive when they sum below one. The root is bracketed, then refined by
/// Newton steps that fall back to bisection whenever they leave the bracket.
pub fn solve_lambda(densities: &DensityVector) -> Result<f64> {
    let g = densities.values();
    if g.len() == 1 {
        return Ok(0.0);
    }
    let sum = densities.sum();
    if (sum - 1.0).abs() <= ADDITIVE_SUM_TOLERANCE {
        return Ok(0.0);
    }

    let coefficients = deflated_coefficients(g);
    // The polynomial form cancels badly near λ = -1 (where the product
    // vanishes); the product form cancels badly near λ = 0. Use each where
    // it is accurate. The slope only steers Newton steps.
    let eval = |x: f64| {
        let (value, slope) = horner(&coefficients, x);
        if x.abs() >= 0.5 {
            (lambda_residual(g, x) / x, slope)
        } else {
            (value, slope)
        }
    };

    let (mut lo, mut hi) = if sum > 1.0 {
        (-1.0, 0.0)
    } else {
        let mut hi = 1.0;
        while eval(hi).0 <= 0.0 {
            hi *= 2.0;
            if !hi.is_finite() || hi > 1e300 {
                return Err(Error::NoAdmissibleLambda(format!(
                    "no sign change found for positive lambda (density sum {sum})"
                )));
            }
        }
        (0.0, hi)
    };
    let (lo_value, _) = eval(lo);
    let (hi_value, _) = eval(hi);
    if !(lo_value < 0.0 && hi_value > 0.0) {
        return Err(Error::NoAdmissibleLambda(format!(
            "root not bracketed on [{lo}, {hi}] (density sum {sum})"
        )));
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_SOLVER_ITERATIONS {
        let (value, slope) = eval(x);
        if value == 0.0 {
            break;
        }
        if value < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - value / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        if step <= 2.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) || hi - lo <= 0.0 {
            break;
        }
    }

    if x <= -1.0 {
        // the root can sit closer to -1 than f64 resolves; the residual check below decides
        x = -1.0 + f64::EPSILON / 2.0;
    }
    if x == 0.0 {
        return Err(Error::NoAdmissibleLambda(format!(
            "solver converged to inadmissible lambda {x}"
        )));
    }
    let residual = lambda_residual(g, x);
    if residual.abs() > LAMBDA_RESIDUAL_TOLERANCE * (1.0 + x.abs()) {
        return Err(Error::NoAdmissibleLambda(format!(
            "residual {residual:e} at lambda {x} exceeds tolerance"
        )));
    }
    Ok(x)
}

/// A Sugeno-λ fuzzy measure: densities plus the λ that makes the full set measure 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureParts")]
pub struct SugenoMeasure {
    densities: DensityVector,
    lambda: f64,
}

#[derive(Deserialize)]
struct MeasureParts {
    densities: DensityVector,
    lambda: f64,
}

impl TryFrom<MeasureParts> for SugenoMeasure {
    type Error = Error;

    fn try_from(parts: MeasureParts) -> Result<Self> {
        Self::from_parts(parts.densities, parts.lambda)
    }
}

impl SugenoMeasure {
    pub fn new(densities: DensityVector) -> Result<Self> {
        let lambda = solve_lambda(&densities)?;
        Ok(Self { densities, lambda })
    }

    /// Rebuilds a measure from a stored λ, checking it against the densities.
    pub fn from_parts(densities: DensityVector, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda <= -1.0 {
            return Err(Error::NoAdmissibleLambda(format!(
                "lambda {lambda} is not greater than -1"
            )));
        }
        let residual = lambda_residual(densities.values(), lambda);
        if residual.abs() > LAMBDA_RESIDUAL_TOLERANCE * (1.0 + lambda.abs()) {
            return Err(Error::NoAdmissibleLambda(format!(
                "lambda {lambda} does not satisfy the density identity (residual {residual:e})"
            )));
        }
        Ok(Self { densities, lambda })
    }

    pub fn densities(&self) -> &DensityVector {
        &self.densities
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn criteria_count(&self) -> usize {
        self.densities.len()
    }

    /// Measure of the union of two disjoint coalitions with measures `a` and `b`.
    #[inline]
    pub fn union(&self, a: f64, b: f64) -> f64 {
        a + b + self.lambda * a * b
    }

    /// Measure of a coalition of criteria, folding the union rule over its
    /// members in ascending index order. The empty coalition measures 0.
    pub fn measure_of_subset(&self, subset: &[usize]) -> Result<f64> {
        let n = self.criteria_count();
        let mut members = subset.to_vec();
        members.sort_unstable();
        for pair in members.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::DuplicateIndex(pair[0]));
            }
        }
        if let Some(&index) = members.last().filter(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index, len: n });
        }
        let g = self.densities.values();
        Ok(members.iter().fold(0.0, |acc, &i| self.union(acc, g[i])))
    }

    /// Measure of the full criterion set as computed by the fold, without
    /// snapping it to 1. Deviates from 1 only by the solver's error.
    pub fn full_set_measure(&self) -> f64 {
        self.densities
            .values()
            .iter()
            .fold(0.0, |acc, &g| self.union(acc, g))
    }
}
