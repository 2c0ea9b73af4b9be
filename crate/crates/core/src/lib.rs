//! Choquet-integral fusion of multiple models' evidence.
//!
//! - [`fuzzy_measure`]: Sugeno-λ measures built from per-criterion densities.
//! - [`choquet`]: batched Choquet aggregation and a subset-enumeration oracle.
//! - [`de`]: DE/best/1/bin differential evolution.
//! - [`ensemble`]: fused forward pass, cross-entropy, density fitting.
//! - [`metrics`]: confusion matrices and per-class / macro metrics.
//! - [`io`]: CSV matrices, label files, model and report documents.

pub mod choquet;
pub mod de;
pub mod ensemble;
pub mod error;
pub mod fuzzy_measure;
pub mod io;
pub mod metrics;

pub use choquet::{choquet_aggregate, choquet_integral, choquet_oracle, EvidenceBatch};
pub use de::{optimize, Bounds, DeConfig, DeHistory, DeOutcome, DeState};
pub use ensemble::{
    cross_entropy, ensemble_forward, fit_densities, predict, softmax, FittedEnsemble, LabeledSet,
    LinearHead,
};
pub use error::{Error, Result};
pub use fuzzy_measure::{solve_lambda, DensityVector, SugenoMeasure};
pub use metrics::{
    class_metrics, confusion_matrix, macro_metrics, ClassMetrics, ConfusionMatrix, MacroMetrics,
};
