//! File formats.
//!
//! Matrices are comma-separated decimal rows with an optional single header
//! line; the first line is treated as a header when any of its cells fails to
//! parse as a number. Error positions use 1-based file line and column
//! numbers. Labels and predictions are a single integer column in the same
//! format. Model files and reports are pretty-printed JSON; run manifests are
//! TOML.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::de::{Bounds, DeConfig, DeHistory};
use crate::ensemble::{FitMetadata, FittedEnsemble, LinearHead};
use crate::error::{Error, Result};
use crate::fuzzy_measure::{DensityVector, SugenoMeasure};
use crate::metrics::MacroMetrics;

/// Significant digits used when writing matrices.
pub const MATRIX_SIGNIFICANT_DIGITS: usize = 10;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound {
                path: path.to_path_buf(),
            }
        } else {
            Error::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses CSV text; `path` is only used in error messages.
pub fn parse_matrix(text: &str, path: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0;
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(index + 1);
        if index == 0 && record.iter().any(|cell| parse_cell(cell).is_none()) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(expected) if expected != record.len() => {
                return Err(Error::RaggedRows {
                    path: path.to_path_buf(),
                    row: line,
                    expected,
                    found: record.len(),
                })
            }
            _ => {}
        }
        for (column, cell) in record.iter().enumerate() {
            let value = parse_cell(cell).ok_or_else(|| Error::NonNumericCell {
                path: path.to_path_buf(),
                row: line,
                column: column + 1,
                cell: cell.to_string(),
            })?;
            values.push(value);
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| Error::EmptyMatrix {
        path: path.to_path_buf(),
    })?;
    Ok(Array2::from_shape_vec((rows, width), values).expect("rows are rectangular"))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    parse_matrix(&read_text(path)?, path)
}

/// Formats `x` with `digits` significant digits, in plain decimal notation
/// unless the exponent is very large or very small.
pub fn format_significant(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if x == 0.0 {
        return format!("{:.*}", digits - 1, 0.0);
    }
    let scientific = format!("{:.*e}", digits - 1, x);
    let exponent: i32 = scientific
        .rsplit('e')
        .next()
        .and_then(|e| e.parse().ok())
        .expect("exponent present in {:e} output");
    if (-5..16).contains(&exponent) {
        let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        scientific
    }
}

pub fn matrix_to_csv(matrix: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in matrix.rows() {
        let cells: Vec<String> = row
            .iter()
            .map(|&v| format_significant(v, MATRIX_SIGNIFICANT_DIGITS))
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: impl AsRef<Path>, matrix: &Array2<f64>) -> Result<()> {
    write_text(path.as_ref(), &matrix_to_csv(matrix))
}

/// Head file: M weight rows followed by one bias row, C columns each.
pub fn load_head(path: impl AsRef<Path>) -> Result<LinearHead> {
    let path = path.as_ref();
    let matrix = load_matrix(path)?;
    let rows = matrix.nrows();
    if rows < 2 {
        return Err(Error::TooFewRows {
            path: path.to_path_buf(),
            rows,
        });
    }
    let weights = matrix.slice(s![..rows - 1, ..]).to_owned();
    let bias = matrix.row(rows - 1).to_owned();
    LinearHead::new(weights, bias).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// A single column of non-negative integers (class indices).
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let matrix = load_matrix(path)?;
    if matrix.ncols() != 1 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!(
                "expected a single column of class indices, found {}",
                matrix.ncols()
            ),
        });
    }
    matrix
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(Error::Format {
                    path: path.to_path_buf(),
                    message: format!("data row {} holds {v}, not a class index", i + 1),
                })
            }
        })
        .collect()
}

pub fn labels_to_csv(labels: &[usize]) -> String {
    labels.iter().map(|l| format!("{l}\n")).collect()
}

/// Persistent form of a fitted ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub criteria: Vec<String>,
    pub densities: Vec<f64>,
    pub lambda: f64,
    pub head_path: PathBuf,
    pub seed: u64,
    pub de_config: DeConfig,
    pub final_loss: f64,
    pub history: DeHistory,
}

impl ModelFile {
    pub fn from_fitted(fitted: &FittedEnsemble, head_path: impl Into<PathBuf>) -> Result<Self> {
        let metadata = fitted.metadata.as_ref().ok_or_else(|| {
            Error::InvalidConfig("ensemble carries no fit metadata to serialize".into())
        })?;
        Ok(Self {
            criteria: fitted.criteria.clone(),
            densities: fitted.measure.densities().values().to_vec(),
            lambda: fitted.measure.lambda(),
            head_path: head_path.into(),
            seed: metadata.de_config.seed,
            de_config: metadata.de_config.clone(),
            final_loss: metadata.final_loss,
            history: metadata.history.clone(),
        })
    }

    /// Rebuilds the ensemble. A relative head path is tried as given, then
    /// relative to `base_dir`.
    pub fn into_fitted(self, base_dir: Option<&Path>) -> Result<FittedEnsemble> {
        let head_path = match base_dir {
            Some(dir) if self.head_path.is_relative() && !self.head_path.exists() => {
                dir.join(&self.head_path)
            }
            _ => self.head_path.clone(),
        };
        let head = load_head(&head_path)?;
        let measure = SugenoMeasure::from_parts(DensityVector::new(self.densities)?, self.lambda)?;
        let mut fitted = FittedEnsemble::new(measure, head, self.criteria)?;
        fitted.metadata = Some(FitMetadata {
            de_config: self.de_config,
            final_loss: self.final_loss,
            history: self.history,
        });
        Ok(fitted)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    text
}

pub fn save_model(path: impl AsRef<Path>, model: &ModelFile) -> Result<()> {
    write_text(path.as_ref(), &to_json(model))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Metrics report with optional class names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub class_names: Vec<String>,
    #[serde(flatten)]
    pub metrics: MacroMetrics,
}

impl MetricsReport {
    pub fn new(metrics: MacroMetrics, class_names: Option<Vec<String>>) -> Self {
        let class_names = class_names
            .unwrap_or_else(|| (0..metrics.classes).map(|k| format!("class_{k}")).collect());
        Self {
            class_names,
            metrics,
        }
    }

    /// Percentages, one column per class plus a macro column.
    pub fn to_text_table(&self) -> String {
        fn cell(v: Option<f64>) -> String {
            v.map(|x| format!("{:.4}", 100.0 * x))
                .unwrap_or_else(|| "undefined".to_string())
        }
        let m = &self.metrics;
        let mut header = vec![format!("{:<13}", "metric (%)")];
        header.extend(self.class_names.iter().map(|n| format!("{n:>12}")));
        header.push(format!("{:>12}", "macro"));
        let mut lines = vec![header.concat()];

        type Pick = fn(&crate::metrics::ClassMetrics) -> Option<f64>;
        let rows: [(&str, Pick, Option<f64>); 7] = [
            ("accuracy", |c| c.accuracy, m.accuracy),
            ("precision", |c| c.precision, m.precision),
            ("recall", |c| c.recall, m.recall),
            ("specificity", |c| c.specificity, m.specificity),
            ("f1", |c| c.f1, m.f1),
            ("balanced_auc", |c| c.balanced_auc, m.balanced_auc),
            ("mcc", |c| c.mcc, m.mcc_macro),
        ];
        for (name, pick, aggregate) in rows {
            let mut line = vec![format!("{name:<13}")];
            line.extend(m.per_class.iter().map(|c| format!("{:>12}", cell(pick(c)))));
            line.push(format!("{:>12}", cell(aggregate)));
            lines.push(line.concat());
        }
        lines.push(format!("{:<13}{:>12}", "mcc_multi", cell(m.mcc_multiclass)));
        lines.push(format!("samples: {}", m.total));
        let mut text = lines.join("\n");
        text.push('\n');
        text
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCriterion {
    pub name: String,
    pub features: PathBuf,
}

/// DE settings as written in a manifest; omitted keys take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManifestDe {
    pub population_size: usize,
    pub generations: usize,
    pub scale_factor: f64,
    pub crossover_rate: f64,
    pub seed: u64,
}

impl Default for ManifestDe {
    fn default() -> Self {
        Self {
            population_size: crate::de::DEFAULT_POPULATION_SIZE,
            generations: crate::de::DEFAULT_MAX_GENERATIONS,
            scale_factor: crate::de::DEFAULT_SCALE_FACTOR,
            crossover_rate: crate::de::DEFAULT_CROSSOVER_RATE,
            seed: 0,
        }
    }
}

/// Everything a `fit` run needs, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub criteria: Vec<ManifestCriterion>,
    pub head: PathBuf,
    pub labels: PathBuf,
    #[serde(default)]
    pub de: ManifestDe,
    pub model_out: PathBuf,
}

impl RunManifest {
    pub fn de_config(&self) -> Result<DeConfig> {
        let config = DeConfig {
            bounds: Bounds::uniform(self.criteria.len(), 0.0, 1.0)?,
            population_size: self.de.population_size,
            scale_factor: self.de.scale_factor,
            crossover_rate: self.de.crossover_rate,
            max_generations: self.de.generations,
            seed: self.de.seed,
        };
        config.validate()?;
        Ok(config)
    }

    /// Resolves relative paths against `base` and checks that inputs exist.
    fn resolve(mut self, base: &Path) -> Result<Self> {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for c in &mut self.criteria {
            join(&mut c.features);
        }
        join(&mut self.head);
        join(&mut self.labels);
        join(&mut self.model_out);
        if self.criteria.is_empty() {
            return Err(Error::InvalidConfig("manifest lists no criteria".into()));
        }
        let inputs = self
            .criteria
            .iter()
            .map(|c| &c.features)
            .chain([&self.head, &self.labels]);
        for path in inputs {
            if !path.exists() {
                return Err(Error::FileNotFound { path: path.clone() });
            }
        }
        Ok(self)
    }
}

/// Loads a TOML manifest; relative paths are taken relative to its directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<RunManifest> {
    let path = path.as_ref();
    let manifest: RunManifest = toml::from_str(&read_text(path)?).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    manifest.resolve(base)
}
