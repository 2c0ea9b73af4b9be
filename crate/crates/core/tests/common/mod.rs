#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use choquet_fusion::io::{labels_to_csv, matrix_to_csv};

pub const DIMS: usize = 8;
pub const CLASSES: usize = 3;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_choquet-fusion"))
}

pub fn run_cli(args: &[&str]) -> Output {
    cli().args(args).output().expect("spawn choquet-fusion")
}

/// Three criteria over `DIMS` features and `CLASSES` classes. The middle
/// criterion puts a large value on the feature matching the label (the head
/// reads feature k as the logit of class k), the outer two are uniform noise.
pub struct SeparableFixture {
    pub features: Vec<PathBuf>,
    pub head: PathBuf,
    pub labels: PathBuf,
    pub matrices: Vec<Array2<f64>>,
    pub label_values: Vec<usize>,
}

impl SeparableFixture {
    pub fn write(dir: &Path, samples: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let label_values: Vec<usize> = (0..samples).map(|_| rng.random_range(0..CLASSES)).collect();

        let noise = |rng: &mut ChaCha8Rng| {
            Array2::from_shape_fn((samples, DIMS), |_| rng.random_range(-3.0..3.0))
        };
        let first = noise(&mut rng);
        let informative = Array2::from_shape_fn((samples, DIMS), |(r, k)| {
            if k == label_values[r] {
                4.0 + rng.random_range(0.0..0.5)
            } else {
                rng.random_range(-0.5..0.5)
            }
        });
        let third = noise(&mut rng);
        let matrices = vec![first, informative, third];

        let names = ["noise_a", "informative", "noise_b"];
        let features: Vec<PathBuf> = names
            .iter()
            .zip(&matrices)
            .map(|(name, m)| {
                let path = dir.join(format!("{name}.csv"));
                fs::write(&path, matrix_to_csv(m)).unwrap();
                path
            })
            .collect();

        let mut head_rows = Array2::<f64>::zeros((DIMS + 1, CLASSES));
        for c in 0..CLASSES {
            head_rows[[c, c]] = 1.0;
        }
        let head = dir.join("head.csv");
        fs::write(&head, matrix_to_csv(&head_rows)).unwrap();

        let labels = dir.join("labels.csv");
        fs::write(&labels, labels_to_csv(&label_values)).unwrap();

        Self {
            features,
            head,
            labels,
            matrices,
            label_values,
        }
    }

    pub fn feature_arg(&self) -> String {
        self.features
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}
