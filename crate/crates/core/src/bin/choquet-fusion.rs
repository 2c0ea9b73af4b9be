use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use choquet_fusion::de::{Bounds, DeConfig};
use choquet_fusion::io::{self, MetricsReport, ModelFile};
use choquet_fusion::{
    choquet_aggregate, confusion_matrix, fit_densities, macro_metrics, predict, solve_lambda,
    DensityVector, EvidenceBatch, LabeledSet, Result, SugenoMeasure,
};

/// Choquet-integral fusion of model evidence with Sugeno-λ measures.
#[derive(Debug, Parser)]
#[command(name = "choquet-fusion", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve λ for a set of fuzzy densities.
    Lambda {
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        densities: Vec<f64>,
    },
    /// Choquet-fuse aligned feature matrices into one matrix.
    Aggregate {
        #[arg(long, value_delimiter = ',', required = true)]
        inputs: Vec<PathBuf>,
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        densities: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit per-criterion densities on validation data with differential evolution.
    Fit(FitArgs),
    /// Evaluate a fitted model on labelled features.
    Evaluate {
        #[arg(long, value_delimiter = ',', required = true)]
        features: Vec<PathBuf>,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Metrics from raw predicted and true class indices.
    Metrics {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        classes: usize,
        #[command(flatten)]
        report: ReportArgs,
    },
}

#[derive(Debug, Args)]
struct FitArgs {
    /// TOML run manifest; replaces the individual input flags.
    #[arg(long, conflicts_with_all = ["features", "labels", "head", "out", "names"])]
    manifest: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', required_unless_present = "manifest")]
    features: Vec<PathBuf>,
    /// Criterion names; defaults to the feature file stems.
    #[arg(long, value_delimiter = ',')]
    names: Vec<String>,
    #[arg(long, required_unless_present = "manifest")]
    labels: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    head: Option<PathBuf>,
    #[arg(long = "np", default_value_t = choquet_fusion::de::DEFAULT_POPULATION_SIZE)]
    population_size: usize,
    #[arg(long, default_value_t = choquet_fusion::de::DEFAULT_MAX_GENERATIONS)]
    generations: usize,
    #[arg(long = "scale-f", default_value_t = choquet_fusion::de::DEFAULT_SCALE_FACTOR)]
    scale_factor: f64,
    #[arg(long = "cr", default_value_t = choquet_fusion::de::DEFAULT_CROSSOVER_RATE)]
    crossover_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, required_unless_present = "manifest")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Report class 0 against all other classes.
    #[arg(long)]
    binary: bool,
    /// Class names for the report, in index order.
    #[arg(long, value_delimiter = ',')]
    class_names: Vec<String>,
    /// Write the structured (JSON) report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_batch(paths: &[PathBuf]) -> Result<EvidenceBatch> {
    let matrices = paths
        .iter()
        .map(io::load_matrix)
        .collect::<Result<Vec<_>>>()?;
    EvidenceBatch::new(matrices)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn emit_report(
    predictions: &[usize],
    labels: &[usize],
    classes: usize,
    args: &ReportArgs,
) -> Result<()> {
    let mut cm = confusion_matrix(predictions, labels, classes)?;
    let mut names = (!args.class_names.is_empty()).then(|| args.class_names.clone());
    if args.binary {
        cm = cm.collapse_to_binary(0)?;
        let positive = names
            .as_ref()
            .and_then(|n| n.first().cloned())
            .unwrap_or_else(|| "class_0".to_string());
        names = Some(vec![positive.clone(), format!("not_{positive}")]);
    }
    if let Some(n) = &names {
        if n.len() != cm.classes() {
            return Err(choquet_fusion::Error::ShapeMismatch(format!(
                "{} class names for {} classes",
                n.len(),
                cm.classes()
            )));
        }
    }
    let report = MetricsReport::new(macro_metrics(&cm)?, names);
    print!("{}", report.to_text_table());
    if let Some(out) = &args.out {
        std::fs::write(out, io::to_json(&report)).map_err(|source| choquet_fusion::Error::Io {
            path: out.clone(),
            source,
        })?;
    }
    Ok(())
}

fn run_fit(args: FitArgs) -> Result<()> {
    let (features, names, labels_path, head_path, out, config) = match &args.manifest {
        Some(path) => {
            let manifest = io::load_manifest(path)?;
            let config = manifest.de_config()?;
            (
                manifest
                    .criteria
                    .iter()
                    .map(|c| c.features.clone())
                    .collect::<Vec<_>>(),
                manifest
                    .criteria
                    .iter()
                    .map(|c| c.name.clone())
                    .collect::<Vec<_>>(),
                manifest.labels,
                manifest.head,
                manifest.model_out,
                config,
            )
        }
        None => {
            let names = if args.names.is_empty() {
                args.features.iter().map(|p| file_stem(p)).collect()
            } else {
                args.names.clone()
            };
            let config = DeConfig {
                bounds: Bounds::uniform(args.features.len(), 0.0, 1.0)?,
                population_size: args.population_size,
                scale_factor: args.scale_factor,
                crossover_rate: args.crossover_rate,
                max_generations: args.generations,
                seed: args.seed,
            };
            (
                args.features.clone(),
                names,
                args.labels.clone().expect("required by clap"),
                args.head.clone().expect("required by clap"),
                args.out.clone().expect("required by clap"),
                config,
            )
        }
    };
    config.validate()?;
    let head = io::load_head(&head_path)?;
    let labels = io::load_labels(&labels_path)?;
    let evidence = load_batch(&features)?.with_names(names)?;
    let validation = LabeledSet::new(evidence, labels, head.classes())?;
    let fitted = fit_densities(&validation, &head, &config)?;
    let model = ModelFile::from_fitted(&fitted, head_path)?;
    io::save_model(&out, &model)?;

    let densities: Vec<String> = model
        .densities
        .iter()
        .map(|g| io::format_significant(*g, 9))
        .collect();
    println!("densities: {}", densities.join(","));
    println!("lambda: {}", io::format_significant(model.lambda, 9));
    println!(
        "validation loss: {}",
        io::format_significant(model.final_loss, 9)
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Lambda { densities } => {
            let lambda = solve_lambda(&DensityVector::new(densities)?)?;
            println!("{}", io::format_significant(lambda, 9));
        }
        Command::Aggregate {
            inputs,
            densities,
            out,
        } => {
            let measure = SugenoMeasure::new(DensityVector::new(densities)?)?;
            let fused = choquet_aggregate(&load_batch(&inputs)?, &measure)?;
            io::write_matrix(&out, &fused)?;
        }
        Command::Fit(args) => run_fit(args)?,
        Command::Evaluate {
            features,
            labels,
            model,
            report,
        } => {
            let fitted = io::load_model(&model)?.into_fitted(model.parent())?;
            let evidence = load_batch(&features)?;
            let labels = io::load_labels(&labels)?;
            let predictions = predict(&evidence, &fitted)?;
            emit_report(&predictions, &labels, fitted.head.classes(), &report)?;
        }
        Command::Metrics {
            predictions,
            labels,
            classes,
            report,
        } => {
            let predictions = io::load_labels(&predictions)?;
            let labels = io::load_labels(&labels)?;
            emit_report(&predictions, &labels, classes, &report)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
