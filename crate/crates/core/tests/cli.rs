mod common;

use std::fs;

use ndarray::Array2;

use choquet_fusion::io::{load_matrix, load_model, matrix_to_csv};
use choquet_fusion::{choquet_aggregate, DensityVector, EvidenceBatch, SugenoMeasure};

use common::{run_cli, SeparableFixture};

fn stdout(output: &std::process::Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn stderr(output: &std::process::Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

#[test]
fn lambda_prints_root() {
    let output = run_cli(&["lambda", "--densities", "0.12470619,0.29971752,0.2989895"]);
    assert!(output.status.success());
    let value: f64 = stdout(&output).trim().parse().unwrap();
    assert!((value - 1.5253944).abs() < 1e-4);
}

#[test]
fn lambda_additive_is_zero() {
    let output = run_cli(&["lambda", "--densities", "0.5,0.3,0.2"]);
    assert!(output.status.success());
    assert_eq!(stdout(&output).trim().parse::<f64>().unwrap(), 0.0);
}

#[test]
fn usage_error_exits_two() {
    let output = run_cli(&["lambda"]);
    assert_eq!(output.status.code(), Some(2));
    let output = run_cli(&["no-such-command"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn invalid_density_exits_one() {
    let output = run_cli(&["lambda", "--densities", "0.5,1.5"]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("invalid fuzzy density"));
}

#[test]
fn aggregate_round_trips_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = SeparableFixture::write(dir.path(), 40, 5);
    let out = dir.path().join("fused.csv");
    let output = run_cli(&[
        "aggregate",
        "--inputs",
        &fixture.feature_arg(),
        "--densities",
        "0.2,0.6,0.3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));

    let measure = SugenoMeasure::new(DensityVector::new(vec![0.2, 0.6, 0.3]).unwrap()).unwrap();
    let inputs = fixture
        .features
        .iter()
        .map(|p| load_matrix(p).unwrap())
        .collect();
    let expected = choquet_aggregate(&EvidenceBatch::new(inputs).unwrap(), &measure).unwrap();
    let written = load_matrix(&out).unwrap();
    assert_eq!(written.dim(), expected.dim());
    for (a, b) in written.iter().zip(expected.iter()) {
        assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-300), "{a} vs {b}");
    }
}

#[test]
fn aggregate_reports_file_and_position() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.csv");
    let bad = dir.path().join("bad.csv");
    fs::write(&good, "1,2\n3,4\n").unwrap();
    fs::write(&bad, "1,2\n3,oops\n").unwrap();
    let inputs = format!("{},{}", good.display(), bad.display());
    let output = run_cli(&[
        "aggregate",
        "--inputs",
        &inputs,
        "--densities",
        "0.4,0.4",
        "--out",
        dir.path().join("o.csv").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    let message = stderr(&output);
    assert!(message.contains("bad.csv"), "{message}");
    assert!(message.contains("row 2, column 2"), "{message}");
}

#[test]
fn ragged_and_missing_files_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "1,2\n3\n").unwrap();
    let missing = dir.path().join("missing.csv");
    let inputs = format!("{},{}", ragged.display(), ragged.display());
    let output = run_cli(&[
        "aggregate",
        "--inputs",
        &inputs,
        "--densities",
        "0.4,0.4",
        "--out",
        "x.csv",
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("ragged.csv: row 2 has 1 columns, expected 2"));

    let inputs = format!("{},{}", missing.display(), ragged.display());
    let output = run_cli(&[
        "aggregate",
        "--inputs",
        &inputs,
        "--densities",
        "0.4,0.4",
        "--out",
        "x.csv",
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("missing.csv: file not found"));
}

#[test]
fn fit_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = SeparableFixture::write(dir.path(), 120, 3);
    let model = dir.path().join("model.json");
    let output = run_cli(&[
        "fit",
        "--features",
        &fixture.feature_arg(),
        "--labels",
        fixture.labels.to_str().unwrap(),
        "--head",
        fixture.head.to_str().unwrap(),
        "--np",
        "8",
        "--generations",
        "10",
        "--seed",
        "1",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let text = stdout(&output);
    assert!(
        text.contains("densities: ")
            && text.contains("lambda: ")
            && text.contains("validation loss: ")
    );

    let saved = load_model(&model).unwrap();
    assert_eq!(saved.criteria, vec!["noise_a", "informative", "noise_b"]);
    assert_eq!(saved.history.len(), 11);
    assert_eq!(saved.seed, 1);

    let report = dir.path().join("report.json");
    let output = run_cli(&[
        "evaluate",
        "--features",
        &fixture.feature_arg(),
        "--labels",
        fixture.labels.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["classes"], 3);
    assert_eq!(json["total"], 120);
    assert!(json["mcc_multiclass"].is_number());

    let output = run_cli(&[
        "evaluate",
        "--features",
        &fixture.feature_arg(),
        "--labels",
        fixture.labels.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--binary",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["classes"], 2);
    assert_eq!(json["class_names"][1], "not_class_0");
}

#[test]
fn fit_rejects_mismatched_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = SeparableFixture::write(dir.path(), 30, 8);
    let narrow = dir.path().join("narrow.csv");
    fs::write(&narrow, matrix_to_csv(&Array2::<f64>::zeros((30, 5)))).unwrap();
    let features = format!("{},{}", fixture.features[0].display(), narrow.display());
    let output = run_cli(&[
        "fit",
        "--features",
        &features,
        "--labels",
        fixture.labels.to_str().unwrap(),
        "--head",
        fixture.head.to_str().unwrap(),
        "--out",
        dir.path().join("m.json").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(
        stderr(&output).contains("shape mismatch"),
        "{}",
        stderr(&output)
    );
}

#[test]
fn fit_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = SeparableFixture::write(dir.path(), 60, 4);
    let manifest = dir.path().join("run.toml");
    fs::write(
        &manifest,
        r#"head = "head.csv"
labels = "labels.csv"
model_out = "model.json"

[[criteria]]
name = "a"
features = "noise_a.csv"

[[criteria]]
name = "b"
features = "informative.csv"

[de]
population_size = 6
generations = 5
seed = 3
"#,
    )
    .unwrap();
    let output = run_cli(&["fit", "--manifest", manifest.to_str().unwrap()]);
    assert!(output.status.success(), "{}", stderr(&output));
    let saved = load_model(dir.path().join("model.json")).unwrap();
    assert_eq!(saved.criteria, vec!["a", "b"]);
    assert_eq!(saved.de_config.population_size, 6);
    assert_eq!(saved.history.len(), 6);
    drop(fixture);
}

#[test]
fn metrics_text_and_binary() {
    let fixtures = common::fixture_dir();
    let predictions = fixtures.join("reference_predictions.csv");
    let labels = fixtures.join("reference_labels.csv");
    let output = run_cli(&[
        "metrics",
        "--predictions",
        predictions.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
        "--classes",
        "3",
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    assert!(stdout(&output).contains("98.0000"), "{}", stdout(&output));

    let output = run_cli(&[
        "metrics",
        "--predictions",
        predictions.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
        "--classes",
        "3",
        "--binary",
        "--class-names",
        "COVID",
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("not_COVID"), "{text}");
    // 198 of 200 positives and all 200 negatives are correct
    assert!(text.contains("99.5000"), "{text}");
}

#[test]
fn metrics_rejects_out_of_range_labels() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    let y = dir.path().join("y.csv");
    fs::write(&p, "0\n1\n5\n").unwrap();
    fs::write(&y, "0\n1\n1\n").unwrap();
    let output = run_cli(&[
        "metrics",
        "--predictions",
        p.to_str().unwrap(),
        "--labels",
        y.to_str().unwrap(),
        "--classes",
        "2",
    ]);
    assert_eq!(output.status.code(), Some(1));
}
