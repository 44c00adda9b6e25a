use std::path::Path;
use std::process::{Command, Output};

fn betaqual(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_betaqual"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_truth(dir: &Path) -> String {
    let path = dir.join("truth.txt");
    std::fs::write(
        &path,
        "weights = 0.4, 0.3, 0.3\nsigma2 = 0.01\nn_per_group = 30\nperiods = 2\nx_law = ordinal(11)\n",
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn help_and_version_succeed() {
    assert!(betaqual(&["--help"]).status.success());
    let out = betaqual(&["--version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(betaqual(&[]).status.code(), Some(1));
    assert_eq!(betaqual(&["fit", "--no-such-flag"]).status.code(), Some(1));
}

#[test]
fn invalid_configuration_values_exit_with_one() {
    let out = betaqual(&["fit", "--input_path", "x.csv", "--burnin", "many"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error[invalid-input]"));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv").display().to_string();
    let out_dir = dir.path().join("out").display().to_string();
    let out = betaqual(&["fit", "--input_path", &missing, "--output_dir", &out_dir]);
    assert_eq!(out.status.code(), Some(5));
    assert!(stderr(&out).starts_with("error[io]"));
}

#[test]
fn malformed_and_misshapen_csv_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out").display().to_string();

    let parse = dir.path().join("parse.csv");
    std::fs::write(&parse, "q1,overall,period\n3,5,1\nthree,5,1\n").unwrap();
    let out = betaqual(&["fit", "--input_path", parse.to_str().unwrap(), "--output_dir", &out_dir]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("row 2"), "{}", stderr(&out));

    let schema = dir.path().join("schema.csv");
    std::fs::write(&schema, "q1,q3,overall,period\n3,4,5,1\n").unwrap();
    let out = betaqual(&["fit", "--input_path", schema.to_str().unwrap(), "--output_dir", &out_dir]);
    assert_eq!(out.status.code(), Some(3));

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "q1,overall,period\n3,0,1\n4,10,1\n").unwrap();
    let out = betaqual(&["fit", "--input_path", empty.to_str().unwrap(), "--output_dir", &out_dir]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("error[empty-dataset]"));
}

#[test]
fn infeasible_truth_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.txt");
    std::fs::write(&truth, "weights = 0.5, 0.5\nsigma2 = 0.3\nn_per_group = 10\n").unwrap();
    let output = dir.path().join("sim.csv").display().to_string();
    let out = betaqual(&["simulate", "--truth", truth.to_str().unwrap(), "--output", &output]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn simulate_fit_and_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let truth = write_truth(dir.path());
    let csv = dir.path().join("sim.csv").display().to_string();
    let out = betaqual(&["simulate", "--truth", &truth, "--seed", "4", "--output", &csv]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(Path::new(&format!("{csv}.truth.txt")).exists());
    assert!(Path::new(&format!("{csv}.latents.csv")).exists());

    let config = dir.path().join("run.cfg");
    std::fs::write(&config, "iterations = 800\nburnin = 300\nseed = 3\n").unwrap();
    let out_dir = dir.path().join("fit");
    let out = betaqual(&[
        "fit",
        "--config",
        config.to_str().unwrap(),
        "--input_path",
        &csv,
        "--model_kind",
        "separated",
        "--output_dir",
        out_dir.to_str().unwrap(),
        "--emit_plots",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for file in [
        "summary.csv",
        "draws_period1.csv",
        "draws_period2.csv",
        "draws_differences.csv",
        "differences.csv",
        "boxplots.svg",
        "provenance.txt",
    ] {
        assert!(out_dir.join(file).exists(), "{file} missing");
    }

    // the provenance file reproduces the run when used as a configuration
    let rerun = dir.path().join("rerun");
    let out = betaqual(&[
        "fit",
        "--config",
        out_dir.join("provenance.txt").to_str().unwrap(),
        "--output_dir",
        rerun.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        std::fs::read(out_dir.join("summary.csv")).unwrap(),
        std::fs::read(rerun.join("summary.csv")).unwrap()
    );

    let out = betaqual(&["summarize", "--draws", out_dir.join("draws_period1.csv").to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.lines().count() >= 5, "{table}");
}

#[test]
fn compare_prints_both_models() {
    let dir = tempfile::tempdir().unwrap();
    let truth = write_truth(dir.path());
    let csv = dir.path().join("sim.csv").display().to_string();
    assert!(betaqual(&["simulate", "--truth", &truth, "--output", &csv]).status.success());
    let out_dir = dir.path().join("cmp").display().to_string();
    let out = betaqual(&[
        "compare",
        "--input_path",
        &csv,
        "--iterations",
        "600",
        "--burnin",
        "200",
        "--output_dir",
        &out_dir,
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("joint.dic") && text.contains("separated.dic"), "{text}");
    assert!(Path::new(&out_dir).join("compare.txt").exists());
}

#[test]
fn clamp_policy_keeps_boundary_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = betaqual(&[
        "fit",
        "--input_path",
        &fixture("survey_levels.csv"),
        "--boundary_policy",
        "clamp(0.01)",
        "--iterations",
        "400",
        "--burnin",
        "100",
        "--output_dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let ingestion = std::fs::read_to_string(out_dir.join("ingestion.txt")).unwrap();
    assert!(ingestion.contains("clamped"), "{ingestion}");
}
