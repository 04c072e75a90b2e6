//! End-to-end tests of the `ogtt` binary: stage composition through the
//! filesystem, error reporting, and the schema round-trip between fit and
//! classify.

use std::path::Path;
use std::process::{Command, Output};

fn ogtt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ogtt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fast_settings(out: &str) -> Vec<String> {
    [
        "--output-dir",
        out,
        "--walkers",
        "16",
        "--iterations",
        "800",
        "--burn-in",
        "200",
        "--starts",
        "8",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[test]
fn synth_fit_classify_report_compose() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let synth = ogtt(&[
        "synth",
        "--seed",
        "5",
        "--output-dir",
        out,
        "--set",
        "cohort.counts=[4, 1, 1, 1, 1]",
    ]);
    assert!(synth.status.success(), "{synth:?}");
    assert!(dir.path().join("cohort.csv").exists());
    assert!(dir.path().join("cohort_truths.csv").exists());

    // fit the cohort written by synth through the documented input path
    let cohort = dir.path().join("cohort.csv");
    let mut fit_args: Vec<String> = vec![
        "fit".into(),
        "--seed".into(),
        "5".into(),
        "--input".into(),
        cohort.to_str().unwrap().into(),
    ];
    fit_args.extend(fast_settings(out));
    let fit = ogtt(&fit_args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(fit.status.success(), "{fit:?}");
    let summaries = std::fs::read_to_string(dir.path().join("summaries.jsonl")).unwrap();
    assert_eq!(summaries.lines().count(), 8);
    assert!(dir.path().join("fit_curves").join("000_p001.csv").exists());
    assert!(dir.path().join("marginals").join("000_p001.csv").exists());

    let classify = ogtt(&["classify", "--output-dir", out]);
    assert!(classify.status.success(), "{classify:?}");
    let scatter = std::fs::read_to_string(dir.path().join("scatter.csv")).unwrap();
    assert_eq!(scatter.lines().next().unwrap(), "patient_id,A,alpha,label,predicted");
    assert_eq!(scatter.lines().count(), 9);
    assert!(dir.path().join("boundary.csv").exists());
    assert!(dir.path().join("svm_model.json").exists());

    let report = ogtt(&["report", "--output-dir", out]);
    assert!(report.status.success(), "{report:?}");
    let text = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(text.contains("Cohort (8 patients)"));
    assert!(text.contains("training accuracy"));
}

#[test]
fn fit_curve_follows_the_summary_map_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args: Vec<String> = vec![
        "fit".into(),
        "--seed".into(),
        "11".into(),
        "--set".into(),
        "cohort.counts=[1, 0, 0, 0, 0]".into(),
    ];
    args.extend(fast_settings(out));
    let fit = ogtt(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(fit.status.success(), "{fit:?}");

    let summary: serde_json::Value = serde_json::from_str(
        std::fs::read_to_string(dir.path().join("summaries.jsonl"))
            .unwrap()
            .lines()
            .next()
            .unwrap(),
    )
    .unwrap();
    let curve = std::fs::read_to_string(dir.path().join("fit_curves/000_p001.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(lines.next().unwrap(), "t,curve,observed");
    assert_eq!(curve.lines().count(), 122, "header plus 121 minutes");
    // the t = 0 row equals A cos(delta) of the reported MAP
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    let a = summary["map"]["A"].as_f64().unwrap();
    let delta = summary["map"]["delta"].as_f64().unwrap();
    let at_zero: f64 = first[1].parse().unwrap();
    assert!((at_zero - a * delta.cos()).abs() < 1e-9);
}

#[test]
fn empty_cohort_fits_to_empty_outputs_and_zero_count_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let fit = ogtt(&[
        "fit",
        "--output-dir",
        out,
        "--set",
        "cohort.counts=[0, 0, 0, 0, 0]",
    ]);
    assert!(fit.status.success(), "{fit:?}");
    let summaries = std::fs::read_to_string(dir.path().join("summaries.jsonl")).unwrap();
    assert!(summaries.is_empty());

    let report = ogtt(&["report", "--output-dir", out]);
    assert!(report.status.success(), "{report:?}");
    let text = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(text.contains("Cohort (0 patients)"));
    assert!(text.contains("classification skipped"));
}

#[test]
fn missing_artifacts_are_reported_by_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let classify = ogtt(&["classify", "--output-dir", out]);
    assert!(!classify.status.success());
    let stderr = String::from_utf8_lossy(&classify.stderr);
    assert!(stderr.contains("summaries.jsonl"), "{stderr}");

    // fit one healthy patient, then report without classification artifacts
    let mut args: Vec<String> = vec![
        "fit".into(),
        "--seed".into(),
        "3".into(),
        "--set".into(),
        "cohort.counts=[2, 0, 0, 0, 0]".into(),
    ];
    args.extend(fast_settings(out));
    assert!(ogtt(&args.iter().map(String::as_str).collect::<Vec<_>>())
        .status
        .success());
    let report = ogtt(&["report", "--output-dir", out]);
    assert!(!report.status.success());
    let stderr = String::from_utf8_lossy(&report.stderr);
    assert!(stderr.contains("svm_model.json"), "{stderr}");
}

#[test]
fn single_class_cohort_is_a_clean_classification_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args: Vec<String> = vec![
        "fit".into(),
        "--seed".into(),
        "9".into(),
        "--set".into(),
        "cohort.counts=[3, 0, 0, 0, 0]".into(),
    ];
    args.extend(fast_settings(out));
    assert!(ogtt(&args.iter().map(String::as_str).collect::<Vec<_>>())
        .status
        .success());
    let classify = ogtt(&["classify", "--output-dir", out]);
    assert!(!classify.status.success());
    let stderr = String::from_utf8_lossy(&classify.stderr);
    assert!(stderr.contains("both groups"), "{stderr}");
}

#[test]
fn malformed_input_names_the_offending_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(
        &csv,
        "patient_id,label,g0,g30,g60,g90,g120\np1,H,90,150,140,120,100\np2,XYZ,90,150,140,120,100\n",
    )
    .unwrap();
    let fit = ogtt(&[
        "fit",
        "--input",
        csv.to_str().unwrap(),
        "--output-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert!(!fit.status.success());
    let stderr = String::from_utf8_lossy(&fit.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "seed = 1\n[cohort]\ncounts = [2, 0, 0, 0, 0]\n",
    )
    .unwrap();
    // invalid: input flag plus [cohort] table
    let conflict = ogtt(&[
        "synth",
        "--config",
        config.to_str().unwrap(),
        "--input",
        "x.csv",
    ]);
    assert!(!conflict.status.success());
    assert!(String::from_utf8_lossy(&conflict.stderr).contains("exactly one"));

    let out = dir.path().join("out");
    let synth = ogtt(&[
        "synth",
        "--config",
        config.to_str().unwrap(),
        "--output-dir",
        out.to_str().unwrap(),
        "--set",
        "cohort.counts=[1, 0, 0, 0, 0]",
    ]);
    assert!(synth.status.success(), "{synth:?}");
    let cohort = std::fs::read_to_string(out.join("cohort.csv")).unwrap();
    assert_eq!(cohort.lines().count(), 2, "--set overrides the file value");
}

#[test]
fn synth_is_deterministic_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let synth = ogtt(&[
            "synth",
            "--seed",
            "21",
            "--output-dir",
            out.to_str().unwrap(),
            "--set",
            "cohort.counts=[3, 1, 1, 1, 1]",
        ]);
        assert!(synth.status.success());
    }
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(read(&out_a.join("cohort.csv")), read(&out_b.join("cohort.csv")));
    assert_eq!(
        read(&out_a.join("cohort_truths.csv")),
        read(&out_b.join("cohort_truths.csv"))
    );
}
