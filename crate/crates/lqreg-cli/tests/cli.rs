//! End-to-end tests of the `lqbench` binary.

use lqreg::bench::{parse_csv, CSV_HEADER, TRACE_HEADER};
use lqreg::SolveStatus;
use std::path::Path;
use std::process::{Command, Output};

fn lqbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lqbench"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn stdout_of(output: &Output) -> String {
    assert!(
        output.status.success(),
        "lqbench failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn write_tiny_dataset(path: &Path) {
    // 6 samples, 14 features, separable by feature 1's sign.
    let content = "\
1 1:0.9 3:0.2 14:0.1\n\
-1 1:-0.7 5:0.4\n\
1 1:0.8 7:-0.3\n\
-1 1:-1.0 9:0.2 11:-0.5\n\
1 1:0.6 2:0.1\n\
-1 1:-0.5 13:0.3\n";
    std::fs::write(path, content).unwrap();
}

#[test]
fn solve_prints_a_metric_row_with_exact_recovery() {
    let out = stdout_of(&lqbench(&[
        "solve", "--m", "60", "--n", "240", "--s", "6", "--q", "0", "--seed", "5",
    ]));
    assert!(out.starts_with(CSV_HEADER));
    let rows = parse_csv(&out).unwrap();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!(row.algorithm, "psnp");
    assert_eq!(row.status, SolveStatus::StationaryStop);
    assert_eq!(row.support_size, 6);
    assert!(row.re_err.unwrap() < 1e-8, "re_err = {:?}", row.re_err);
    assert!(row.acc.is_none());
}

#[test]
fn solve_writes_a_nonincreasing_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace_path = dir.path().join("trace.csv");
    let out_path = dir.path().join("row.csv");
    let out = lqbench(&[
        "solve",
        "--m",
        "50",
        "--n",
        "200",
        "--s",
        "5",
        "--q",
        "0.5",
        "--seed",
        "9",
        "--algo",
        "proxgrad",
        "--trace",
        trace_path.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let trace = std::fs::read_to_string(&trace_path).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some(TRACE_HEADER));
    let objectives: Vec<f64> = lines
        .map(|line| line.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(!objectives.is_empty());
    for pair in objectives.windows(2) {
        assert!(pair[1] <= pair[0], "objective rose: {pair:?}");
    }

    let rows = parse_csv(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(rows[0].algorithm, "proxgrad");
}

#[test]
fn bench_cs_aggregates_cells_into_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("bench.csv");
    let out = lqbench(&[
        "bench-cs",
        "--m",
        "40",
        "--n",
        "160",
        "--s",
        "4",
        "--trials",
        "3",
        "--q",
        "0,0.5",
        "--seed",
        "2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = parse_csv(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    // 2 algorithms x 2 exponents.
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert!(row.algorithm.ends_with("@m40s4nf0"), "id {:?}", row.algorithm);
        assert!(row.re_err.is_some());
        assert!(row.acc.is_none());
    }
    assert!(rows.iter().any(|r| r.algorithm.starts_with("psnp")));
    assert!(rows.iter().any(|r| r.algorithm.starts_with("proxgrad")));
}

#[test]
fn bench_svm_runs_all_six_combinations() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("tiny.txt");
    write_tiny_dataset(&data_path);
    let out = stdout_of(&lqbench(&[
        "bench-svm",
        "--data",
        data_path.to_str().unwrap(),
        "--max-iter",
        "2000",
    ]));
    let rows = parse_csv(&out).unwrap();
    assert_eq!(rows.len(), 6);
    for row in &rows {
        assert!(row.acc.is_some());
        assert!(row.re_err.is_none());
        // The dataset is linearly separable on one feature.
        assert!(row.acc.unwrap() >= 0.5, "degenerate accuracy in {row:?}");
    }
    let qs: Vec<f64> = rows.iter().map(|r| r.q).collect();
    assert!(qs.contains(&0.0) && qs.contains(&0.5));
}

#[test]
fn missing_dataset_file_fails_cleanly() {
    let out = lqbench(&["bench-svm", "--data", "/nonexistent/nowhere.txt"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nowhere.txt"), "stderr: {stderr}");
}

#[test]
fn unknown_flag_fails_cleanly() {
    let out = lqbench(&["solve", "--frobnicate"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("frobnicate"), "stderr: {stderr}");
}

#[test]
fn conflicting_lambda_flags_are_rejected() {
    let out = lqbench(&["solve", "--lambda", "0.1", "--lambda-a", "0.02"]);
    assert!(!out.status.success());
}
