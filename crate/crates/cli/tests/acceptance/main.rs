//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line per check. Run with `--nocapture` to see the report.

mod commands;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use endogarble_tool::verify::{self, Check, DEFAULT_SEED};

const SEED: u64 = DEFAULT_SEED;

/// Runs one criterion, prints its lines and returns them with the elapsed
/// wall time.
fn run(f: verify::CriterionFn) -> (Vec<Check>, Duration) {
    let start = Instant::now();
    let checks = f(SEED).expect("criterion ran to completion");
    let elapsed = start.elapsed();
    for c in &checks {
        println!("{c}");
    }
    (checks, elapsed)
}

fn assert_passed(checks: &[Check], ids: &[&str]) {
    for id in ids {
        let c = checks
            .iter()
            .find(|c| c.id == *id)
            .unwrap_or_else(|| panic!("no check {id}"));
        assert!(c.passed, "{c}");
    }
}

fn assert_runtime(label: &str, elapsed: Duration, limit_secs: u64) {
    let line = format!("{label} runtime {:.2}s (limit {limit_secs}s)", elapsed.as_secs_f64());
    println!(
        "{} {line}",
        if elapsed.as_secs() < limit_secs { "PASS" } else { "FAIL" }
    );
    assert!(elapsed < Duration::from_secs(limit_secs), "{line}");
}

#[test]
fn criterion_1_estimation_error() {
    let (checks, elapsed) = run(verify::criterion_1);
    assert_passed(&checks, &["1a", "1b"]);
    assert_runtime("1", elapsed, 10);
}

#[test]
fn criterion_2_prediction_error() {
    let (checks, elapsed) = run(verify::criterion_2);
    assert_passed(&checks, &["2a", "2b"]);
    assert_runtime("2", elapsed, 10);
}

#[test]
fn criterion_3_small_sample_mse() {
    let (checks, elapsed) = run(verify::criterion_3);
    assert_passed(&checks, &["3a", "3b"]);
    assert_runtime("3", elapsed, 30);
}

#[test]
fn criterion_4_recovery_attacks() {
    let (checks, _) = run(verify::criterion_4);
    assert_passed(&checks, &["4a", "4b", "4d"]);
}

/// The λ₂ = 0.5 defense must push the λ-only attacker's error to 5% or
/// more. Its probability limit is |3.9 − sqrt(0.81 + 0.25) − 3| / 3, about
/// 4.3%, so this check cannot pass at these parameters.
#[test]
fn criterion_4c_output_noise_defeats_lambda_only_attacker() {
    let (checks, _) = run(verify::criterion_4);
    assert_passed(&checks, &["4c"]);
}

#[test]
fn criterion_5_multiple_regressors() {
    let (checks, _) = run(verify::criterion_5);
    assert_passed(&checks, &["5a", "5b", "5c", "5d"]);
}

#[test]
fn criterion_6_logistic_figure() {
    let (checks, elapsed) = run(verify::criterion_6);
    assert_passed(&checks, &["6a", "6b", "6c", "6d"]);
    assert_runtime("6", elapsed, 60);
}

#[test]
fn criterion_7_wire_loop() {
    let (checks, _) = run(verify::criterion_7);
    assert_passed(&checks, &["7a", "7b", "7c"]);
}

fn binary(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_endogarble"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn criterion_8_determinism() {
    let (checks, _) = run(verify::criterion_8);
    assert_passed(&checks, &["8a", "8b"]);

    let first = binary(&["verify", "--seed", "42"]);
    let second = binary(&["verify", "--seed", "42"]);
    let identical = first.stdout == second.stdout && !first.stdout.is_empty();
    println!(
        "{} 8c `verify --seed 42` twice gives byte-identical reports ({} bytes)",
        if identical { "PASS" } else { "FAIL" },
        first.stdout.len()
    );
    assert!(identical);
    assert_eq!(first.status.code(), second.status.code());

    let cases: [(&str, &[&str]); 4] = [
        (
            "tradeoff_univariate.csv",
            &[
                "tradeoff",
                "--beta",
                "3",
                "--gamma",
                "0,0.1,0.2,0.3,0.5,1",
                "--lambda",
                "1",
                "--var-x",
                "1",
            ],
        ),
        (
            "tradeoff_bivariate_independent.csv",
            &[
                "tradeoff", "--beta", "1,2", "--gamma", "0.5", "--lambda", "1", "--cov", "-0.5",
            ],
        ),
        (
            "tradeoff_bivariate_shared.csv",
            &[
                "tradeoff",
                "--beta",
                "1,2",
                "--gamma",
                "0.5",
                "--cov",
                "-0.5",
                "--noise-mode",
                "shared",
            ],
        ),
        (
            "logistic_figure_seed42.csv",
            &[
                "simulate",
                "--experiment",
                "logistic-figure",
                "--alpha",
                "2",
                "--beta",
                "3",
                "--lambda",
                "1",
                "--var-x",
                "8.3",
                "--n",
                "100000",
                "--link",
                "logistic",
                "--seed",
                "42",
            ],
        ),
    ];
    for (file, args) in cases {
        let out = binary(args);
        assert!(out.status.success(), "{file}: {}", String::from_utf8_lossy(&out.stderr));
        let stable = String::from_utf8(out.stdout).unwrap() == golden(file);
        println!("{} 8d golden {file} reproduced", if stable { "PASS" } else { "FAIL" });
        assert!(stable, "{file} differs from golden");
    }
}

#[test]
fn figure_thresholds_match_golden_record() {
    let record: serde_json::Value = serde_json::from_str(&golden("figure_thresholds.json")).unwrap();
    assert_eq!(
        record["probability_sigma2_at_gamma_1_max"].as_f64(),
        Some(verify::FIGURE_PROBABILITY_SIGMA2_MAX)
    );
    assert_eq!(record["ratio_at_gamma_1_max"].as_f64(), Some(verify::FIGURE_RATIO_MAX));
}
