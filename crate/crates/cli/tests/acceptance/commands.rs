//! Behaviour of the `endogarble` binary: output formats, exit codes and
//! the serve/steal round trip.

use std::io::{BufRead, BufReader};
use std::process::{Command, Output, Stdio};

fn endogarble(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_endogarble"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn tradeoff_hand_value() {
    let out = endogarble(&[
        "tradeoff", "--beta", "2", "--gamma", "0.5", "--lambda", "1", "--var-x", "1",
    ]);
    assert!(out.status.success());
    assert_eq!(
        stdout(&out),
        "gamma,lambda,d_closed,d_relative,sigma2_closed\n0.5,1.0,1.0,0.5,2.0\n"
    );
}

#[test]
fn tradeoff_json_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    let out = endogarble(&[
        "tradeoff",
        "--beta",
        "1,2",
        "--gamma",
        "0.5",
        "--cov=-0.5",
        "--format",
        "json",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v[0]["prediction_error_sq"].as_f64(), Some(2.0));
}

#[test]
fn sign_choice_flips_against_positive_covariance() {
    let out = endogarble(&[
        "tradeoff",
        "--beta",
        "1,2",
        "--gamma",
        "0.5",
        "--cov",
        "0.5",
        "--choose-signs",
    ]);
    assert!(out.status.success());
    let last = stdout(&out).lines().nth(1).unwrap().to_string();
    assert!(last.ends_with(",2.0"), "{last}");
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["frobnicate"][..],
        &["tradeoff", "--beta", "1", "--bogus"],
        &["simulate", "--experiment", "nonsense", "--beta", "1"],
        &[],
    ] {
        let out = endogarble(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("--help"), "{args:?}");
    }
}

#[test]
fn sweep_violation_is_reported() {
    let out = endogarble(&[
        "simulate",
        "--experiment",
        "sweep",
        "--beta",
        "2",
        "--gamma",
        "0.5",
        "--n",
        "50",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("tolerance violated") && err.contains("gamma=0.5"), "{err}");
    assert_eq!(stdout(&out).lines().count(), 2);

    let out = endogarble(&[
        "simulate",
        "--experiment",
        "sweep",
        "--beta",
        "2",
        "--gamma",
        "0.5",
        "--n",
        "50",
        "--seed",
        "3",
        "--no-check",
    ]);
    assert!(out.status.success());
}

#[test]
fn small_sample_and_recovery_reports() {
    let out = endogarble(&[
        "simulate",
        "--experiment",
        "small-sample",
        "--beta",
        "1",
        "--gamma",
        "0.5",
        "--n",
        "10",
        "--replicates",
        "10000",
        "--n-ladder",
        "10,20",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("n,replicates,seed,mse_empirical,mse_analytic"));
    assert_eq!(text.lines().count(), 3);

    let out = endogarble(&[
        "simulate",
        "--experiment",
        "recovery",
        "--beta",
        "3",
        "--gamma",
        "0.3",
        "--n",
        "200000",
        "--format",
        "json",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["attackers"].as_array().unwrap().len(), 4);
}

#[test]
fn serve_then_steal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"model": {"intercept": 0.0, "slopes": [3.0], "link": "identity"},
            "garbling": {"gammas": [0.3], "lambda": 1.0, "output_lambda": 0.0, "noise_mode": "independent"},
            "bind": "127.0.0.1:0", "seed": 7}"#,
    )
    .unwrap();
    let mut server = Command::new(env!("CARGO_BIN_EXE_endogarble"))
        .args(["serve", "--config", cfg.to_str().unwrap()])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stderr.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let url = line
        .trim()
        .strip_prefix("listening on ")
        .expect("announces its address")
        .to_string();

    let out = endogarble(&[
        "steal",
        "--endpoint",
        &url,
        "--n",
        "100000",
        "--estimator",
        "ols",
        "--known-lambda",
        "1",
        "--format",
        "json",
    ]);
    server.kill().unwrap();
    server.wait().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let beta_hat = v["fit"]["slopes_hat"][0].as_f64().unwrap();
    let recovered = v["recovered_beta"].as_f64().unwrap();
    assert!((beta_hat - 3.9).abs() / 3.9 < 0.02, "{beta_hat}");
    assert!((recovered - 3.0).abs() / 3.0 < 0.02, "{recovered}");
}

#[test]
fn steal_reports_unreachable_service() {
    let out = endogarble(&["steal", "--endpoint", "http://127.0.0.1:9", "--n", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("after 3 attempt"));
}
