use std::process::{Command, Output};

fn gwtail(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwtail"))
        .args(args)
        .env_remove("GWTAIL_SEED")
        .env_remove("GWTAIL_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Data rows of a CSV document, without the config comment and header.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn bound_at_zero_is_clamped() {
    let text = stdout(&gwtail(&["bound", "--m", "2", "--d", "2", "--x", "0"]));
    let r = rows(&text);
    assert_eq!(r[0][1], "2");
    assert_eq!(r[0][2], "1");
}

#[test]
fn exact_matches_hand_computation() {
    let text = stdout(&gwtail(&["exact", "--extremal", "1.5", "2", "--n", "2", "--x", "1"]));
    let log_p: f64 = rows(&text)[0][2].parse().unwrap();
    assert!((log_p - (27.0f64 / 64.0).ln()).abs() < 1e-12);
}

#[test]
fn pmf_sums_to_one() {
    let text = stdout(&gwtail(&["exact", "--probs", "0.2,0.3,0.5", "--n", "3", "--pmf"]));
    let total: f64 = rows(&text).iter().map(|r| r[1].parse::<f64>().unwrap().exp()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn chain_passes_every_step() {
    let text = stdout(&gwtail(&["chain", "--m", "2", "--d", "2"]));
    let r = rows(&text);
    assert!(r.len() >= 5);
    assert!(text.lines().skip(2).all(|l| l.split(',').nth(1) == Some("true")), "{text}");
}

#[test]
fn header_records_the_configuration() {
    let text = stdout(&gwtail(&["mc", "--extremal", "1.5", "2", "--n", "4", "--x", "1", "--samples", "500"]));
    let first = text.lines().next().unwrap();
    let json: serde_json::Value = serde_json::from_str(first.strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!(json["subcommand"], "mc");
    assert_eq!(json["seed"], 0x475731);
    assert_eq!(json["samples"], 500);
    assert!(json.get("workers").is_none());
}

#[test]
fn reruns_are_byte_identical() {
    let args = ["mc", "--extremal", "1.5", "2", "--n", "6", "--x-grid", "1,2,3", "--samples", "2000", "--seed", "9"];
    let a = gwtail(&args);
    let b = gwtail(&args);
    assert_eq!(stdout(&a), stdout(&b));
    let mut threaded = Command::new(env!("CARGO_BIN_EXE_gwtail"));
    threaded.args(args).arg("--workers").arg("3");
    assert_eq!(stdout(&a), stdout(&threaded.output().unwrap()));
}

#[test]
fn seed_from_environment() {
    let args = ["mc", "--extremal", "1.5", "2", "--n", "5", "--x", "1", "--samples", "300"];
    let flagged = stdout(&gwtail(&[&args[..], &["--seed", "0x2a"]].concat()));
    let env = Command::new(env!("CARGO_BIN_EXE_gwtail")).args(args).env("GWTAIL_SEED", "42").output().unwrap();
    assert_eq!(flagged, stdout(&env));
    assert!(flagged.contains("\"seed\":42"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"extremal":[1.5,2],"n":2,"x":1,"seed":"0x10","format":"json"}"#).unwrap();
    let cfg = path.to_str().unwrap();
    let text = stdout(&gwtail(&["exact", "--config", cfg]));
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["config"]["seed"], 16);
    let log_p = json["results"][0]["log_p"].as_f64().unwrap();
    assert!((log_p - (27.0f64 / 64.0).ln()).abs() < 1e-12);

    let text = stdout(&gwtail(&["exact", "--config", cfg, "--x", "0", "--format", "csv"]));
    assert_eq!(rows(&text)[0][2], "0");
}

#[test]
fn config_file_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"extremal":[1.5,2],"n":2,"x":1,"sample":5}"#).unwrap();
    assert_eq!(gwtail(&["exact", "--config", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn output_file_written_only_on_success() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.csv");
    let bad = dir.path().join("bad.csv");
    let out = gwtail(&["bound", "--m", "2", "--d", "2", "--x", "5", "--output", good.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(std::fs::read_to_string(&good).unwrap().starts_with("# config: "));
    let out = gwtail(&["bound", "--m", "2", "--x", "5", "--output", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!bad.exists());
}

#[test]
fn exit_codes() {
    assert_eq!(gwtail(&["exact", "--n", "2", "--x", "1"]).status.code(), Some(2));
    assert_eq!(gwtail(&["exact", "--probs", "0.5,0.6", "--n", "2", "--x", "1"]).status.code(), Some(2));
    assert_eq!(gwtail(&["exact", "--extremal", "1.5", "2", "--n", "2", "--bogus"]).status.code(), Some(2));
    let budget = gwtail(&["exact", "--extremal", "1.5", "10", "--n", "12", "--x", "1"]);
    assert_eq!(budget.status.code(), Some(3));
}

#[test]
fn json_results_are_records() {
    let text = stdout(&gwtail(&["mgf", "--extremal", "1.5", "2", "--x-grid", "1,4", "--format", "json"]));
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let results = json["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    assert!(results[1]["log_chernoff"].as_f64().unwrap() < 0.0);
}

fn series(text: &str) -> Vec<String> {
    let mut names: Vec<String> = rows(text).into_iter().map(|r| r[0].clone()).collect();
    names.dedup();
    names
}

#[test]
fn plots_emit_their_series() {
    let cases: [(&[&str], &[&str]); 4] = [
        (
            &["exact", "--extremal", "1.5", "2", "--n", "6", "--x-grid", "1,2", "--samples", "500", "--plot", "tail_vs_bound"],
            &["exact", "mc", "bound_clamped"],
        ),
        (
            &["explore", "--extremal", "1.5", "2", "--a", "2", "--horizon", "8", "--samples", "200", "--survival", "--plot", "survival_vs_lemma1"],
            &["empirical", "cp_upper", "lemma1"],
        ),
        (&["mgf", "--extremal", "1.5", "2", "--x-grid", "1,5", "--plot", "mgf_curve"], &["log_psi", "log_chernoff"]),
        (
            &["fit", "--extremal", "1.5", "2", "--n", "8", "--x-grid", "1.5:4:6", "--samples", "500", "--plot", "fit_scatter"],
            &["data", "fitted"],
        ),
    ];
    for (args, expected) in cases {
        let text = stdout(&gwtail(args));
        assert_eq!(series(&text), expected, "{args:?}");
        assert_eq!(text.lines().nth(1), Some("series,x,y"));
    }
    assert_eq!(gwtail(&["bound", "--m", "2", "--d", "2", "--x", "1", "--plot", "mgf_curve"]).status.code(), Some(2));
}

#[test]
fn selftest_for_every_subcommand() {
    for cmd in ["exact", "mc", "tilt", "bound", "explore", "mgf", "fit", "search", "sweep", "chain"] {
        let out = gwtail(&[cmd, "--selftest"]);
        let text = stdout(&out);
        assert!(text.contains(" ok"), "{cmd}: {text}");
        assert!(!text.contains("FAIL"), "{cmd}: {text}");
    }
}

#[test]
fn search_respects_the_bound() {
    let text = stdout(&gwtail(&["sweep", "--m-grid", "1.5,2", "--d-grid", "2,3", "--n", "3", "--x-grid", "1,2", "--budget", "200", "--restarts", "2"]));
    for r in rows(&text) {
        let margin: f64 = r[6].parse().unwrap();
        assert!(margin >= 0.0, "{r:?}");
    }
}

#[test]
fn domination_and_pathwise_checks_hold() {
    let text = stdout(&gwtail(&["explore", "--m", "1.5", "--d", "2", "--n", "20", "--domination"]));
    assert_eq!(rows(&text)[0].last().unwrap(), "true");
    let text = stdout(&gwtail(&["explore", "--extremal", "1.5", "2", "--a", "2", "--horizon", "8", "--n", "8", "--samples", "30", "--verify"]));
    assert!(rows(&text).iter().all(|r| r.last().unwrap() == "true"));
}
