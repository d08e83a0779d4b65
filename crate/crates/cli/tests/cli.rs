use std::process::{Command, Output};

use serde_json::Value;

fn herald(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_herald"))
        .args(args)
        .env_remove("HERALD_THREADS")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = herald(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn error_line(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.trim_end().lines().count(), 1, "{text}");
    serde_json::from_str(text.trim_end()).expect("error line is JSON")
}

#[test]
fn herald_stats_anchor() {
    let v = json(&["herald-stats", "--m", "5", "--eta", "0.66", "--g", "1", "--mu", "1", "--n-i", "4"]);
    let row = &v["data"][0];
    assert_eq!(row["ml_estimate"], 5);
    assert!(row["cond_var"].as_f64().unwrap() < 5.0);
    assert!(row["q"].as_f64().unwrap() < 0.0);
    let meta = &v["meta"];
    assert_eq!(meta["command"], "herald-stats");
    assert_eq!(meta["params"]["eta"], 0.66);
    assert_eq!(meta["eps"], 1e-12);
    assert!(meta["tail_bounds"]["posterior"].as_f64().unwrap() <= 1e-12);
    assert!(meta["version"].is_string());
}

#[test]
fn two_photons_two_bins() {
    let v = json(&["detector-response", "--m", "1", "--eta", "1", "--N", "2"]);
    let rows = v["data"].as_array().unwrap();
    let last = rows.iter().find(|r| r["n"] == 2).unwrap();
    assert_eq!(last["p"], 0.5);
}

#[test]
fn bins_flag_accepts_powers_of_two_only() {
    let v = json(&["detector-response", "--M", "2", "--eta", "1", "--N", "2"]);
    assert_eq!(v["meta"]["params"]["m"], 1);
    let out = herald(&["detector-response", "--M", "6", "--N", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"]["kind"], "invalid_parameter");
}

#[test]
fn ratio_efficiency_adds_exact_column() {
    let v = json(&["detector-response", "--m", "3", "--eta", "33/50", "--N", "6"]);
    assert_eq!(v["meta"]["params"]["eta_ratio"], "33/50");
    for row in v["data"].as_array().unwrap() {
        assert!(row["abs_diff"].as_f64().unwrap() <= 1e-12);
    }
}

#[test]
fn band_rows() {
    let v = json(&["detector-response", "--m", "5", "--eta", "1", "--n-max", "3"]);
    let rows = v["data"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1]["mean"], 1.0);
    assert_eq!(rows[1]["std_dev"], 0.0);
}

#[test]
fn thresholds_multimode() {
    let v = json(&["thresholds", "--target", "5", "--mu", "5", "--rate", "0.05", "--m", "5"]);
    let eta = v["data"][0]["eta_threshold"].as_f64().unwrap();
    assert!((eta - 0.11).abs() <= 0.02, "{eta}");
}

#[test]
fn posterior_is_normalised() {
    let v = json(&["posterior", "--n-i", "4"]);
    let total: f64 = v["data"].as_array().unwrap().iter().map(|r| r["p"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(v["meta"]["ml_estimate"], 5);
}

#[test]
fn csv_output() {
    let out = herald(&["detector-response", "--m", "1", "--eta", "1", "--N", "2", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,p");
    assert_eq!(lines[3], "2,5.0000000000000000e-1");
}

#[test]
fn output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let out = herald(&["posterior", "--n-i", "2", "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["meta"]["command"], "posterior");
    assert!(!v["meta"]["args"].as_array().unwrap().iter().any(|a| a == "--output"));
}

#[test]
fn parameter_errors_exit_2() {
    for args in [
        &["posterior", "--n-i", "4", "--eta", "1.5"][..],
        &["posterior", "--n-i", "40"],
        &["posterior", "--n-i", "4", "--g", "-1"],
        &["figure", "--id", "fig9"],
        &["qmap", "--g-max", "3", "--resolution", "4"],
        &["nonsense"],
    ] {
        let out = herald(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(error_line(&out)["error"]["exit_code"], 2);
    }
}

#[test]
fn truncation_too_loose_is_rejected() {
    let out = herald(&["posterior", "--n-i", "4", "--eps", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn starved_simulation_exits_4() {
    let out = herald(&["mc-validate", "--trials", "50", "--n-i", "9"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_line(&out)["error"]["kind"], "insufficient_statistics");
}

#[test]
fn unreachable_threshold_is_not_found() {
    let out = herald(&["thresholds", "--rate", "0.99", "--resolution", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"]["kind"], "not_found");
}

#[test]
fn rerun_from_metadata_is_identical() {
    for args in [
        &["mc-validate", "--trials", "200000", "--seed", "11", "--eta", "0.5"][..],
        &["herald-stats", "--n-i", "3", "--mu", "2", "--g", "0.75"],
        &["qmap", "--resolution", "12", "--mu", "2"],
    ] {
        let first = json(args);
        let replay: Vec<String> = first["meta"]["args"]
            .as_array()
            .unwrap()
            .iter()
            .map(|a| a.as_str().unwrap().to_string())
            .collect();
        let refs: Vec<&str> = replay.iter().map(String::as_str).collect();
        let second = json(&refs);
        assert_eq!(first["data"], second["data"]);
        assert_eq!(first["meta"], second["meta"]);
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let args = ["mc-validate", "--trials", "300000", "--seed", "5", "--format", "csv"];
    let one = Command::new(env!("CARGO_BIN_EXE_herald"))
        .args(args)
        .env("HERALD_THREADS", "1")
        .output()
        .unwrap();
    let four = herald(&[&args[..], &["--threads", "4"]].concat());
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "# working point\neta = 0.66\ng = 1\nn_i = 4\nformat = csv\n").unwrap();
    let p = path.to_str().unwrap();

    let out = herald(&["herald-stats", "--config", p]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("n_i,ml_estimate"));
    assert!(text.lines().nth(1).unwrap().starts_with("4,5,"));

    // Command-line flags win over the file.
    let v = json(&["--format", "json", "herald-stats", "--config", p, "--n-i", "3"]);
    assert_eq!(v["data"][0]["n_i"], 3);
    let args: Vec<&str> = v["meta"]["args"].as_array().unwrap().iter().map(|a| a.as_str().unwrap()).collect();
    assert!(args.contains(&"--eta") && !args.contains(&"--config"));
}

#[test]
fn config_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "gain = 1\n").unwrap();
    let out = herald(&["posterior", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn figures_emit_tables() {
    let v = json(&["figure", "--id", "fig2", "--etas", "1", "--max-photons", "5"]);
    assert_eq!(v["data"].as_array().unwrap().len(), 6);
    let v = json(&["figure", "--id", "fig5", "--resolution", "8"]);
    assert_eq!(v["data"].as_array().unwrap().len(), 64);
    for cell in v["data"].as_array().unwrap() {
        if cell["status"] == "infeasible" {
            assert!(cell["q"].is_null() && cell["n_i"].is_null() && cell["herald_prob"].is_null());
        }
    }
}

#[test]
fn help_succeeds() {
    let out = herald(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("thresholds"));
}
