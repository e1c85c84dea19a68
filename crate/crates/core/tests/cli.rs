use std::path::Path;
use std::process::Command;

use multipair::simulate::ExperimentConfig;

fn bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_multipair")).args(args).output().unwrap()
}

fn manifest(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel).to_str().unwrap().to_string()
}

fn json(out: &std::process::Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn shipped_config_matches_builtin_defaults() {
    let text = std::fs::read_to_string(manifest("configs/default.toml")).unwrap();
    assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), ExperimentConfig::default());
}

#[test]
fn certify_stored_fixture() {
    let out = bin(&["certify", "--table", &manifest("fixtures/stored.csv")]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["verdict"]["level"], "more_than_one_pair");
    assert!((v["verdict"]["t"].as_f64().unwrap() - 3.67).abs() < 0.01);
    assert!((v["verdict"]["margin_sigmas"].as_f64().unwrap() - 2.3).abs() < 0.1);
    assert_eq!(v["verdict"]["bounds"]["provenance"], "cached");
}

#[test]
fn exit_codes() {
    assert_eq!(bin(&["predict", "--visibility", "0.9", "--chsh", "2.5"]).status.code(), Some(2));
    assert_eq!(bin(&["predict", "--visibility", "1.5"]).status.code(), Some(2));
    assert_eq!(bin(&["certify", "--table", "/nonexistent.csv"]).status.code(), Some(2));
    let out = bin(&["predict", "--visibility", "0.8517"]);
    assert_eq!(out.status.code(), Some(0));
    assert!((json(&out)["predicted_t"].as_f64().unwrap() - 3.5355).abs() < 1e-4);
}

#[test]
fn bounds_recompute_prints_both_routes() {
    let out = bin(&["bounds", "--recompute", "--json", "--restarts", "10"]);
    assert!(out.status.success());
    let v = json(&out);
    let rows = v["rows"].as_array().unwrap();
    let get = |c: &str, m: &str| {
        rows.iter().find(|r| r["constraint"] == c && r["method"] == m).unwrap()["bound"].as_f64().unwrap()
    };
    assert!((get("ppt", "fractional_sdp") - 2.8284).abs() < 1e-4);
    assert!((get("ppt", "bisection") - 2.8284).abs() < 1e-4);
    assert!((get("schmidt_2", "fractional_sdp_filtered_negativity") - 3.5355).abs() < 1e-3);
    assert!((get("schmidt_2", "bisection_filtered_negativity") - 3.5355).abs() < 1e-3);
}

#[test]
fn analyze_writes_report_and_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let stream = dir.path().join("events.csv");
    let s = stream.to_str().unwrap();
    assert!(bin(&["simulate", "--seed", "2", "--duration-s", "0.2", "--mean-pairs", "0.05", "--out", s]).status.success());
    let out_dir = dir.path().join("out");
    let out = bin(&["analyze", s, "--out-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["rng_seed"], 2);
    for h in v["histograms"].as_array().unwrap() {
        let text = std::fs::read_to_string(out_dir.join(h.as_str().unwrap())).unwrap();
        assert!(text.starts_with("bin_start_ps,count\n"));
    }
    assert!(out_dir.join("run.log").exists());
    assert!(!std::fs::read_to_string(out_dir.join("report.json")).unwrap().contains("wall"));
    let stored = multipair::witness::CountTable::read_csv(std::fs::File::open(out_dir.join("stored.csv")).map(std::io::BufReader::new).unwrap()).unwrap();
    assert_eq!(stored.total(), v["classes"][0]["fourfolds"].as_u64().unwrap());
}
