//! Command-line behaviour: exit codes, manifest contents and determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hypoflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypoflow")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn certify_writes_manifest_with_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = hypoflow(&["certify", "--case", "a", "--d", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("manifest.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let lambda = json["certificates"][0]["Lambda"].as_f64().unwrap();
    assert!((lambda - 1.0 / 12.0).abs() < 1e-16);
    let keys: Vec<&str> = text.lines().filter_map(|l| l.strip_prefix("  \"")).map(|l| l.split('"').next().unwrap()).collect();
    assert_eq!(keys, ["tool", "version", "config", "certificates", "experiments", "criteria", "passed", "files"]);
    assert!(out.join("certify_mu.csv").exists());
}

#[test]
fn schema_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for text in ["experiment = \"certify\"\ncolour = 3", "experiment = \"warp\"", "experiment = \"torus\"\n[basis]\nn = 2"] {
        let o = hypoflow(&["run", &write_config(dir.path(), text)]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("config"));
    }
    let o = hypoflow(&["run", "/nonexistent/config.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_check_exits_one_and_names_the_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypoflow(&["run", &write_config(dir.path(), "experiment = \"diffusion-ladder\"")]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("FAIL diffusion-ladder") && stdout.contains("[10] b.spread"), "{stdout}");
}

#[test]
fn fixed_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let text = "experiment = \"mode-decay\"\nhorizon = 10.0\n[basis]\nn = 16\n[geometry]\nxi = [0.5, 3.0]\n[datum]\nrandom = 3\n";
    let cfg = write_config(dir.path(), text);
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = hypoflow(&["run", &cfg, "--seed", seed, "--threads", "2", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
        fs::read(out.join("mode_decay.csv")).unwrap()
    };
    let first = run("a", "11");
    assert_eq!(first, run("b", "11"));
    assert_ne!(first, run("c", "12"));
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("case,xi,datum,mu,max_ratio,violations,fitted_rate\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
}
