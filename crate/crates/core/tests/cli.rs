use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clarkshift"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn single_atom_analysis_reports_rank_one_and_root_two() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["analyze", "--config"])
        .arg(config("analyze_single_atom.json"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let r = report(dir.path());
    assert_eq!(r["difference"]["rank"], 1);
    let trace = r["difference"]["trace_norm"].as_f64().unwrap();
    assert!((trace - 2f64.sqrt()).abs() < 1e-10);
    assert_eq!(r["eigenvalues"][0][0].as_f64().unwrap(), -1.0);
    assert!(dir.path().join("spectra.csv").exists());
    assert!(dir.path().join("bounds.csv").exists());
}

#[test]
fn reports_are_reproducible_bit_for_bit() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let status = bin()
            .args(["analyze", "--config"])
            .arg(config("analyze_two_blocks.json"))
            .arg("--out")
            .arg(dir.path())
            .status()
            .unwrap();
        assert!(status.success());
    }
    for file in ["report.json", "spectra.csv", "bounds.csv"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert!(x == y, "{file} differs between runs");
    }
}

#[test]
fn empty_time_grid_gives_a_model_only_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"kind": "analyze", "blocks": [{"atoms": [{"angle_over_pi": 0.5, "weight": 0.5}]}]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = bin().args(["analyze", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let r = report(&out);
    assert_eq!(r["times"].as_array().unwrap().len(), 0);
    assert_eq!(r["difference"]["rank"], 1);
}

#[test]
fn bad_configs_exit_with_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("analyze", r#"{"kind": "explore"}"#),
        ("analyze", r#"{"kind": "analyze", "blocks": [], "bogus": 1}"#),
        ("analyze", r#"{"kind": "analyze", "blocks": [{"atoms": [{"angle_over_pi": 0.0, "weight": 1.0}]}]}"#),
        ("synthesize", r#"{"kind": "synthesize", "synthesis": {"target": [{"angle_over_pi": 0.0, "multiplicity": 1}], "epsilon": 0.1}}"#),
        ("sweep", r#"{"kind": "analyze", "blocks": [{"atoms": [{"angle_over_pi": 1.0, "weight": 1.0}]}]}"#),
    ];
    for (i, (cmd, text)) in cases.iter().enumerate() {
        let cfg = dir.path().join(format!("c{i}.json"));
        std::fs::write(&cfg, text).unwrap();
        let out = bin()
            .arg(cmd)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(format!("o{i}")))
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(2), "case {i}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
}

#[test]
fn synthesized_certificate_rechecks_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["synthesize", "--config"])
        .arg(config("synthesize.json"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let cert = dir.path().join("certificate.json");
    let out = bin().arg("check-certificate").arg(&cert).output().unwrap();
    assert!(out.status.success());
    let check: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(check["passed"], true);

    // a tampered certificate no longer verifies
    let mut c: Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    c["trace_norm"] = Value::from(0.5 * c["trace_norm"].as_f64().unwrap());
    std::fs::write(&cert, c.to_string()).unwrap();
    let out = bin().arg("check-certificate").arg(&cert).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn counterexample_sharp3_writes_bins() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["counterexample", "sharp3", "--config"])
        .arg(config("sharp3.json"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let bins = std::fs::read_to_string(dir.path().join("bins.csv")).unwrap();
    let mut lines = bins.lines();
    assert_eq!(lines.next().unwrap(), "n,bin_lo,bin_mass,contribution_p");
    assert_eq!(lines.count(), 2 * 256 + 1);
}

#[test]
fn verify_seed_flag_changes_the_cases() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, seed) in [(&a, "1"), (&b, "2")] {
        let status = bin()
            .args(["verify-eq4", "--seed", seed, "--out"])
            .arg(dir.path())
            .status()
            .unwrap();
        assert!(status.success());
    }
    let (ra, rb) = (report(a.path()), report(b.path()));
    assert_eq!(ra["seed"], 1);
    assert_eq!(rb["seed"], 2);
    assert_ne!(ra["cases"], rb["cases"]);
}
