use std::path::Path;
use std::process::{Command, Output};

fn volfactor(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_volfactor")).current_dir(dir).args(args).output().unwrap()
}

fn small_manifest(dir: &Path) {
    let manifest = "seed = 4\n\n[synth]\nn_days = 1200\ncluster_sizes = [8, 8, 8]\n\n[enet]\nn_perm = 0\n";
    std::fs::write(dir.join("run.toml"), manifest).unwrap();
}

fn run_ok(dir: &Path, phase: &str) {
    let out = volfactor(dir, &["--manifest", "run.toml", "--out", "out", "--workers", "1", phase]);
    assert!(out.status.success(), "{phase}: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_phase_names_the_prerequisite() {
    let dir = tempfile::tempdir().unwrap();
    let out = volfactor(dir.path(), &["--out", "out", "filtrate"]);
    assert!(!out.status.success());
    let record: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(record["error"], "missing_phase");
    assert_eq!(record["phase"], "filtrate");
    assert_eq!(record["requires"], "decompose");
}

#[test]
fn bad_manifest_is_a_machine_readable_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "no_such_field = 1\n").unwrap();
    let out = volfactor(dir.path(), &["--manifest", "bad.toml", "synth"]);
    assert!(!out.status.success());
    let record: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(record["error"], "failed");
}

#[test]
fn chain_writes_manifest_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    small_manifest(dir.path());
    let phases = ["synth", "clean", "transform", "decompose", "filtrate", "enrich", "report"];
    for phase in phases {
        run_ok(dir.path(), phase);
    }
    let out = dir.path().join("out");
    for phase in phases {
        let manifest = std::fs::read_to_string(out.join(phase).join("manifest.toml")).unwrap();
        assert!(manifest.contains("seed = 4"), "{phase}");
    }
    let table = std::fs::read_to_string(out.join("report/clusters.csv")).unwrap();
    assert!(table.starts_with("k,size,dominant_sector,p,"));

    let first = std::fs::read(out.join("filtrate/report.json")).unwrap();
    let first_dec = std::fs::read(out.join("decompose/stocks.json")).unwrap();
    run_ok(dir.path(), "decompose");
    run_ok(dir.path(), "filtrate");
    assert_eq!(first, std::fs::read(out.join("filtrate/report.json")).unwrap());
    assert_eq!(first_dec, std::fs::read(out.join("decompose/stocks.json")).unwrap());

    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("metadata.json")).unwrap()).unwrap();
    assert!(meta.get("filtrate").is_some());
}

#[test]
fn env_overrides_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &Path, seed: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_volfactor"))
            .current_dir(dir)
            .env("VOLFACTOR_SEED", seed)
            .args(["--out", "out", "synth"])
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(dir.join("out/synth/prices.csv")).unwrap()
    };
    assert_ne!(run(a.path(), "1"), run(b.path(), "2"));
}
