mod common;

use std::process::Command;

use leafdx::service::AppConfig;

use common::*;

fn plain_config(dir: &std::path::Path) -> std::path::PathBuf {
    write_config(dir, "http://127.0.0.1:9/unused", 5, "")
}

#[test]
fn eval_prints_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, gt) = (dir.path().join("pred"), dir.path().join("gt"));
    std::fs::create_dir_all(&pred).unwrap();
    std::fs::create_dir_all(&gt).unwrap();
    std::fs::write(gt.join("a.txt"), "3 0.5 0.5 0.2 0.2\n1 0.2 0.2 0.1 0.1\n").unwrap();
    std::fs::write(pred.join("a.txt"), "3 0.5 0.5 0.2 0.2 0.9\n1 0.8 0.8 0.1 0.1 0.6\n").unwrap();
    let classes = dir.path().join("classes.txt");
    std::fs::write(&classes, "cercospora\nminer\nphoma\nrust\n").unwrap();
    let json = dir.path().join("report.json");

    let out = run_cli(
        &plain_config(dir.path()),
        &[
            "eval",
            "--pred",
            pred.to_str().unwrap(),
            "--gt",
            gt.to_str().unwrap(),
            "--classes",
            classes.to_str().unwrap(),
            "--json",
            json.to_str().unwrap(),
        ],
    );
    assert!(out.contains("rust"), "{out}");
    assert!(out.contains("miner"), "{out}");
    assert!(!out.lines().any(|l| l.starts_with("phoma")), "classes without data are not rows: {out}");
    assert!(out.contains("excluded (no labels or predictions): cercospora, phoma"), "{out}");

    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(report["per_class"].as_array().unwrap().len(), 2);
    assert_eq!(report["overall"]["precision"], 0.5);
    assert_eq!(report["overall"]["recall"], 0.5);
}

#[test]
fn ingest_then_query_ranks_the_matching_document_first() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = plain_config(dir.path());
    let store = dir.path().join("kb.jsonl");
    let out = run_cli(&cfg, &["ingest", sample_kb().to_str().unwrap(), "--out", store.to_str().unwrap()]);
    assert!(out.starts_with("5 documents"), "{out}");

    let hits = run_cli(&cfg, &["query", store.to_str().unwrap(), "leaf miner larvae tunnels mines", "-k", "3"]);
    let lines: Vec<&str> = hits.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].ends_with("miner.md#0") || lines[0].contains("\tminer.md#"), "{hits}");
    let scores: Vec<f64> = lines.iter().map(|l| l.split('\t').next().unwrap().parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));

    // appending the same corpus is idempotent
    let again = run_cli(&cfg, &["ingest", sample_kb().to_str().unwrap(), "--out", store.to_str().unwrap(), "--append"]);
    assert!(again.contains("(0 new)"), "{again}");
}

#[test]
fn detect_reads_fixture_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = plain_config(dir.path());
    std::fs::write(dir.path().join("labels/leaf.txt"), "2 0.5 0.5 0.5 0.5 0.8\n").unwrap();
    let img = dir.path().join("leaf.png");
    std::fs::write(&img, png_bytes(100, 50)).unwrap();
    let out = run_cli(&cfg, &["detect", img.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["image_width"], 100);
    assert_eq!(v["detections"][0]["class_name"], "phoma");
    assert_eq!(v["detections"][0]["x1"], 25.0);
}

#[test]
fn failures_exit_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = plain_config(dir.path());
    let out = Command::new(bin())
        .args(["--config", cfg.to_str().unwrap(), "ingest", "/no/such/kb"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "bind = \"x\"\nunknown_key = 1\n").unwrap();
    let out = Command::new(bin()).args(["--config", bad.to_str().unwrap(), "serve"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn example_config_is_valid() {
    let path = repo_root().join("config/leafdx.example.toml");
    let cfg = AppConfig::load(Some(&path)).unwrap();
    cfg.validate().unwrap();
}
