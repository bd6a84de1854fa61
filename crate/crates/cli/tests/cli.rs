use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn zorro(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zorro"))
        .args(args)
        .current_dir(dir)
        .env("ZORRO_THREADS", "1")
        .output()
        .expect("spawn zorro")
}

fn ok(args: &[&str], dir: &Path) {
    let out = zorro(args, dir);
    assert!(
        out.status.success(),
        "zorro {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(args: &[&str], dir: &Path) -> i32 {
    zorro(args, dir).status.code().expect("exit code")
}

fn read(path: PathBuf) -> String {
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const SMALL: &[&str] = &["--base-nodes", "60", "--attachment", "3", "--houses", "6"];

fn small_dataset(dir: &Path, out: &str, seed: &str) {
    let mut args = vec!["synth-gen", "--out", out, "--seed", seed];
    args.extend_from_slice(SMALL);
    ok(&args, dir);
}

fn trained(dir: &Path) {
    small_dataset(dir, "data", "3");
    ok(
        &["train", "--data", "data", "--epochs", "150", "--snapshot-epochs", "0,20,150", "--out", "model"],
        dir,
    );
}

/// Checks every deterministic hash recorded in a manifest against the files.
fn replay_manifest(out_dir: &Path) -> serde_json::Value {
    let manifest: serde_json::Value = serde_json::from_str(&read(out_dir.join("manifest.json"))).unwrap();
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for o in outputs {
        let bytes = std::fs::read(out_dir.join(o["path"].as_str().unwrap())).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&bytes)), o["sha256"].as_str().unwrap());
    }
    manifest
}

#[test]
fn synth_gen_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    small_dataset(tmp.path(), "a", "7");
    small_dataset(tmp.path(), "b", "7");
    small_dataset(tmp.path(), "c", "8");
    for f in ["graph.txt", "features.csv", "labels.csv", "split.csv", "ground_truth.csv"] {
        assert_eq!(read(tmp.path().join("a").join(f)), read(tmp.path().join("b").join(f)), "{f}");
    }
    assert_ne!(read(tmp.path().join("a/features.csv")), read(tmp.path().join("c/features.csv")));
    let m = replay_manifest(&tmp.path().join("a"));
    assert_eq!(m["command"], "synth-gen");
}

#[test]
fn explain_evaluate_pipeline() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    trained(dir);
    replay_manifest(&dir.join("model"));
    for e in ["0", "20", "150"] {
        assert!(dir.join(format!("model/snapshots/epoch-{e}.json")).exists());
    }
    let explain = ["explain", "--model", "model/model.json", "--data", "data", "--nodes", "60,61,62,5"];
    ok(&[&explain[..], &["--out", "e1"]].concat(), dir);
    ok(&[&explain[..], &["--out", "e2"]].concat(), dir);
    for n in [60, 61, 62, 5] {
        let f = format!("node-{n}.json");
        assert_eq!(read(dir.join("e1").join(&f)), read(dir.join("e2").join(&f)));
        let file: serde_json::Value = serde_json::from_str(&read(dir.join("e1").join(&f))).unwrap();
        assert_eq!(file["node"], n);
        let fid = file["masks"][0]["fidelity"].as_f64().unwrap();
        assert!(fid >= 0.85, "node {n} fidelity {fid}");
    }
    let m = replay_manifest(&dir.join("e1"));
    let timing = m["outputs"].as_array().unwrap().iter().find(|o| o["path"] == "summary.csv").unwrap();
    assert_eq!(timing["deterministic"], false);

    ok(&["evaluate", "--model", "model/model.json", "--data", "data", "--explanations", "e1", "--out", "ev"], dir);
    let metrics = read(dir.join("ev/metrics.csv"));
    let mut lines = metrics.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    for r in &rows {
        let fid: f64 = r[col("rdt_fidelity")].parse().unwrap();
        assert!((0.0..=1.0).contains(&fid));
        let stab: f64 = r[col("stability")].parse().unwrap();
        assert!((1.0 / 1.25..=1.0).contains(&stab));
    }
    // house nodes carry ground truth, base node 5 does not
    let precision = col("precision");
    let node = col("node");
    for r in &rows {
        assert_eq!(r[node] == "5", r[precision].is_empty());
    }
    assert!(read(dir.join("ev/homophily.csv")).starts_with("node,homophily_true,homophily_predicted\n"));
    replay_manifest(&dir.join("ev"));

    ok(
        &["explain", "--model", "model/model.json", "--data", "data", "--nodes", "60,61", "--explainer", "grad", "--out", "eg"],
        dir,
    );
    ok(
        &["evaluate", "--model", "model/model.json", "--data", "data", "--explanations", "eg", "--transform", "NT", "--out", "evg"],
        dir,
    );
    assert_eq!(read(dir.join("evg/metrics.csv")).lines().count(), 3);
}

#[test]
fn multi_explain_writes_disjoint_masks() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    trained(dir);
    ok(
        &["multi-explain", "--model", "model/model.json", "--data", "data", "--nodes", "63", "--tau", "0.8", "--out", "me"],
        dir,
    );
    let file: serde_json::Value = serde_json::from_str(&read(dir.join("me/node-63.json"))).unwrap();
    let masks = file["masks"].as_array().unwrap();
    assert!(!masks.is_empty());
    let set = |m: &serde_json::Value, key: &str| -> Vec<u64> {
        m[key].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect()
    };
    for (i, a) in masks.iter().enumerate() {
        for b in &masks[..i] {
            let nodes_disjoint = set(a, "nodes").iter().all(|v| !set(b, "nodes").contains(v));
            let features_disjoint = set(a, "features").iter().all(|v| !set(b, "features").contains(v));
            assert!(nodes_disjoint || features_disjoint);
        }
    }
    assert!(read(dir.join("me/summary.csv")).starts_with("node,explanations,total_steps,wall_ms\n"));
}

#[test]
fn roar_and_ground_truth_eval() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    trained(dir);
    ok(
        &["explain", "--model", "model/model.json", "--data", "data", "--nodes", "train", "--explainer", "grad-input", "--out", "eg"],
        dir,
    );
    let roar = ["roar", "--data", "data", "--explanations", "eg", "--k", "0,3,10", "--repeats", "2", "--epochs", "60"];
    ok(&[&roar[..], &["--out", "r1"]].concat(), dir);
    ok(&[&roar[..], &["--out", "r2"]].concat(), dir);
    let table = read(dir.join("r1/roar.csv"));
    assert_eq!(table, read(dir.join("r2/roar.csv")));
    assert_eq!(table.lines().count(), 4);
    assert_eq!(read(dir.join("r1/roar_repeats.csv")).lines().count(), 7);
    replay_manifest(&dir.join("r1"));

    ok(
        &[
            "gt-eval", "--data", "data", "--snapshots", "model/snapshots/epoch-150.json", "model/snapshots/epoch-0.json",
            "model/snapshots/epoch-20.json", "--explainer", "grad", "--out", "g",
        ],
        dir,
    );
    let epochs: Vec<String> = read(dir.join("g/epochs.csv")).lines().skip(1).map(|l| l.split(',').next().unwrap().to_owned()).collect();
    assert_eq!(epochs, ["0", "20", "150"]);
    let tau: serde_json::Value = serde_json::from_str(&read(dir.join("g/faithfulness.json"))).unwrap();
    assert!(tau["kendall_tau"].is_null() || tau["kendall_tau"].as_f64().unwrap().abs() <= 1.0);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&["train", "--bogus"], dir), 2);
    assert_eq!(code(&["train", "--data", "nowhere", "--out", "m"], dir), 3);
    small_dataset(dir, "data", "0");
    assert_eq!(code(&["explain", "--model", "missing.json", "--data", "data", "--out", "e"], dir), 3);

    // feature rows that disagree with the graph size
    std::fs::create_dir(dir.join("bad")).unwrap();
    for f in ["graph.txt", "labels.csv", "split.csv"] {
        std::fs::copy(dir.join("data").join(f), dir.join("bad").join(f)).unwrap();
    }
    std::fs::write(dir.join("bad/features.csv"), "1.0,2.0\n3.0,4.0\n").unwrap();
    assert_eq!(code(&["train", "--data", "bad", "--epochs", "1", "--out", "m"], dir), 4);

    ok(&["train", "--data", "data", "--epochs", "5", "--out", "m"], dir);
    std::fs::write(dir.join("m/broken.json"), "{\"format_version\": 99}").unwrap();
    assert_eq!(code(&["explain", "--model", "m/broken.json", "--data", "data", "--out", "e"], dir), 4);
    assert_eq!(
        code(&["explain", "--model", "m/model.json", "--data", "data", "--nodes", "1", "--tau", "1.5", "--out", "e"], dir),
        5
    );
    assert_eq!(
        code(&["evaluate", "--model", "m/model.json", "--data", "data", "--explanations", "m", "--transform", "S-2", "--out", "v"], dir),
        2
    );
}
