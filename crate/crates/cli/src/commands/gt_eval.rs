use std::fmt::Write as _;
use std::path::Path;

use zorro_core::features::fmt_f64;
use zorro_core::synth::{explain_nodes, run_ground_truth_eval};
use zorro_core::{ComputationalGraph, FeatureMatrix, Model};

use crate::args::GtEvalArgs;
use crate::commands::{create_dir, gt_explainer, load_data, load_model, thread_pool};
use crate::error::{CliError, CliResult};
use crate::manifest::write_manifest;
use crate::nodes::select_nodes;

/// Epoch encoded in a snapshot file name `epoch-<E>.json`.
fn snapshot_epoch(path: &Path) -> Option<usize> {
    path.file_stem()?.to_str()?.strip_prefix("epoch-")?.parse().ok()
}

pub fn run(a: &GtEvalArgs, argv: &[String]) -> CliResult<()> {
    let loaded = load_data(&a.data, true)?;
    let d = loaded.dataset.expect("dataset required");
    if d.ground_truth.is_none() {
        return Err(CliError::Usage("dataset has no ground_truth.csv".into()));
    }
    let mut snapshots = Vec::with_capacity(a.snapshots.len());
    for (i, path) in a.snapshots.iter().enumerate() {
        snapshots.push((snapshot_epoch(path).unwrap_or(i), load_model(path)?));
    }
    snapshots.sort_by_key(|(e, _)| *e);
    let nodes = select_nodes(&a.nodes, d.graph.num_nodes(), Some(&d), a.seed)?;
    let explainer = gt_explainer(a.explainer, &a.zorro, a.seed, a.random_nodes, a.random_features);
    let explain = |m: &Model, cg: &ComputationalGraph, x: &FeatureMatrix| explain_nodes(&explainer, m, cg, x);
    let pool = thread_pool(a.threads)?;
    eprintln!("scoring {} nodes on {} snapshots", nodes.len(), snapshots.len());
    let report = pool.install(|| run_ground_truth_eval(&d, &snapshots, &nodes, &explain))?;

    create_dir(&a.out)?;
    let mut table = String::from("epoch,precision,accuracy,test_accuracy\n");
    for r in &report.rows {
        let _ = writeln!(table, "{},{},{},{}", r.epoch, fmt_f64(r.precision), fmt_f64(r.accuracy), fmt_f64(r.test_accuracy));
    }
    let table_path = a.out.join("epochs.csv");
    std::fs::write(&table_path, table)?;
    let tau_path = a.out.join("faithfulness.json");
    std::fs::write(&tau_path, serde_json::to_string_pretty(&serde_json::json!({ "kendall_tau": report.faithfulness }))? + "\n")?;
    match report.faithfulness {
        Some(t) => eprintln!("faithfulness (Kendall tau) {t:.4}"),
        None => eprintln!("faithfulness undefined: constant precision or accuracy"),
    }
    write_manifest(&a.out, "gt-eval", argv, a, &[(table_path, true), (tau_path, true)])
}
