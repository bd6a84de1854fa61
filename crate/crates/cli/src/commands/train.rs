use std::fmt::Write as _;

use zorro_core::features::fmt_f64;
use zorro_core::gnn::train_gcn;
use zorro_core::Model;

use crate::args::TrainArgs;
use crate::commands::{create_dir, load_data, train_config};
use crate::error::CliResult;
use crate::manifest::write_manifest;

pub fn run(a: &TrainArgs, argv: &[String]) -> CliResult<()> {
    let loaded = load_data(&a.data, true)?;
    let d = loaded.dataset.expect("dataset required");
    let mut config = train_config(&a.params);
    config.snapshot_epochs = a.snapshot_epochs.clone();
    let arch = clap::ValueEnum::to_possible_value(&a.params.arch).map(|v| v.get_name().to_owned()).unwrap_or_default();
    eprintln!("training {arch} for {} epochs", config.epochs);
    let outcome = train_gcn(&d.graph, d.features.values(), &d.labels, &d.train_nodes, &d.test_nodes, &config)?;
    create_dir(&a.out)?;
    let hyper = serde_json::to_value(&config)?;
    let mut outputs = Vec::new();

    let model_path = a.out.join("model.json");
    Model::Gcn(outcome.model).save(&model_path, hyper.clone())?;
    outputs.push((model_path, true));

    let mut trace = String::from("epoch,loss,train_accuracy,test_accuracy\n");
    for s in &outcome.trace {
        let test = s.test_accuracy.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(trace, "{},{},{},{test}", s.epoch, fmt_f64(s.loss), fmt_f64(s.train_accuracy));
    }
    let trace_path = a.out.join("training.csv");
    std::fs::write(&trace_path, trace)?;
    outputs.push((trace_path, true));

    if !outcome.snapshots.is_empty() {
        let dir = a.out.join("snapshots");
        create_dir(&dir)?;
        for (epoch, gcn) in outcome.snapshots {
            let path = dir.join(format!("epoch-{epoch}.json"));
            let mut h = hyper.clone();
            h["epoch"] = serde_json::json!(epoch);
            Model::Gcn(gcn).save(&path, h)?;
            outputs.push((path, true));
        }
    }
    if let Some(last) = outcome.trace.last() {
        eprintln!(
            "final loss {:.4}, train accuracy {:.3}, test accuracy {}",
            last.loss,
            last.train_accuracy,
            last.test_accuracy.map_or("n/a".into(), |t| format!("{t:.3}"))
        );
    }
    write_manifest(&a.out, "train", argv, a, &outputs)
}
