use std::fmt::Write as _;

use zorro_core::features::fmt_f64;
use zorro_core::io::ExplanationFile;
use zorro_core::roar::{roar_run, RoarTask};

use crate::args::RoarArgs;
use crate::commands::{create_dir, explanation_files, load_data, train_config};
use crate::error::{CliError, CliResult};
use crate::manifest::write_manifest;

pub fn run(a: &RoarArgs, argv: &[String]) -> CliResult<()> {
    let loaded = load_data(&a.data, true)?;
    let d = loaded.dataset.expect("dataset required");
    let mut masks = Vec::new();
    for (node, path) in explanation_files(&a.explanations)? {
        if d.train_nodes.binary_search(&node).is_err() {
            continue;
        }
        let file = ExplanationFile::load(&path)?;
        if let Some(m) = file.feature_importance() {
            masks.push(m);
        }
    }
    if masks.is_empty() {
        return Err(CliError::Usage(format!("no explanations of training nodes in {}", a.explanations.display())));
    }
    let config = train_config(&a.params);
    eprintln!("retraining {} times for each of {} values of k", a.repeats, a.k_values.len());
    let task = RoarTask {
        graph: &d.graph,
        features: d.features.values(),
        labels: &d.labels,
        train_nodes: &d.train_nodes,
        test_nodes: &d.test_nodes,
    };
    let result = roar_run(&task, &masks, &a.k_values, a.repeats, &config)?;

    create_dir(&a.out)?;
    let mut table = String::from("k,mean_accuracy,std_accuracy\n");
    for ((k, mean), std) in result.k_values.iter().zip(&result.accuracy_by_k).zip(result.std_by_k()) {
        let _ = writeln!(table, "{k},{},{}", fmt_f64(*mean), fmt_f64(std));
    }
    let mut detail = String::from("k,repeat,seed,accuracy\n");
    for (k, accs) in result.k_values.iter().zip(&result.repeat_accuracies) {
        for (i, acc) in accs.iter().enumerate() {
            let _ = writeln!(detail, "{k},{i},{},{}", config.seed.wrapping_add(i as u64), fmt_f64(*acc));
        }
    }
    let info = serde_json::json!({
        "baseline_accuracy": result.baseline_accuracy,
        "ranking": result.ranking,
        "explanations_used": masks.len(),
    });
    let mut outputs = Vec::new();
    for (name, text) in [
        ("roar.csv", table),
        ("roar_repeats.csv", detail),
        ("roar_info.json", serde_json::to_string_pretty(&info)? + "\n"),
    ] {
        let path = a.out.join(name);
        std::fs::write(&path, text)?;
        outputs.push((path, true));
    }
    eprintln!("baseline accuracy {:.4}", result.baseline_accuracy);
    write_manifest(&a.out, "roar", argv, a, &outputs)
}
