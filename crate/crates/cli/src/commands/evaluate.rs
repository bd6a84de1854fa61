use std::fmt::Write as _;

use rayon::prelude::*;
use zorro_core::explanation::MaskSide;
use zorro_core::features::fmt_f64;
use zorro_core::fidelity::{rdt_fidelity, stability, NoiseSeed};
use zorro_core::io::{metric_csv, ExplanationFile};
use zorro_core::metrics::{
    fidelity_variants, ground_truth_scores, homophily, soft_to_hard, sparsity_entropy, summarize, validity,
    HardTransform, MetricRecord,
};
use zorro_core::rng::label;
use zorro_core::{ComputationalGraph, Model, Prediction};

use crate::args::EvaluateArgs;
use crate::commands::{create_dir, explanation_files, load_data, load_model, thread_pool, Loaded};
use crate::error::{CliError, CliResult};
use crate::manifest::write_manifest;

struct Row {
    record: MetricRecord,
    homophily_true: Option<f64>,
    homophily_predicted: Option<f64>,
}

fn evaluate_one(
    a: &EvaluateArgs,
    transform: HardTransform,
    model: &Model,
    data: &Loaded,
    predictions: &[Prediction],
    node: usize,
    path: &std::path::Path,
) -> CliResult<Row> {
    let file = ExplanationFile::load(path)?;
    if file.node != node {
        return Err(zorro_core::Error::Inconsistent(format!("{} explains node {}", path.display(), file.node)).into());
    }
    let cg = ComputationalGraph::extract(&data.graph, node, file.hops)?;
    let x = data.features.restrict(&cg)?;
    let (explanation, node_sparsity, feature_sparsity) = match file.soft_mask()? {
        Some(soft) => {
            let hard = soft_to_hard(&soft, node, cg.num_nodes(), x.cols(), transform)?;
            let all_nodes = vec![true; cg.num_nodes()];
            let all_features = vec![true; x.cols()];
            let ns = match &soft.node_scores {
                Some(s) => sparsity_entropy(MaskSide::Soft(s))?,
                None => sparsity_entropy(MaskSide::Hard(&all_nodes))?,
            };
            let fs = match &soft.feature_scores {
                Some(s) => sparsity_entropy(MaskSide::Soft(s))?,
                None => sparsity_entropy(MaskSide::Hard(&all_features))?,
            };
            (hard, ns, fs)
        }
        None => {
            let hard = file
                .hard_masks(&cg)?
                .into_iter()
                .next()
                .ok_or_else(|| CliError::Usage(format!("{} holds no mask", path.display())))?;
            let ns = sparsity_entropy(MaskSide::Hard(hard.node_flags()))?;
            let fs = sparsity_entropy(MaskSide::Hard(hard.feature_flags()))?;
            (hard, ns, fs)
        }
    };
    let noise = NoiseSeed::new(a.seed, &[label::NODES, node as u64]);
    let fid = rdt_fidelity(model, &cg, &x, &explanation, a.samples, noise)?;
    let variants = fidelity_variants(model, &cg, &x, &explanation, a.baseline)?;
    let gt = data
        .dataset
        .as_ref()
        .and_then(|d| d.ground_truth.as_ref())
        .and_then(|gt| gt[node].as_ref());
    let scores = match gt {
        Some(members) => {
            let flags: Vec<bool> = cg.local_nodes().iter().map(|v| members.contains(v)).collect();
            Some(ground_truth_scores(explanation.node_flags(), &flags)?)
        }
        None => None,
    };
    let local_labels = |labels: &dyn Fn(usize) -> usize| cg.local_nodes().iter().map(|&v| labels(v)).collect::<Vec<_>>();
    let homophily_true = match &data.dataset {
        Some(d) => homophily(&explanation, cg.query_local_index(), &local_labels(&|v| d.labels[v]))?,
        None => None,
    };
    let homophily_predicted = homophily(
        &explanation,
        cg.query_local_index(),
        &local_labels(&|v| predictions[v].predicted_class),
    )?;
    let record = MetricRecord {
        node,
        validity: validity(model, &cg, &x, &explanation, a.baseline)?,
        node_sparsity,
        feature_sparsity,
        rdt_fidelity: fid.value,
        stability: stability(fid.value),
        fidelity_plus_acc: Some(variants.plus_acc),
        fidelity_minus_acc: Some(variants.minus_acc),
        fidelity_plus_prob: Some(variants.plus_prob),
        fidelity_minus_prob: Some(variants.minus_prob),
        precision: scores.map(|s| s.precision),
        accuracy: scores.map(|s| s.accuracy),
    };
    Ok(Row {
        record,
        homophily_true,
        homophily_predicted,
    })
}

pub fn run(a: &EvaluateArgs, argv: &[String]) -> CliResult<()> {
    let transform: HardTransform = a.transform.parse().map_err(|e| CliError::Usage(format!("--transform: {e}")))?;
    let model = load_model(&a.model)?;
    let data = load_data(&a.data, false)?;
    let files = explanation_files(&a.explanations)?;
    let predictions = model.predict_all(data.graph.adjacency(), data.features.values())?;
    let pool = thread_pool(a.threads)?;
    eprintln!("evaluating {} explanations", files.len());
    let rows: Vec<CliResult<Row>> = pool.install(|| {
        files
            .par_iter()
            .map(|(node, path)| evaluate_one(a, transform, &model, &data, &predictions, *node, path))
            .collect()
    });
    let rows = rows.into_iter().collect::<CliResult<Vec<Row>>>()?;
    let records: Vec<MetricRecord> = rows.iter().map(|r| r.record.clone()).collect();

    create_dir(&a.out)?;
    let mut outputs = Vec::new();
    let metrics_path = a.out.join("metrics.csv");
    std::fs::write(&metrics_path, metric_csv(&records))?;
    outputs.push((metrics_path, true));

    let mut summary = String::from("metric,mean\n");
    for (name, mean) in summarize(&records) {
        let _ = writeln!(summary, "{name},{}", mean.map(fmt_f64).unwrap_or_default());
    }
    let summary_path = a.out.join("summary.csv");
    std::fs::write(&summary_path, summary)?;
    outputs.push((summary_path, true));

    let mut homo = String::from("node,homophily_true,homophily_predicted\n");
    for r in &rows {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(homo, "{},{},{}", r.record.node, opt(r.homophily_true), opt(r.homophily_predicted));
    }
    let homo_path = a.out.join("homophily.csv");
    std::fs::write(&homo_path, homo)?;
    outputs.push((homo_path, true));

    write_manifest(&a.out, "evaluate", argv, a, &outputs)
}
