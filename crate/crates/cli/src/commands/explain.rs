use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;
use zorro_core::baselines::{explain_baseline, BaselineKind};
use zorro_core::features::fmt_f64;
use zorro_core::io::{ExplanationFile, MaskRecord};
use zorro_core::rng::{derive_key, label};
use zorro_core::zorro::{zorro_explain, zorro_multi};
use zorro_core::{ComputationalGraph, Error, FeatureMatrix, Graph, Model};

use crate::args::{ExplainArgs, ExplainerArg};
use crate::commands::{create_dir, load_data, load_model, thread_pool, zorro_config};
use crate::error::CliResult;
use crate::manifest::write_manifest;
use crate::nodes::select_nodes;

struct Outcome {
    file: ExplanationFile,
    steps: usize,
    wall_ms: f64,
}

fn explain_one(a: &ExplainArgs, multi: bool, model: &Model, graph: &Graph, features: &FeatureMatrix, node: usize) -> CliResult<Outcome> {
    let start = Instant::now();
    let cg = ComputationalGraph::extract(graph, node, model.receptive_field())?;
    let x = features.restrict(&cg)?;
    let seed = derive_key(a.seed, &[label::NODES, node as u64]);
    let mut file = ExplanationFile::new(&cg, features.cols(), a.explainer.name());
    let mut steps = 0;
    match a.explainer {
        ExplainerArg::Zorro => {
            let config = zorro_config(&a.zorro, seed);
            file.params.insert("tau".into(), json!(config.tau));
            file.params.insert("k".into(), json!(config.top_k));
            file.params.insert("samples".into(), json!(config.samples));
            file.params.insert("seed".into(), json!(seed));
            if multi {
                for z in zorro_multi(model, &cg, &x, &config)? {
                    steps += z.trace.len();
                    file.masks.push(MaskRecord::from_zorro(&cg, &z));
                }
            } else {
                let z = match zorro_explain(model, &cg, &x, &config) {
                    Ok(z) => z,
                    Err(Error::ExplanationIncomplete { partial, .. }) => {
                        file.params.insert("complete".into(), json!(false));
                        *partial
                    }
                    Err(e) => return Err(e.into()),
                };
                steps = z.trace.len();
                file.masks.push(MaskRecord::from_zorro(&cg, &z));
            }
        }
        other => {
            let kind = match other {
                ExplainerArg::Empty => BaselineKind::Empty,
                ExplainerArg::Random => BaselineKind::Random {
                    nodes: a.random_nodes.min(cg.num_nodes()),
                    features: a.random_features.min(features.cols()),
                    seed: a.seed,
                },
                ExplainerArg::Grad => BaselineKind::Grad,
                ExplainerArg::GradInput => BaselineKind::GradInput,
                ExplainerArg::Zorro => unreachable!(),
            };
            if let BaselineKind::Random { seed, .. } = kind {
                file.params.insert("seed".into(), json!(seed));
            }
            file = file.with_baseline(&cg, &explain_baseline(kind, model, &cg, &x)?);
        }
    }
    Ok(Outcome {
        file,
        steps,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

pub fn run(a: &ExplainArgs, argv: &[String], multi: bool) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let loaded = load_data(&a.data, false)?;
    let nodes = select_nodes(&a.nodes, loaded.graph.num_nodes(), loaded.dataset.as_ref(), a.seed)?;
    let pool = thread_pool(a.threads)?;
    eprintln!("explaining {} nodes with {} threads", nodes.len(), pool.current_num_threads());
    let done = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<CliResult<Outcome>> = pool.install(|| {
        nodes
            .par_iter()
            .map(|&node| {
                let r = explain_one(a, multi, &model, &loaded.graph, &loaded.features, node);
                let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                if n.is_multiple_of(50) || n == nodes.len() {
                    eprintln!("  {n}/{}", nodes.len());
                }
                r
            })
            .collect()
    });
    create_dir(&a.out)?;
    let mut outputs = Vec::with_capacity(nodes.len() + 1);
    let mut summary = String::from(if multi {
        "node,explanations,total_steps,wall_ms\n"
    } else {
        "node,nodes_selected,features_selected,fidelity,steps,wall_ms\n"
    });
    for (node, result) in nodes.iter().zip(results) {
        let o = result?;
        let path = a.out.join(ExplanationFile::file_name(*node));
        o.file.save(&path)?;
        outputs.push((path, true));
        if multi {
            let _ = writeln!(summary, "{node},{},{},{:.3}", o.file.masks.len(), o.steps, o.wall_ms);
        } else {
            let (nv, nf, fid) = o
                .file
                .masks
                .first()
                .map(|m| (m.nodes.len().to_string(), m.features.len().to_string(), m.fidelity.map(fmt_f64).unwrap_or_default()))
                .unwrap_or_default();
            let _ = writeln!(summary, "{node},{nv},{nf},{fid},{},{:.3}", o.steps, o.wall_ms);
        }
    }
    let summary_path = a.out.join("summary.csv");
    std::fs::write(&summary_path, summary)?;
    outputs.push((summary_path, false));
    write_manifest(&a.out, if multi { "multi-explain" } else { "explain" }, argv, a, &outputs)
}
