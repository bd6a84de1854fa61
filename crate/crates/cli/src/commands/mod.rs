pub mod evaluate;
pub mod explain;
pub mod gt_eval;
pub mod roar;
pub mod synth_gen;
pub mod train;

use std::path::{Path, PathBuf};

use zorro_core::baselines::BaselineKind;
use zorro_core::gnn::TrainConfig;
use zorro_core::io::{self, Dataset};
use zorro_core::synth::GtExplainer;
use zorro_core::zorro::ZorroConfig;
use zorro_core::{FeatureMatrix, Graph, Model};

use crate::args::{Arch, DataArgs, ExplainerArg, TrainParams, ZorroParams};
use crate::error::{require_file, CliError, CliResult};

/// Inputs resolved from [`DataArgs`]; `dataset` is present when labels and
/// a split were found.
pub struct Loaded {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub dataset: Option<Dataset>,
}

fn resolve(explicit: &Option<PathBuf>, dir: &Option<PathBuf>, name: &str) -> Option<PathBuf> {
    explicit.clone().or_else(|| dir.as_ref().map(|d| d.join(name)))
}

pub fn load_data(args: &DataArgs, need_dataset: bool) -> CliResult<Loaded> {
    let graph_path = resolve(&args.graph, &args.data, io::GRAPH_FILE)
        .ok_or_else(|| CliError::Usage("give --data or --graph".into()))?;
    let features_path = resolve(&args.features, &args.data, io::FEATURES_FILE)
        .ok_or_else(|| CliError::Usage("give --data or --features".into()))?;
    require_file(&graph_path)?;
    require_file(&features_path)?;
    let graph = Graph::load(&graph_path)?;
    let features = FeatureMatrix::load_csv(&features_path)?;
    if features.rows() != graph.num_nodes() {
        return Err(zorro_core::Error::Inconsistent(format!(
            "{} has {} nodes but {} has {} rows",
            graph_path.display(),
            graph.num_nodes(),
            features_path.display(),
            features.rows()
        ))
        .into());
    }
    let labels_path = resolve(&args.labels, &args.data, io::LABELS_FILE);
    let split_path = resolve(&args.split, &args.data, io::SPLIT_FILE);
    let dataset = match (labels_path, split_path) {
        (Some(l), Some(s)) if need_dataset || (l.exists() && s.exists()) => {
            require_file(&l)?;
            require_file(&s)?;
            let labels = io::load_labels(&l, graph.num_nodes())?;
            let (train_nodes, test_nodes) = io::load_split(&s)?;
            let gt_path = args.data.as_ref().map(|d| d.join(io::GROUND_TRUTH_FILE));
            let ground_truth = match gt_path {
                Some(p) if p.exists() => {
                    let text = std::fs::read_to_string(&p)?;
                    Some(io::parse_ground_truth(&text, &p, graph.num_nodes())?)
                }
                _ => None,
            };
            let d = Dataset {
                graph: graph.clone(),
                features: features.clone(),
                labels,
                train_nodes,
                test_nodes,
                ground_truth,
            };
            d.check()?;
            Some(d)
        }
        _ if need_dataset => return Err(CliError::Usage("give --data or both --labels and --split".into())),
        _ => None,
    };
    Ok(Loaded {
        graph,
        features,
        dataset,
    })
}

pub fn load_model(path: &Path) -> CliResult<Model> {
    require_file(path)?;
    Ok(Model::load(path)?)
}

pub fn train_config(p: &TrainParams) -> TrainConfig {
    let mut c = match p.arch {
        Arch::Gcn2 => TrainConfig::gcn2(p.seed),
        Arch::Gcn3Stack => TrainConfig::gcn3_stack(p.seed),
    };
    if let Some(l) = p.layers {
        c.num_layers = l;
    }
    if let Some(h) = p.hidden {
        c.hidden_dim = h;
    }
    if let Some(e) = p.epochs {
        c.epochs = e;
    }
    if let Some(lr) = p.lr {
        c.learning_rate = lr;
    }
    if let Some(wd) = p.weight_decay {
        c.weight_decay = wd;
    }
    c
}

pub fn zorro_config(p: &ZorroParams, seed: u64) -> ZorroConfig {
    ZorroConfig {
        tau: p.tau,
        top_k: p.top_k,
        samples: p.samples,
        seed,
        max_elements: p.max_elements,
        max_explanations: p.max_explanations,
        max_depth: p.max_depth,
    }
}

pub fn gt_explainer(kind: ExplainerArg, zorro: &ZorroParams, seed: u64, random_nodes: usize, random_features: usize) -> GtExplainer {
    match kind {
        ExplainerArg::Zorro => GtExplainer::Zorro(zorro_config(zorro, seed)),
        ExplainerArg::Empty => GtExplainer::Baseline(BaselineKind::Empty),
        ExplainerArg::Random => GtExplainer::Baseline(BaselineKind::Random {
            nodes: random_nodes,
            features: random_features,
            seed,
        }),
        ExplainerArg::Grad => GtExplainer::Baseline(BaselineKind::Grad),
        ExplainerArg::GradInput => GtExplainer::Baseline(BaselineKind::GradInput),
    }
}

pub fn thread_pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    if threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

/// Explanation files (`node-<N>.json`) in a directory, ordered by node.
pub fn explanation_files(dir: &Path) -> CliResult<Vec<(usize, PathBuf)>> {
    require_file(dir)?;
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let node = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("node-"))
            .and_then(|n| n.strip_suffix(".json"))
            .and_then(|n| n.parse::<usize>().ok());
        if let Some(node) = node {
            files.push((node, path));
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::Usage(format!("no node-<N>.json explanation files in {}", dir.display())));
    }
    Ok(files)
}
