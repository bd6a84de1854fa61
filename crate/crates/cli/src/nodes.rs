//! Query node selection from the `--nodes` argument.

use rand::seq::index::sample;
use zorro_core::io::Dataset;
use zorro_core::rng::{self, label};

use crate::error::{CliError, CliResult};

/// Resolves a node specification against a dataset. Only `all` and explicit
/// lists work without labels and splits.
pub fn select_nodes(spec: &str, num_nodes: usize, data: Option<&Dataset>, seed: u64) -> CliResult<Vec<usize>> {
    let need = |what: &str| {
        data.ok_or_else(|| CliError::Usage(format!("--nodes {spec} needs a dataset with {what}")))
    };
    let nodes = match spec {
        "all" => (0..num_nodes).collect(),
        "train" => need("a split")?.train_nodes.clone(),
        "test" => need("a split")?.test_nodes.clone(),
        "ground-truth" => {
            let gt = need("ground truth")?
                .ground_truth
                .as_ref()
                .ok_or_else(|| CliError::Usage("dataset has no ground_truth.csv".into()))?;
            (0..num_nodes).filter(|&v| gt[v].is_some()).collect()
        }
        _ => {
            if let Some(count) = spec.strip_suffix("-random") {
                let count: usize = count
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad node count in --nodes {spec}")))?;
                if count > num_nodes {
                    return Err(CliError::Usage(format!("cannot pick {count} of {num_nodes} nodes")));
                }
                let mut rng = rng::stream(seed, &[label::NODES]);
                let mut picked = sample(&mut rng, num_nodes, count).into_vec();
                picked.sort_unstable();
                picked
            } else {
                let mut list = spec
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<usize>()
                            .map_err(|_| CliError::Usage(format!("bad node `{t}` in --nodes")))
                    })
                    .collect::<CliResult<Vec<usize>>>()?;
                list.sort_unstable();
                list.dedup();
                list
            }
        }
    };
    if let Some(&bad) = nodes.iter().find(|&&v| v >= num_nodes) {
        return Err(CliError::Usage(format!("node {bad} out of range for {num_nodes} nodes")));
    }
    Ok(nodes)
}
