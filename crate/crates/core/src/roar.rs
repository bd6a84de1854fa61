//! Remove-and-retrain: keep only the globally top-k explained features,
//! retrain from scratch and measure test accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{train_gcn, TrainConfig};
use crate::graph::Graph;
use crate::matrix::Matrix;

/// Features ranked by summed mask value over all explanations, ties by
/// ascending index. Hard masks (0/1) give a frequency ranking.
pub fn aggregate_feature_importance(feature_masks: &[Vec<f64>]) -> Result<Vec<usize>> {
    let Some(first) = feature_masks.first() else {
        return Err(Error::InvalidParameter("no explanations to aggregate".into()));
    };
    let d = first.len();
    let mut totals = vec![0.0; d];
    for mask in feature_masks {
        if mask.len() != d {
            return Err(Error::Dimension(format!("feature masks of length {d} and {}", mask.len())));
        }
        for (t, v) in totals.iter_mut().zip(mask) {
            *t += v;
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]).then(a.cmp(&b)));
    Ok(order)
}

/// A node classification task to retrain on.
#[derive(Debug, Clone, Copy)]
pub struct RoarTask<'a> {
    pub graph: &'a Graph,
    pub features: &'a Matrix,
    pub labels: &'a [usize],
    pub train_nodes: &'a [usize],
    pub test_nodes: &'a [usize],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoarResult {
    pub k_values: Vec<usize>,
    /// Mean test accuracy over repeats, one entry per k.
    pub accuracy_by_k: Vec<f64>,
    /// Test accuracy of every repeat, one row per k.
    pub repeat_accuracies: Vec<Vec<f64>>,
    pub repeats: usize,
    /// Test accuracy of a model trained on all features with the base seed.
    pub baseline_accuracy: f64,
    pub ranking: Vec<usize>,
}

impl RoarResult {
    /// Sample standard deviation of the repeats for each k.
    pub fn std_by_k(&self) -> Vec<f64> {
        self.repeat_accuracies
            .iter()
            .map(|accs| {
                if accs.len() < 2 {
                    return 0.0;
                }
                let m = accs.iter().sum::<f64>() / accs.len() as f64;
                (accs.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (accs.len() - 1) as f64).sqrt()
            })
            .collect()
    }
}

/// `x` with every column outside `keep` set to zero.
pub fn keep_columns(x: &Matrix, keep: &[usize]) -> Matrix {
    let mut flags = vec![false; x.cols()];
    for &j in keep {
        flags[j] = true;
    }
    let mut out = x.clone();
    for i in 0..out.rows() {
        for (v, &k) in out.row_mut(i).iter_mut().zip(&flags) {
            if !k {
                *v = 0.0;
            }
        }
    }
    out
}

fn test_accuracy(task: &RoarTask<'_>, x: &Matrix, config: &TrainConfig) -> Result<f64> {
    let outcome = train_gcn(task.graph, x, task.labels, task.train_nodes, task.test_nodes, config)?;
    outcome.model.accuracy(task.graph, x, task.labels, task.test_nodes)
}

/// For each k, zero all but the top-k features of the aggregated ranking and
/// retrain `repeats` times with seeds `config.seed + i`.
pub fn roar_run(
    task: &RoarTask<'_>,
    feature_masks: &[Vec<f64>],
    k_values: &[usize],
    repeats: usize,
    config: &TrainConfig,
) -> Result<RoarResult> {
    let d = task.features.cols();
    if let Some(&k) = k_values.iter().find(|&&k| k > d) {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds the {d} features")));
    }
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    if task.test_nodes.is_empty() {
        return Err(Error::InvalidParameter("empty test set".into()));
    }
    let ranking = aggregate_feature_importance(feature_masks)?;
    if ranking.len() != d {
        return Err(Error::Dimension(format!("masks over {} features for {d} columns", ranking.len())));
    }
    let baseline_accuracy = test_accuracy(task, task.features, config)?;
    let mut repeat_accuracies = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let x = keep_columns(task.features, &ranking[..k]);
        let mut accs = Vec::with_capacity(repeats);
        for i in 0..repeats {
            let cfg = TrainConfig {
                seed: config.seed.wrapping_add(i as u64),
                snapshot_epochs: Vec::new(),
                ..config.clone()
            };
            accs.push(test_accuracy(task, &x, &cfg)?);
        }
        repeat_accuracies.push(accs);
    }
    Ok(RoarResult {
        k_values: k_values.to_vec(),
        accuracy_by_k: repeat_accuracies.iter().map(|a| a.iter().sum::<f64>() / a.len() as f64).collect(),
        repeat_accuracies,
        repeats,
        baseline_accuracy,
        ranking,
    })
}
