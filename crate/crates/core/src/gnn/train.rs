//! Full-batch training of GCNs with Adam and L2 weight decay.

use serde::{Deserialize, Serialize};

use super::gcn::{Gcn, GcnArch};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::{argmax, softmax, Matrix};
use crate::rng::{self, label};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: GcnArch,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Epochs after which a copy of the model is kept (0 = initialisation).
    #[serde(default)]
    pub snapshot_epochs: Vec<usize>,
}

impl TrainConfig {
    /// Two-layer GCN recipe for citation-style datasets.
    pub fn gcn2(seed: u64) -> Self {
        Self {
            arch: GcnArch::Plain,
            num_layers: 2,
            hidden_dim: 16,
            epochs: 200,
            learning_rate: 0.01,
            weight_decay: 0.005,
            seed,
            snapshot_epochs: Vec::new(),
        }
    }

    /// Three-layer stacked GCN recipe for the synthetic benchmark.
    pub fn gcn3_stack(seed: u64) -> Self {
        Self {
            arch: GcnArch::Stacked,
            num_layers: 3,
            hidden_dim: 16,
            epochs: 2000,
            learning_rate: 0.001,
            weight_decay: 0.005,
            seed,
            snapshot_epochs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Gcn,
    /// One entry per epoch, measured on the forward pass preceding that
    /// epoch's update.
    pub trace: Vec<EpochStats>,
    pub snapshots: Vec<(usize, Gcn)>,
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    fn new(lr: f64, shapes: &[usize]) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    fn update(&mut self, params: Vec<&mut [f64]>, grads: Vec<&mut [f64]>) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Fraction of `nodes` whose argmax logit matches their label.
pub(crate) fn accuracy_from_logits(logits: &Matrix, labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes
        .iter()
        .filter(|&&i| argmax(logits.row(i)) == labels[i])
        .count();
    hits as f64 / nodes.len() as f64
}

impl Gcn {
    /// Test accuracy over `nodes` on the full graph.
    pub fn accuracy(&self, graph: &Graph, x: &Matrix, labels: &[usize], nodes: &[usize]) -> Result<f64> {
        let logits = self.logits(graph.adjacency(), x)?;
        Ok(accuracy_from_logits(&logits, labels, nodes))
    }
}

/// Trains a GCN by full-batch cross-entropy on `train_nodes`.
///
/// Deterministic for a given `config.seed`. `test_nodes` only feeds the
/// accuracy trace.
pub fn train_gcn(
    graph: &Graph,
    x: &Matrix,
    labels: &[usize],
    train_nodes: &[usize],
    test_nodes: &[usize],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let n = graph.num_nodes();
    if x.rows() != n || labels.len() != n {
        return Err(Error::Dimension(format!(
            "graph has {n} nodes, features {} rows, labels {}",
            x.rows(),
            labels.len()
        )));
    }
    if train_nodes.is_empty() {
        return Err(Error::InvalidParameter("empty training set".into()));
    }
    if let Some(&bad) = train_nodes.iter().chain(test_nodes).find(|&&i| i >= n) {
        return Err(Error::NodeOutOfRange {
            index: bad,
            num_nodes: n,
        });
    }
    let num_classes = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut init_rng = rng::stream(config.seed, &[label::INIT]);
    let mut model = Gcn::init(
        config.arch,
        x.cols(),
        config.hidden_dim,
        num_classes,
        config.num_layers,
        &mut init_rng,
    )?;
    let shapes: Vec<usize> = model.params_mut().iter().map(|p| p.len()).collect();
    let mut adam = Adam::new(config.learning_rate, &shapes);
    let adjacency = graph.adjacency();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut snapshots = Vec::new();
    if config.snapshot_epochs.contains(&0) {
        snapshots.push((0, model.clone()));
    }
    let inv_train = 1.0 / train_nodes.len() as f64;

    for epoch in 1..=config.epochs {
        let cache = model.forward_cached(adjacency, x);
        let mut d_logits = Matrix::zeros(n, num_classes);
        let mut loss = 0.0;
        for &i in train_nodes {
            let row = cache.logits.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let log_norm = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            loss += (log_norm - row[labels[i]]) * inv_train;
            let p = softmax(row);
            let g = d_logits.row_mut(i);
            for (c, (gc, pc)) in g.iter_mut().zip(&p).enumerate() {
                *gc = (pc - f64::from(u8::from(c == labels[i]))) * inv_train;
            }
        }
        loss += 0.5 * config.weight_decay * model.param_sum_sq();
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch, loss });
        }
        trace.push(EpochStats {
            epoch,
            loss,
            train_accuracy: accuracy_from_logits(&cache.logits, labels, train_nodes),
            test_accuracy: (!test_nodes.is_empty())
                .then(|| accuracy_from_logits(&cache.logits, labels, test_nodes)),
        });

        let (mut grads, _) = model.backward(adjacency, &cache, &d_logits, false);
        let wd = config.weight_decay;
        {
            let mut flat = grads.flat_mut();
            let params = model.params_mut();
            for (g, p) in flat.iter_mut().zip(params) {
                for (gi, pi) in g.iter_mut().zip(p.iter()) {
                    *gi += wd * pi;
                }
            }
        }
        adam.update(model.params_mut(), grads.flat_mut());
        if config.snapshot_epochs.contains(&epoch) {
            snapshots.push((epoch, model.clone()));
        }
    }
    Ok(TrainOutcome {
        model,
        trace,
        snapshots,
    })
}
