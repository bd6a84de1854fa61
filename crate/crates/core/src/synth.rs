//! BA-Community benchmark: two Barabási–Albert communities with house motifs
//! whose five nodes serve as ground-truth explanations.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::gnn::Model;
use crate::graph::{ComputationalGraph, Graph};
use crate::io::Dataset;
use crate::matrix::Matrix;
use crate::baselines::{explain_baseline, BaselineKind, BaselineOutput};
use crate::metrics::{faithfulness, ground_truth_scores, top_k_flags};
use crate::rng::{self, label};
use crate::zorro::{zorro_explain, ZorroConfig};

pub const NOISE_FEATURES: usize = 8;
pub const COMMUNITY_FEATURES: usize = 2;
pub const NUM_FEATURES: usize = NOISE_FEATURES + COMMUNITY_FEATURES;
pub const NUM_CLASSES: usize = 8;
pub const HOUSE_SIZE: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub base_nodes: usize,
    pub attachment: usize,
    pub houses: usize,
    /// Absolute mean of the two community columns (`-μ` for the first
    /// community, `+μ` for the second).
    pub community_mean: f64,
    pub community_std: f64,
    /// Fraction of each community's edges that are rewired.
    pub perturbation_rate: f64,
    /// Cross-community edges as a fraction of the node count.
    pub bridge_fraction: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            base_nodes: 300,
            attachment: 5,
            houses: 80,
            community_mean: 1.0,
            community_std: 0.5,
            perturbation_rate: 0.0001,
            bridge_fraction: 0.01,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.attachment == 0 || self.attachment >= self.base_nodes {
            return bad(format!(
                "attachment {} must be in 1..{} (base nodes)",
                self.attachment, self.base_nodes
            ));
        }
        if self.houses > self.base_nodes {
            return bad(format!("{} houses need as many base nodes, have {}", self.houses, self.base_nodes));
        }
        if !(0.0..=1.0).contains(&self.perturbation_rate) {
            return bad(format!("perturbation rate {} outside [0, 1]", self.perturbation_rate));
        }
        if !(self.bridge_fraction >= 0.0) {
            return bad(format!("negative bridge fraction {}", self.bridge_fraction));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train fraction {} outside (0, 1)", self.train_fraction));
        }
        if !(self.community_std > 0.0) {
            return bad(format!("community std {} must be positive", self.community_std));
        }
        Ok(())
    }

    pub fn community_size(&self) -> usize {
        self.base_nodes + HOUSE_SIZE * self.houses
    }

    pub fn num_nodes(&self) -> usize {
        2 * self.community_size()
    }
}

/// Role of a node; its label is `4 · community + role`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Base = 0,
    Bottom = 1,
    Middle = 2,
    Top = 3,
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    /// Node ids of every house: `[bottom, bottom, middle, middle, top]`.
    pub houses: Vec<[usize; HOUSE_SIZE]>,
    /// Index into `houses` for house nodes.
    pub house_of: Vec<Option<usize>>,
    pub train_nodes: Vec<usize>,
    pub test_nodes: Vec<usize>,
}

impl SynthDataset {
    pub fn ground_truth(&self, node: usize) -> Option<&[usize; HOUSE_SIZE]> {
        self.house_of.get(node).copied().flatten().map(|h| &self.houses[h])
    }

    pub fn house_nodes(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&v| self.house_of[v].is_some()).collect()
    }

    pub fn community_of(&self, node: usize) -> usize {
        node / self.config.community_size()
    }
}

/// Preferential attachment in the classic formulation: start from `m`
/// isolated nodes, each new node links to `m` distinct targets drawn with
/// probability proportional to degree.
fn barabasi_albert(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity((n - m) * m);
    let mut targets: Vec<usize> = (0..m).collect();
    let mut repeated: Vec<usize> = Vec::with_capacity(2 * (n - m) * m);
    for source in m..n {
        for &t in &targets {
            edges.push((source, t));
        }
        repeated.extend_from_slice(&targets);
        repeated.extend(std::iter::repeat_n(source, m));
        let mut chosen = Vec::with_capacity(m);
        while chosen.len() < m {
            let t = repeated[rng.random_range(0..repeated.len())];
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        targets = chosen;
    }
    edges
}

pub fn generate(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    let n = config.num_nodes();
    let size = config.community_size();
    let mut rng = rng::stream(config.seed, &[label::GRAPH]);
    let mut graph = Graph::empty(n);
    let mut labels = vec![0; n];
    let mut houses = Vec::with_capacity(2 * config.houses);
    let mut house_of = vec![None; n];

    for c in 0..2 {
        let offset = c * size;
        for (u, v) in barabasi_albert(config.base_nodes, config.attachment, &mut rng) {
            graph.add_edge(offset + u, offset + v)?;
        }
        for v in 0..size {
            labels[offset + v] = 4 * c;
        }
        let anchors = sample(&mut rng, config.base_nodes, config.houses);
        for (h, anchor) in anchors.into_iter().enumerate() {
            let first = offset + config.base_nodes + HOUSE_SIZE * h;
            let [b0, b1, m0, m1, t] = [first, first + 1, first + 2, first + 3, first + 4];
            for (u, v) in [(b0, b1), (b0, m0), (b1, m1), (m0, m1), (m0, t), (m1, t), (b0, offset + anchor)] {
                graph.add_edge(u, v)?;
            }
            for (node, role) in [(b0, Role::Bottom), (b1, Role::Bottom), (m0, Role::Middle), (m1, Role::Middle), (t, Role::Top)] {
                labels[node] = 4 * c + role as usize;
                house_of[node] = Some(houses.len());
            }
            houses.push([b0, b1, m0, m1, t]);
        }
    }

    let bridges = (config.bridge_fraction * n as f64).round() as usize;
    let mut added = 0;
    // bounded retries in case the bipartite base graph is nearly complete
    for _ in 0..bridges.saturating_mul(100) {
        if added == bridges {
            break;
        }
        let u = rng.random_range(0..config.base_nodes);
        let v = size + rng.random_range(0..config.base_nodes);
        if graph.add_edge(u, v)? {
            added += 1;
        }
    }

    rewire(&mut graph, config, &mut rng)?;

    let features = community_features(config, &mut rng::stream(config.seed, &[label::FEATURES]))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(config.seed, &[label::SPLIT]));
    let cut = (config.train_fraction * n as f64).round() as usize;
    let mut train_nodes = order[..cut].to_vec();
    let mut test_nodes = order[cut..].to_vec();
    train_nodes.sort_unstable();
    test_nodes.sort_unstable();

    Ok(SynthDataset {
        config: config.clone(),
        graph,
        features,
        labels,
        houses,
        house_of,
        train_nodes,
        test_nodes,
    })
}

/// Rewires `ceil(rate · |E_c|)` edges inside each community: a uniformly
/// chosen edge is removed and a uniformly chosen non-edge added.
fn rewire(graph: &mut Graph, config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<()> {
    let size = config.community_size();
    for c in 0..2 {
        let range = c * size..(c + 1) * size;
        let inside: Vec<(usize, usize)> = graph.edges().filter(|(u, v)| range.contains(u) && range.contains(v)).collect();
        let count = (config.perturbation_rate * inside.len() as f64).ceil() as usize;
        for &idx in &sample(rng, inside.len(), count.min(inside.len())).into_vec() {
            let (u, v) = inside[idx];
            graph.remove_edge(u, v);
            loop {
                let a = range.start + rng.random_range(0..size);
                let b = range.start + rng.random_range(0..size);
                if a != b && (a, b) != (u, v) && (b, a) != (u, v) && graph.add_edge(a, b)? {
                    break;
                }
            }
        }
    }
    Ok(())
}

fn community_features(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<FeatureMatrix> {
    let mut x = raw_features(config, rng)?;
    scale_within_communities(&mut x, config.community_size());
    Ok(FeatureMatrix::new(x))
}

/// Gaussian features before normalisation; the last two columns carry the
/// community signal.
fn raw_features(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Matrix> {
    let size = config.community_size();
    let n = 2 * size;
    let mut x = Matrix::zeros(n, NUM_FEATURES);
    for c in 0..2 {
        let mean = if c == 0 { -config.community_mean } else { config.community_mean };
        let community = Normal::new(mean, config.community_std)
            .map_err(|e| Error::InvalidParameter(format!("community feature distribution: {e}")))?;
        for v in c * size..(c + 1) * size {
            let row = x.row_mut(v);
            for value in row.iter_mut().take(NOISE_FEATURES) {
                *value = StandardNormal.sample(rng);
            }
            for value in row.iter_mut().skip(NOISE_FEATURES) {
                *value = community.sample(rng);
            }
        }
    }
    Ok(x)
}

/// Divides each community's columns by their within-community standard
/// deviation. Columns are not centred, which would erase the community
/// signal carried by the column means.
fn scale_within_communities(x: &mut Matrix, size: usize) {
    for c in 0..2 {
        for j in 0..x.cols() {
            let col: Vec<f64> = (c * size..(c + 1) * size).map(|v| x.get(v, j)).collect();
            let m = col.iter().sum::<f64>() / size as f64;
            let var = col.iter().map(|a| (a - m).powi(2)).sum::<f64>() / size as f64;
            let sd = var.sqrt();
            if sd > 0.0 {
                for v in c * size..(c + 1) * size {
                    x.set(v, j, x.get(v, j) / sd);
                }
            }
        }
    }
}

/// Node selection produced by an explainer, as flags over the local nodes of
/// the computational graph.
pub type NodeExplainer<'a> = dyn Fn(&Model, &ComputationalGraph, &FeatureMatrix) -> Result<Vec<bool>> + Sync + 'a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub precision: f64,
    pub accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthReport {
    pub rows: Vec<EpochRow>,
    /// Kendall tau between precision and test accuracy; `None` when either
    /// sequence is constant.
    pub faithfulness: Option<f64>,
}

/// Precision/accuracy against the ground-truth explanations for every
/// snapshot, averaged over `nodes`, plus the rank agreement with test
/// accuracy.
pub fn run_ground_truth_eval(
    dataset: &Dataset,
    snapshots: &[(usize, Model)],
    nodes: &[usize],
    explain: &NodeExplainer<'_>,
) -> Result<GroundTruthReport> {
    if nodes.is_empty() {
        return Err(Error::InvalidParameter("no nodes to evaluate".into()));
    }
    let truth_of = |node: usize| {
        dataset
            .ground_truth
            .as_ref()
            .and_then(|gt| gt.get(node))
            .and_then(Option::as_ref)
            .ok_or_else(|| Error::InvalidParameter(format!("node {node} has no ground-truth explanation")))
    };
    let mut rows = Vec::with_capacity(snapshots.len());
    for (epoch, model) in snapshots {
        let hops = model.receptive_field();
        let (mut precision, mut accuracy) = (0.0, 0.0);
        for &node in nodes {
            let truth = truth_of(node)?;
            let cg = ComputationalGraph::extract(&dataset.graph, node, hops)?;
            let x = dataset.features.restrict(&cg)?;
            let selected = explain(model, &cg, &x)?;
            let gt: Vec<bool> = cg.local_nodes().iter().map(|v| truth.contains(v)).collect();
            let s = ground_truth_scores(&selected, &gt)?;
            precision += s.precision;
            accuracy += s.accuracy;
        }
        let preds = model.predict_all(dataset.graph.adjacency(), dataset.features.values())?;
        let correct = dataset
            .test_nodes
            .iter()
            .filter(|&&v| preds[v].predicted_class == dataset.labels[v])
            .count();
        rows.push(EpochRow {
            epoch: *epoch,
            precision: precision / nodes.len() as f64,
            accuracy: accuracy / nodes.len() as f64,
            test_accuracy: correct as f64 / dataset.test_nodes.len().max(1) as f64,
        });
    }
    let p: Vec<f64> = rows.iter().map(|r| r.precision).collect();
    let a: Vec<f64> = rows.iter().map(|r| r.test_accuracy).collect();
    let faithfulness = match faithfulness(&p, &a) {
        Ok(t) => Some(t),
        Err(Error::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(GroundTruthReport { rows, faithfulness })
}

/// Explainers compared against the house ground truth.
#[derive(Debug, Clone, PartialEq)]
pub enum GtExplainer {
    Zorro(ZorroConfig),
    Baseline(BaselineKind),
}

/// Selected nodes of one explanation; soft masks keep their
/// [`HOUSE_SIZE`] highest-scoring nodes.
pub fn explain_nodes(explainer: &GtExplainer, model: &Model, cg: &ComputationalGraph, x: &FeatureMatrix) -> Result<Vec<bool>> {
    match explainer {
        GtExplainer::Zorro(config) => match zorro_explain(model, cg, x, config) {
            Ok(z) => Ok(z.explanation.node_flags().to_vec()),
            Err(Error::ExplanationIncomplete { partial, .. }) => Ok(partial.explanation.node_flags().to_vec()),
            Err(e) => Err(e),
        },
        GtExplainer::Baseline(kind) => match explain_baseline(*kind, model, cg, x)? {
            BaselineOutput::Hard(e) => Ok(e.node_flags().to_vec()),
            BaselineOutput::Soft(mask) => {
                let scores = mask.node_scores.unwrap_or_else(|| vec![1.0; cg.num_nodes()]);
                Ok(top_k_flags(&scores, HOUSE_SIZE))
            }
        },
    }
}

#[cfg(test)]
mod tests;
