//! Evaluation metrics for explanations and soft-to-hard mask transforms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explanation::{Explanation, MaskSide, SoftMask};
use crate::features::{fmt_f64, FeatureMatrix};
use crate::gnn::NodeClassifier;
use crate::graph::ComputationalGraph;
use crate::matrix::{argmax, Matrix};

/// `X` with every entry where `keep(i, j)` is false set to `baseline`.
fn with_baseline(x: &Matrix, baseline: f64, keep: impl Fn(usize, usize) -> bool) -> Matrix {
    let mut y = x.clone();
    for i in 0..y.rows() {
        for (j, v) in y.row_mut(i).iter_mut().enumerate() {
            if !keep(i, j) {
                *v = baseline;
            }
        }
    }
    y
}

/// 1 if the prediction is unchanged when all unselected entries are set to
/// `baseline`, 0 otherwise.
pub fn validity<M: NodeClassifier + ?Sized>(
    model: &M,
    cg: &ComputationalGraph,
    features: &FeatureMatrix,
    explanation: &Explanation,
    baseline: f64,
) -> Result<u8> {
    explanation.check_shape(features.rows(), features.cols())?;
    let x = features.values();
    let original = model.predict_query(cg, x)?;
    let kept = with_baseline(x, baseline, |i, j| explanation.pins(i, j));
    Ok(u8::from(model.predict_query(cg, &kept)? == original))
}

/// Entropy (nats) of the mask normalised to a distribution; 0 for an
/// all-zero mask.
pub fn sparsity_entropy(mask: MaskSide<'_>) -> Result<f64> {
    let values = mask.values();
    if let Some(bad) = values.iter().find(|v| !(**v >= 0.0) || v.is_infinite()) {
        return Err(Error::InvalidParameter(format!("mask value {bad} is not a finite non-negative number")));
    }
    let total: f64 = values.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok(values
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let p = v / total;
            -p * p.ln()
        })
        .fold(0.0, |acc, h| acc + h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityVariants {
    pub plus_acc: f64,
    pub minus_acc: f64,
    pub plus_prob: f64,
    pub minus_prob: f64,
}

/// Occlusion-style fidelity: `+` removes the explanation (selected entries
/// set to `baseline`), `−` keeps only the explanation. Probabilities are
/// those of the originally predicted class.
pub fn fidelity_variants<M: NodeClassifier + ?Sized>(
    model: &M,
    cg: &ComputationalGraph,
    features: &FeatureMatrix,
    explanation: &Explanation,
    baseline: f64,
) -> Result<FidelityVariants> {
    explanation.check_shape(features.rows(), features.cols())?;
    let x = features.values();
    let probs = model.query_probs(cg, x)?;
    let class = argmax(&probs);
    let removed = model.query_probs(cg, &with_baseline(x, baseline, |i, j| !explanation.pins(i, j)))?;
    let kept = model.query_probs(cg, &with_baseline(x, baseline, |i, j| explanation.pins(i, j)))?;
    Ok(FidelityVariants {
        plus_acc: f64::from(u8::from(argmax(&removed) != class)),
        minus_acc: f64::from(u8::from(argmax(&kept) != class)),
        plus_prob: probs[class] - removed[class],
        minus_prob: probs[class] - kept[class],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthScores {
    pub precision: f64,
    pub accuracy: f64,
}

/// Precision and accuracy of a node selection against ground-truth nodes,
/// both given as flags over the same universe.
pub fn ground_truth_scores(selected: &[bool], ground_truth: &[bool]) -> Result<GroundTruthScores> {
    if selected.len() != ground_truth.len() {
        return Err(Error::Dimension(format!(
            "{} selection flags for {} ground-truth flags",
            selected.len(),
            ground_truth.len()
        )));
    }
    if selected.is_empty() {
        return Err(Error::InvalidParameter("empty node universe".into()));
    }
    let hits = selected.iter().zip(ground_truth).filter(|(s, g)| **s && **g).count();
    let correct = selected.iter().zip(ground_truth).filter(|(s, g)| s == g).count();
    let chosen = selected.iter().filter(|s| **s).count();
    Ok(GroundTruthScores {
        precision: if chosen == 0 { 0.0 } else { hits as f64 / chosen as f64 },
        accuracy: correct as f64 / selected.len() as f64,
    })
}

/// Kendall's tau-b between two paired sequences.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("sequences of length {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Undefined("Kendall tau needs at least two pairs".into()));
    }
    let (mut concordant, mut discordant, mut tied_x, mut tied_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i].partial_cmp(&x[j]);
            let dy = y[i].partial_cmp(&y[j]);
            let (Some(dx), Some(dy)) = (dx, dy) else {
                return Err(Error::Undefined("NaN in rank correlation input".into()));
            };
            use std::cmp::Ordering::Equal;
            match (dx, dy) {
                (Equal, Equal) => {
                    tied_x += 1;
                    tied_y += 1;
                }
                (Equal, _) => tied_x += 1,
                (_, Equal) => tied_y += 1,
                (a, b) if a == b => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let pairs = (x.len() * (x.len() - 1) / 2) as i64;
    let denom = (((pairs - tied_x) * (pairs - tied_y)) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::Undefined("Kendall tau of a constant sequence".into()));
    }
    Ok((concordant - discordant) as f64 / denom)
}

/// Rank agreement between per-epoch explanation precision and model accuracy.
pub fn faithfulness(precision_by_epoch: &[f64], accuracy_by_epoch: &[f64]) -> Result<f64> {
    kendall_tau_b(precision_by_epoch, accuracy_by_epoch)
}

/// Fraction of selected nodes, other than the query node, whose label equals
/// the query node's. `labels` is indexed by local node. `None` when no other
/// node is selected.
pub fn homophily(explanation: &Explanation, query_local: usize, labels: &[usize]) -> Result<Option<f64>> {
    if labels.len() != explanation.num_nodes() {
        return Err(Error::Dimension(format!(
            "{} labels for {} nodes",
            labels.len(),
            explanation.num_nodes()
        )));
    }
    let others: Vec<usize> = explanation.selected_nodes().into_iter().filter(|&v| v != query_local).collect();
    if others.is_empty() {
        return Ok(None);
    }
    let same = others.iter().filter(|&&v| labels[v] == labels[query_local]).count();
    Ok(Some(same as f64 / others.len() as f64))
}

/// Soft-to-hard mask transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HardTransform {
    /// Keep the `ceil(x·n)` highest entries.
    TopFraction(f64),
    /// Min-max normalise and keep entries above the threshold.
    NormalizeThreshold(f64),
}

/// Flags of the `k` highest scores, ties by ascending index.
pub fn top_k_flags(scores: &[f64], k: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut flags = vec![false; scores.len()];
    for &i in order.iter().take(k) {
        flags[i] = true;
    }
    flags
}

impl HardTransform {
    pub const NT_THRESHOLD: f64 = 0.01;

    pub fn validate(&self) -> Result<()> {
        match *self {
            HardTransform::TopFraction(x) if !(x > 0.0 && x <= 1.0) => {
                Err(Error::InvalidParameter(format!("top fraction {x} outside (0, 1]")))
            }
            HardTransform::NormalizeThreshold(t) if !(t >= 0.0) => {
                Err(Error::InvalidParameter(format!("negative threshold {t}")))
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, scores: &[f64]) -> Result<Vec<bool>> {
        self.validate()?;
        match *self {
            HardTransform::TopFraction(x) => {
                let keep = (x * scores.len() as f64).ceil() as usize;
                Ok(top_k_flags(scores, keep))
            }
            HardTransform::NormalizeThreshold(t) => {
                let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if hi <= lo {
                    return Ok(vec![true; scores.len()]);
                }
                Ok(scores.iter().map(|&s| (s - lo) / (hi - lo) > t).collect())
            }
        }
    }
}

impl FromStr for HardTransform {
    type Err = Error;

    /// Accepts `S-0.5`, `S-0.7`, `NT`, `top:<fraction>` and `nt:<threshold>`.
    fn from_str(s: &str) -> Result<Self> {
        let parsed = match s {
            "S-0.5" => HardTransform::TopFraction(0.5),
            "S-0.7" => HardTransform::TopFraction(0.7),
            "NT" => HardTransform::NormalizeThreshold(Self::NT_THRESHOLD),
            _ => {
                let number = |v: &str| {
                    v.parse::<f64>()
                        .map_err(|_| Error::InvalidParameter(format!("bad transform parameter in {s:?}")))
                };
                if let Some(v) = s.strip_prefix("top:") {
                    HardTransform::TopFraction(number(v)?)
                } else if let Some(v) = s.strip_prefix("nt:") {
                    HardTransform::NormalizeThreshold(number(v)?)
                } else {
                    return Err(Error::InvalidParameter(format!("unknown mask transform {s:?}")));
                }
            }
        };
        parsed.validate()?;
        Ok(parsed)
    }
}

impl fmt::Display for HardTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HardTransform::TopFraction(x) => write!(f, "top:{x}"),
            HardTransform::NormalizeThreshold(t) => write!(f, "nt:{t}"),
        }
    }
}

/// Binarises a soft mask; a side without scores is fully selected.
pub fn soft_to_hard(mask: &SoftMask, query_node: usize, num_nodes: usize, num_features: usize, method: HardTransform) -> Result<Explanation> {
    let side = |scores: &Option<Vec<f64>>, len: usize| -> Result<Vec<bool>> {
        match scores {
            Some(s) if s.len() != len => Err(Error::Dimension(format!("{} mask scores for {len} entries", s.len()))),
            Some(s) => method.apply(s),
            None => Ok(vec![true; len]),
        }
    };
    let nodes = side(&mask.node_scores, num_nodes)?;
    let features = side(&mask.feature_scores, num_features)?;
    Explanation::from_sets(
        query_node,
        num_nodes,
        num_features,
        nodes.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)),
        features.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)),
    )
}

/// Node scores from edge scores: each edge gives half its score to each
/// endpoint.
pub fn edge_mask_to_node_mask(num_nodes: usize, edges: &[(usize, usize)], scores: &[f64]) -> Result<Vec<f64>> {
    if edges.len() != scores.len() {
        return Err(Error::Dimension(format!("{} scores for {} edges", scores.len(), edges.len())));
    }
    let mut out = vec![0.0; num_nodes];
    for (&(u, v), &s) in edges.iter().zip(scores) {
        if !(s >= 0.0) {
            return Err(Error::InvalidParameter(format!("negative or NaN edge score {s}")));
        }
        for w in [u, v] {
            let slot = out.get_mut(w).ok_or(Error::NodeOutOfRange { index: w, num_nodes })?;
            *slot += s / 2.0;
        }
    }
    Ok(out)
}

/// One row of the per-node evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub node: usize,
    pub validity: u8,
    pub node_sparsity: f64,
    pub feature_sparsity: f64,
    pub rdt_fidelity: f64,
    pub stability: f64,
    pub fidelity_plus_acc: Option<f64>,
    pub fidelity_minus_acc: Option<f64>,
    pub fidelity_plus_prob: Option<f64>,
    pub fidelity_minus_prob: Option<f64>,
    pub precision: Option<f64>,
    pub accuracy: Option<f64>,
}

impl MetricRecord {
    pub const CSV_HEADER: &'static str = "node,validity,node_sparsity,feature_sparsity,rdt_fidelity,stability,\
fidelity_plus_acc,fidelity_minus_acc,fidelity_plus_prob,fidelity_minus_prob,precision,accuracy";

    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.node,
            self.validity,
            fmt_f64(self.node_sparsity),
            fmt_f64(self.feature_sparsity),
            fmt_f64(self.rdt_fidelity),
            fmt_f64(self.stability),
            opt(self.fidelity_plus_acc),
            opt(self.fidelity_minus_acc),
            opt(self.fidelity_plus_prob),
            opt(self.fidelity_minus_prob),
            opt(self.precision),
            opt(self.accuracy)
        )
    }
}

/// Column means of a set of records; optional columns average over the
/// records where they are present.
pub fn summarize(records: &[MetricRecord]) -> Vec<(&'static str, Option<f64>)> {
    let mean = |f: &dyn Fn(&MetricRecord) -> Option<f64>| {
        let vals: Vec<f64> = records.iter().filter_map(f).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    vec![
        ("validity", mean(&|r| Some(f64::from(r.validity)))),
        ("node_sparsity", mean(&|r| Some(r.node_sparsity))),
        ("feature_sparsity", mean(&|r| Some(r.feature_sparsity))),
        ("rdt_fidelity", mean(&|r| Some(r.rdt_fidelity))),
        ("stability", mean(&|r| Some(r.stability))),
        ("fidelity_plus_acc", mean(&|r| r.fidelity_plus_acc)),
        ("fidelity_minus_acc", mean(&|r| r.fidelity_minus_acc)),
        ("fidelity_plus_prob", mean(&|r| r.fidelity_plus_prob)),
        ("fidelity_minus_prob", mean(&|r| r.fidelity_minus_prob)),
        ("precision", mean(&|r| r.precision)),
        ("accuracy", mean(&|r| r.accuracy)),
    ]
}

#[cfg(test)]
mod tests;
