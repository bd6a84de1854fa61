//! Node classifiers queried by the explainers.

mod gcn;
mod rule;
mod train;

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

pub use gcn::{Gcn, GcnArch, GcnGrads, Linear};
pub use rule::RuleSum;
pub use train::{train_gcn, EpochStats, TrainConfig, TrainOutcome};

use crate::error::{Error, Result};
use crate::graph::ComputationalGraph;
use crate::matrix::{argmax, softmax, Matrix};

/// Black-box view of a node classifier used by every explainer and metric.
pub trait NodeClassifier: Send + Sync {
    fn num_classes(&self) -> usize;

    /// Class probabilities of the computational graph's query node.
    fn query_probs(&self, cg: &ComputationalGraph, x: &Matrix) -> Result<Vec<f64>>;

    /// Predicted class of the query node; ties go to the lowest class index.
    fn predict_query(&self, cg: &ComputationalGraph, x: &Matrix) -> Result<usize> {
        Ok(argmax(&self.query_probs(cg, x)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub node: usize,
    pub class_probs: Vec<f64>,
    pub predicted_class: usize,
}

impl Prediction {
    fn from_probs(node: usize, class_probs: Vec<f64>) -> Self {
        let predicted_class = argmax(&class_probs);
        Self {
            node,
            class_probs,
            predicted_class,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Gcn(Gcn),
    RuleSum(RuleSum),
}

fn one_hot(class: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[class] = 1.0;
    v
}

impl Model {
    /// Kind tag used in model files: `gcn2`, `gcn3-stack`, `rule-sum`, ...
    pub fn kind(&self) -> String {
        match self {
            Model::Gcn(g) => match g.arch() {
                GcnArch::Plain => format!("gcn{}", g.num_layers()),
                GcnArch::Stacked => format!("gcn{}-stack", g.num_layers()),
            },
            Model::RuleSum(_) => "rule-sum".to_string(),
        }
    }

    /// Number of hops that can influence a prediction.
    pub fn receptive_field(&self) -> usize {
        match self {
            Model::Gcn(g) => g.num_layers(),
            Model::RuleSum(r) => r.hops,
        }
    }

    pub fn input_dim(&self) -> Option<usize> {
        match self {
            Model::Gcn(g) => Some(g.input_dim()),
            Model::RuleSum(_) => None,
        }
    }

    pub fn as_gcn(&self) -> Option<&Gcn> {
        match self {
            Model::Gcn(g) => Some(g),
            Model::RuleSum(_) => None,
        }
    }

    /// Predictions for every node of `adjacency` (a whole graph or a
    /// computational graph), indexed like the rows of `x`.
    pub fn predict_all(&self, adjacency: &[Vec<usize>], x: &Matrix) -> Result<Vec<Prediction>> {
        if x.rows() != adjacency.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows for {} nodes",
                x.rows(),
                adjacency.len()
            )));
        }
        Ok(match self {
            Model::Gcn(g) => {
                let logits = g.logits(adjacency, x)?;
                (0..x.rows())
                    .map(|i| Prediction::from_probs(i, softmax(logits.row(i))))
                    .collect()
            }
            Model::RuleSum(r) => r
                .classes(adjacency, x)
                .into_iter()
                .enumerate()
                .map(|(i, c)| Prediction::from_probs(i, one_hot(c, 2)))
                .collect(),
        })
    }

    /// Per-node predictions on a computational graph with local features.
    pub fn forward(&self, cg: &ComputationalGraph, x: &Matrix) -> Result<Vec<Prediction>> {
        self.predict_all(cg.adjacency(), x)
    }

    /// Gradient of the query node's `target_class` logit w.r.t. the local features.
    pub fn gradient(&self, cg: &ComputationalGraph, x: &Matrix, target_class: usize) -> Result<Matrix> {
        let gcn = match self {
            Model::Gcn(g) => g,
            Model::RuleSum(_) => return Err(Error::UnsupportedModel(self.kind())),
        };
        gcn.check_input(x, cg.num_nodes())?;
        if target_class >= gcn.num_classes() {
            return Err(Error::InvalidParameter(format!(
                "target class {target_class} out of {} classes",
                gcn.num_classes()
            )));
        }
        let cache = gcn.forward_cached(cg.adjacency(), x);
        let mut seed = Matrix::zeros(x.rows(), gcn.num_classes());
        seed.set(cg.query_local_index(), target_class, 1.0);
        let (_, dx) = gcn.backward(cg.adjacency(), &cache, &seed, true);
        Ok(dx.expect("input gradient requested"))
    }

    pub fn to_file(&self) -> ModelFile {
        match self {
            Model::Gcn(g) => ModelFile {
                format_version: MODEL_FORMAT_VERSION,
                kind: self.kind(),
                dims: Some(ModelDims {
                    input: g.input_dim(),
                    hidden: g.convs()[0].cols(),
                    classes: g.num_classes(),
                    layers: g.num_layers(),
                }),
                layers: g.convs().iter().map(Matrix::to_rows).collect(),
                head: g.head().map(|h| HeadFile {
                    weights: h.weights.to_rows(),
                    bias: h.bias.clone(),
                }),
                threshold: None,
                hops: None,
                hyper: serde_json::Value::Null,
            },
            Model::RuleSum(r) => ModelFile {
                format_version: MODEL_FORMAT_VERSION,
                kind: self.kind(),
                dims: None,
                layers: Vec::new(),
                head: None,
                threshold: Some(r.threshold),
                hops: Some(r.hops),
                hyper: serde_json::Value::Null,
            },
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Model> {
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Version {
                found: file.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        if file.kind == "rule-sum" {
            let threshold = file
                .threshold
                .ok_or_else(|| Error::InvalidParameter("rule-sum model needs `threshold`".into()))?;
            let hops = file
                .hops
                .ok_or_else(|| Error::InvalidParameter("rule-sum model needs `hops`".into()))?;
            return Ok(Model::RuleSum(RuleSum::new(threshold, hops)));
        }
        let (arch, depth) = parse_gcn_kind(&file.kind)?;
        let dims = file
            .dims
            .ok_or_else(|| Error::InvalidParameter("GCN model needs `dims`".into()))?;
        if file.layers.len() != depth || dims.layers != depth {
            return Err(Error::Dimension(format!(
                "kind {} implies {depth} layers, file has {} (dims say {})",
                file.kind,
                file.layers.len(),
                dims.layers
            )));
        }
        let convs = file
            .layers
            .iter()
            .map(|rows| Matrix::from_rows(rows))
            .collect::<Result<Vec<_>>>()?;
        let head = file
            .head
            .map(|h| -> Result<Linear> {
                Ok(Linear {
                    weights: Matrix::from_rows(&h.weights)?,
                    bias: h.bias,
                })
            })
            .transpose()?;
        let gcn = Gcn::new(arch, convs, head)?;
        let expected_hidden = if arch == GcnArch::Plain && depth == 1 {
            dims.classes
        } else {
            dims.hidden
        };
        if gcn.input_dim() != dims.input
            || gcn.num_classes() != dims.classes
            || gcn.convs()[0].cols() != expected_hidden
        {
            return Err(Error::Dimension(format!(
                "weights are input {} / hidden {} / classes {}, header says {} / {} / {}",
                gcn.input_dim(),
                gcn.convs()[0].cols(),
                gcn.num_classes(),
                dims.input,
                dims.hidden,
                dims.classes
            )));
        }
        Ok(Model::Gcn(gcn))
    }

    pub fn save(&self, path: impl AsRef<Path>, hyper: serde_json::Value) -> Result<()> {
        let mut file = self.to_file();
        file.hyper = hyper;
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        let text = std::fs::read_to_string(path)?;
        Self::from_file(serde_json::from_str(&text)?)
    }
}

fn parse_gcn_kind(kind: &str) -> Result<(GcnArch, usize)> {
    let bad = || Error::InvalidParameter(format!("unknown model kind `{kind}`"));
    let rest = kind.strip_prefix("gcn").ok_or_else(bad)?;
    let (digits, arch) = match rest.strip_suffix("-stack") {
        Some(d) => (d, GcnArch::Stacked),
        None => (rest, GcnArch::Plain),
    };
    let depth = digits.parse::<usize>().map_err(|_| bad())?;
    if depth == 0 {
        return Err(bad());
    }
    Ok((arch, depth))
}

impl NodeClassifier for Model {
    fn num_classes(&self) -> usize {
        match self {
            Model::Gcn(g) => g.num_classes(),
            Model::RuleSum(_) => 2,
        }
    }

    fn query_probs(&self, cg: &ComputationalGraph, x: &Matrix) -> Result<Vec<f64>> {
        match self {
            Model::Gcn(g) => {
                g.check_input(x, cg.num_nodes())?;
                let logits = g.query_logits(cg.adjacency(), cg.hop_distance(), cg.query_local_index(), x);
                Ok(softmax(&logits))
            }
            Model::RuleSum(r) => {
                if x.rows() != cg.num_nodes() {
                    return Err(Error::Dimension(format!(
                        "{} feature rows for {} nodes",
                        x.rows(),
                        cg.num_nodes()
                    )));
                }
                Ok(one_hot(r.query_class(cg.hop_distance(), x), 2))
            }
        }
    }
}

/// Wraps a classifier and counts query forward passes.
pub struct CountingClassifier<'a, M: NodeClassifier + ?Sized> {
    inner: &'a M,
    calls: AtomicUsize,
}

impl<'a, M: NodeClassifier + ?Sized> CountingClassifier<'a, M> {
    pub fn new(inner: &'a M) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<M: NodeClassifier + ?Sized> NodeClassifier for CountingClassifier<'_, M> {
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    fn query_probs(&self, cg: &ComputationalGraph, x: &Matrix) -> Result<Vec<f64>> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.query_probs(cg, x)
    }

    fn predict_query(&self, cg: &ComputationalGraph, x: &Matrix) -> Result<usize> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.predict_query(cg, x)
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
    pub layers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadFile {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// On-disk model description (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<ModelDims>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub layers: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<HeadFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hops: Option<usize>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub hyper: serde_json::Value,
}
