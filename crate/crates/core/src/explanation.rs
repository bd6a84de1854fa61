//! Hard and soft explanation masks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Hard mask over a computational graph: selected local nodes `V_s` and
/// selected feature columns `F_s`. Entry `(i, j)` of the feature matrix is
/// pinned iff `i ∈ V_s` and `j ∈ F_s`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Explanation {
    query_node: usize,
    nodes: Vec<bool>,
    features: Vec<bool>,
}

impl Explanation {
    pub fn empty(query_node: usize, num_nodes: usize, num_features: usize) -> Self {
        Self {
            query_node,
            nodes: vec![false; num_nodes],
            features: vec![false; num_features],
        }
    }

    pub fn full(query_node: usize, num_nodes: usize, num_features: usize) -> Self {
        Self {
            query_node,
            nodes: vec![true; num_nodes],
            features: vec![true; num_features],
        }
    }

    /// Builds a mask from selected local node and feature indices.
    pub fn from_sets(
        query_node: usize,
        num_nodes: usize,
        num_features: usize,
        nodes: impl IntoIterator<Item = usize>,
        features: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let mut e = Self::empty(query_node, num_nodes, num_features);
        for v in nodes {
            if v >= num_nodes {
                return Err(Error::NodeOutOfRange {
                    index: v,
                    num_nodes,
                });
            }
            e.nodes[v] = true;
        }
        for f in features {
            if f >= num_features {
                return Err(Error::InvalidParameter(format!(
                    "feature {f} out of range for {num_features} features"
                )));
            }
            e.features[f] = true;
        }
        Ok(e)
    }

    #[inline]
    pub fn query_node(&self) -> usize {
        self.query_node
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    #[inline]
    pub fn has_node(&self, v: usize) -> bool {
        self.nodes[v]
    }

    #[inline]
    pub fn has_feature(&self, f: usize) -> bool {
        self.features[f]
    }

    pub fn node_flags(&self) -> &[bool] {
        &self.nodes
    }

    pub fn feature_flags(&self) -> &[bool] {
        &self.features
    }

    pub fn insert_node(&mut self, v: usize) {
        self.nodes[v] = true;
    }

    pub fn insert_feature(&mut self, f: usize) {
        self.features[f] = true;
    }

    pub fn selected_nodes(&self) -> Vec<usize> {
        flags_to_indices(&self.nodes)
    }

    pub fn selected_features(&self) -> Vec<usize> {
        flags_to_indices(&self.features)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.iter().filter(|&&b| b).count()
    }

    pub fn feature_count(&self) -> usize {
        self.features.iter().filter(|&&b| b).count()
    }

    #[inline]
    pub fn pins(&self, node: usize, feature: usize) -> bool {
        self.nodes[node] && self.features[feature]
    }

    /// The 0/1 mask matrix `M`.
    pub fn mask_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.nodes.len(), self.features.len());
        for (i, &sel) in self.nodes.iter().enumerate() {
            if sel {
                for (j, &fsel) in self.features.iter().enumerate() {
                    if fsel {
                        m.set(i, j, 1.0);
                    }
                }
            }
        }
        m
    }

    /// True when the two masks pin no common entry.
    pub fn is_disjoint_from(&self, other: &Explanation) -> bool {
        let share = |a: &[bool], b: &[bool]| a.iter().zip(b).any(|(x, y)| *x && *y);
        !(share(&self.nodes, &other.nodes) && share(&self.features, &other.features))
    }

    pub(crate) fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        if self.nodes.len() != rows || self.features.len() != cols {
            return Err(Error::Dimension(format!(
                "explanation covers {}x{}, features are {rows}x{cols}",
                self.nodes.len(),
                self.features.len()
            )));
        }
        Ok(())
    }
}

pub(crate) fn flags_to_indices(flags: &[bool]) -> Vec<usize> {
    flags
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect()
}

/// Non-negative importance scores over nodes and/or features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftMask {
    pub node_scores: Option<Vec<f64>>,
    pub feature_scores: Option<Vec<f64>>,
}

impl SoftMask {
    pub fn new(node_scores: Option<Vec<f64>>, feature_scores: Option<Vec<f64>>) -> Result<Self> {
        if node_scores.is_none() && feature_scores.is_none() {
            return Err(Error::InvalidParameter("soft mask with neither side".into()));
        }
        for side in [&node_scores, &feature_scores].into_iter().flatten() {
            if let Some(bad) = side.iter().find(|v| !(**v >= 0.0)) {
                return Err(Error::InvalidParameter(format!("negative or NaN mask score {bad}")));
            }
        }
        Ok(Self {
            node_scores,
            feature_scores,
        })
    }
}

/// A mask side as either binary selection or real-valued scores.
#[derive(Debug, Clone, Copy)]
pub enum MaskSide<'a> {
    Hard(&'a [bool]),
    Soft(&'a [f64]),
}

impl MaskSide<'_> {
    pub fn len(&self) -> usize {
        match self {
            MaskSide::Hard(v) => v.len(),
            MaskSide::Soft(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            MaskSide::Hard(v) => v.iter().map(|&b| f64::from(u8::from(b))).collect(),
            MaskSide::Soft(v) => v.to_vec(),
        }
    }
}
