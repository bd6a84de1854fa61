//! Reference explainers: empty, random, gradient saliency and
//! gradient-times-input.

use std::fmt;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explanation::{Explanation, SoftMask};
use crate::features::FeatureMatrix;
use crate::gnn::{Model, NodeClassifier};
use crate::graph::ComputationalGraph;
use crate::rng::{self, label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    Empty,
    Random { nodes: usize, features: usize, seed: u64 },
    Grad,
    GradInput,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::Empty => "empty",
            BaselineKind::Random { .. } => "random",
            BaselineKind::Grad => "grad",
            BaselineKind::GradInput => "grad-input",
        })
    }
}

/// Either a hard mask or importance scores, depending on the explainer.
#[derive(Debug, Clone, PartialEq)]
pub enum BaselineOutput {
    Hard(Explanation),
    Soft(SoftMask),
}

pub fn explain_baseline(
    kind: BaselineKind,
    model: &Model,
    cg: &ComputationalGraph,
    features: &FeatureMatrix,
) -> Result<BaselineOutput> {
    let (n, d) = (features.rows(), features.cols());
    if n != cg.num_nodes() {
        return Err(Error::Dimension(format!("{n} feature rows for {} nodes", cg.num_nodes())));
    }
    match kind {
        BaselineKind::Empty => Ok(BaselineOutput::Hard(Explanation::empty(cg.query_node(), n, d))),
        BaselineKind::Random {
            nodes,
            features: k_features,
            seed,
        } => {
            if nodes > n || k_features > d {
                return Err(Error::InvalidParameter(format!(
                    "random mask of {nodes} nodes and {k_features} features exceeds {n}x{d}"
                )));
            }
            let mut rng = rng::stream(seed, &[label::RANDOM_EXPLAINER, cg.query_node() as u64]);
            let chosen_nodes = sample(&mut rng, n, nodes);
            let chosen_features = sample(&mut rng, d, k_features);
            Explanation::from_sets(cg.query_node(), n, d, chosen_nodes, chosen_features).map(BaselineOutput::Hard)
        }
        BaselineKind::Grad | BaselineKind::GradInput => {
            let x = features.values();
            let class = model.predict_query(cg, x)?;
            let mut g = model.gradient(cg, x, class)?;
            if kind == BaselineKind::GradInput {
                g = g.hadamard(x);
            }
            let node_scores = (0..n).map(|i| g.row(i).iter().map(|v| v.abs()).sum()).collect();
            let mut feature_scores = vec![0.0; d];
            for i in 0..n {
                for (s, v) in feature_scores.iter_mut().zip(g.row(i)) {
                    *s += v.abs();
                }
            }
            SoftMask::new(Some(node_scores), Some(feature_scores)).map(BaselineOutput::Soft)
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::gnn::{Gcn, GcnArch, RuleSum};
    use crate::graph::Graph;
    use crate::matrix::Matrix;

    fn scores(out: BaselineOutput) -> (Vec<f64>, Vec<f64>) {
        match out {
            BaselineOutput::Soft(m) => (m.node_scores.unwrap(), m.feature_scores.unwrap()),
            BaselineOutput::Hard(_) => panic!("expected a soft mask"),
        }
    }

    fn instance(seed: u64) -> (Model, ComputationalGraph, FeatureMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Graph::new(5, [(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let cg = ComputationalGraph::extract(&g, 2, 2).unwrap();
        let gcn = Gcn::init(GcnArch::Plain, 3, 6, 3, 2, &mut rng).unwrap();
        let x = Matrix::from_vec(5, 3, (0..15).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let f = FeatureMatrix::new(x).restrict(&cg).unwrap();
        (Model::Gcn(gcn), cg, f)
    }

    #[test]
    fn scalar_chain_rule() {
        // one node, logits = W2 relu(W1 x) = (6, -6) for x = 2
        let gcn = Gcn::new(
            GcnArch::Plain,
            vec![Matrix::from_vec(1, 1, vec![3.0]).unwrap(), Matrix::from_vec(1, 2, vec![1.0, -1.0]).unwrap()],
            None,
        )
        .unwrap();
        let cg = ComputationalGraph::extract(&Graph::empty(1), 0, 2).unwrap();
        let f = FeatureMatrix::new(Matrix::from_vec(1, 1, vec![2.0]).unwrap());
        let m = Model::Gcn(gcn);
        assert_eq!(scores(explain_baseline(BaselineKind::Grad, &m, &cg, &f).unwrap()), (vec![3.0], vec![3.0]));
        assert_eq!(scores(explain_baseline(BaselineKind::GradInput, &m, &cg, &f).unwrap()), (vec![6.0], vec![6.0]));
    }

    #[test]
    fn scores_aggregate_absolute_gradient() {
        let (m, cg, f) = instance(4);
        let class = m.predict_query(&cg, f.values()).unwrap();
        let g = m.gradient(&cg, f.values(), class).unwrap();
        let (nodes, feats) = scores(explain_baseline(BaselineKind::Grad, &m, &cg, &f).unwrap());
        let total: f64 = g.as_slice().iter().map(|v| v.abs()).sum();
        assert!((nodes.iter().sum::<f64>() - total).abs() < 1e-12);
        assert!((feats.iter().sum::<f64>() - total).abs() < 1e-12);
        assert!((nodes[1] - g.row(1).iter().map(|v| v.abs()).sum::<f64>()).abs() < 1e-15);
        assert!(nodes.iter().chain(&feats).all(|&s| s >= 0.0));
    }

    #[test]
    fn zero_weights_and_zero_inputs_give_zero_masks() {
        let gcn = Gcn::new(GcnArch::Plain, vec![Matrix::zeros(3, 4), Matrix::zeros(4, 2)], None).unwrap();
        let (_, cg, f) = instance(1);
        let (nodes, feats) = scores(explain_baseline(BaselineKind::Grad, &Model::Gcn(gcn), &cg, &f).unwrap());
        assert!(nodes.iter().chain(&feats).all(|&s| s == 0.0));

        let (m, cg, f) = instance(2);
        let zeros = f.with_values(Matrix::zeros(f.rows(), f.cols())).unwrap();
        let (nodes, feats) = scores(explain_baseline(BaselineKind::GradInput, &m, &cg, &zeros).unwrap());
        assert!(nodes.iter().chain(&feats).all(|&s| s == 0.0));
    }

    #[test]
    fn random_masks_are_seeded_and_sized() {
        let (m, cg, f) = instance(3);
        let kind = BaselineKind::Random {
            nodes: 2,
            features: 1,
            seed: 9,
        };
        let a = explain_baseline(kind, &m, &cg, &f).unwrap();
        assert_eq!(a, explain_baseline(kind, &m, &cg, &f).unwrap());
        let BaselineOutput::Hard(e) = a else { panic!("random gives a hard mask") };
        assert_eq!((e.node_count(), e.feature_count()), (2, 1));
        let too_big = BaselineKind::Random {
            nodes: 99,
            features: 1,
            seed: 9,
        };
        assert!(explain_baseline(too_big, &m, &cg, &f).is_err());
    }

    #[test]
    fn empty_and_unsupported() {
        let (m, cg, f) = instance(5);
        let BaselineOutput::Hard(e) = explain_baseline(BaselineKind::Empty, &m, &cg, &f).unwrap() else {
            panic!("empty gives a hard mask")
        };
        assert_eq!((e.node_count(), e.feature_count()), (0, 0));
        let rule = Model::RuleSum(RuleSum::new(0.0, 2));
        assert!(matches!(explain_baseline(BaselineKind::Grad, &rule, &cg, &f), Err(Error::UnsupportedModel(_))));
    }
}
