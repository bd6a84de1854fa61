//! Perturbation of unselected input and RDT-Fidelity estimation.
//!
//! `Y_S = X ⊙ M + Z ⊙ (1 − M)`, where every entry of `Z` is drawn
//! independently and uniformly from its column's global value pool.
//! RDT-Fidelity is the probability that the model's prediction for the query
//! node is unchanged on `Y_S`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explanation::Explanation;
use crate::features::FeatureMatrix;
use crate::gnn::NodeClassifier;
use crate::graph::ComputationalGraph;
use crate::matrix::Matrix;
use crate::rng;

pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub value: f64,
    pub samples: usize,
    pub std_error: f64,
}

impl FidelityEstimate {
    pub fn from_counts(correct: usize, samples: usize) -> Self {
        let value = correct as f64 / samples as f64;
        Self {
            value,
            samples,
            std_error: binomial_std_error(value, samples),
        }
    }
}

pub fn binomial_std_error(p: f64, samples: usize) -> f64 {
    (p * (1.0 - p) / samples as f64).sqrt()
}

/// Stability of an explanation whose fidelity is `p`: `1 / (1 + p(1 − p))`,
/// i.e. one over one plus the variance of the Bernoulli validity score.
pub fn stability(p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "fidelity {p} outside [0, 1]");
    1.0 / (1.0 + p * (1.0 - p))
}

/// Draws a full noise matrix and then restores the pinned entries.
///
/// All `rows × cols` entries are drawn in row-major order regardless of the
/// mask, so two masks perturbed with identically seeded generators see the
/// same noise on every entry they both leave free.
pub fn perturb(features: &FeatureMatrix, explanation: &Explanation, rng: &mut impl Rng) -> Result<Matrix> {
    explanation.check_shape(features.rows(), features.cols())?;
    check_pools(features)?;
    let mut out = Matrix::zeros(features.rows(), features.cols());
    perturb_into(features, explanation, rng, &mut out);
    Ok(out)
}

fn check_pools(features: &FeatureMatrix) -> Result<()> {
    match features.pools().iter().position(Vec::is_empty) {
        Some(j) => Err(Error::EmptyPool(j)),
        None => Ok(()),
    }
}

fn draw_noise_into(features: &FeatureMatrix, rng: &mut impl Rng, out: &mut Matrix) {
    let cols = features.cols();
    let pools = features.pools();
    for (k, v) in out.as_mut_slice().iter_mut().enumerate() {
        let pool = &pools[k % cols];
        *v = pool[rng.random_range(0..pool.len())];
    }
}

fn pin_into(features: &FeatureMatrix, explanation: &Explanation, out: &mut Matrix) {
    let selected_features = explanation.selected_features();
    for (i, &sel) in explanation.node_flags().iter().enumerate() {
        if sel {
            let src = features.values().row(i);
            let dst = out.row_mut(i);
            for &j in &selected_features {
                dst[j] = src[j];
            }
        }
    }
}

fn perturb_into(features: &FeatureMatrix, explanation: &Explanation, rng: &mut impl Rng, out: &mut Matrix) {
    draw_noise_into(features, rng, out);
    pin_into(features, explanation, out);
}

/// Identifies a family of per-sample noise streams: sample `s` uses the
/// stream `(key, s)`, so estimates do not depend on evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSeed(u64);

impl NoiseSeed {
    pub fn new(seed: u64, path: &[u64]) -> Self {
        Self(rng::derive_key(seed, path))
    }

    pub fn sample_rng(&self, sample: usize) -> ChaCha8Rng {
        rng::stream(self.0, &[sample as u64])
    }
}

/// Noise for one batch of paired evaluations: either materialised once or
/// regenerated from the seed on every use (identical values either way).
pub(crate) struct NoiseBatch {
    seed: NoiseSeed,
    samples: usize,
    cached: Option<Vec<Matrix>>,
}

/// Largest number of matrix entries kept in memory for a noise batch.
const NOISE_CACHE_ENTRIES: usize = 1 << 23;

/// Computes RDT-Fidelity of masks on one computational graph, caching the
/// reference prediction on the unperturbed features.
pub struct FidelityEvaluator<'a, M: NodeClassifier + ?Sized> {
    model: &'a M,
    cg: &'a ComputationalGraph,
    features: &'a FeatureMatrix,
    reference_class: usize,
}

impl<'a, M: NodeClassifier + ?Sized> FidelityEvaluator<'a, M> {
    pub fn new(model: &'a M, cg: &'a ComputationalGraph, features: &'a FeatureMatrix) -> Result<Self> {
        if features.rows() != cg.num_nodes() {
            return Err(Error::Dimension(format!(
                "{} feature rows for a computational graph of {} nodes",
                features.rows(),
                cg.num_nodes()
            )));
        }
        check_pools(features)?;
        let reference_class = model.predict_query(cg, features.values())?;
        Ok(Self {
            model,
            cg,
            features,
            reference_class,
        })
    }

    pub fn reference_class(&self) -> usize {
        self.reference_class
    }

    pub fn cg(&self) -> &ComputationalGraph {
        self.cg
    }

    pub fn features(&self) -> &FeatureMatrix {
        self.features
    }

    pub fn model(&self) -> &M {
        self.model
    }

    /// Monte-Carlo estimate with `samples` draws from the `noise` family.
    pub fn estimate(&self, explanation: &Explanation, samples: usize, noise: NoiseSeed) -> Result<FidelityEstimate> {
        let batch = self.noise_batch(noise, samples, false);
        Ok(FidelityEstimate::from_counts(self.count_matches(explanation, &batch)?, samples))
    }

    pub(crate) fn noise_batch(&self, seed: NoiseSeed, samples: usize, materialise: bool) -> NoiseBatch {
        let entries = samples * self.features.rows() * self.features.cols();
        let cached = (materialise && entries <= NOISE_CACHE_ENTRIES).then(|| {
            (0..samples)
                .map(|s| {
                    let mut m = Matrix::zeros(self.features.rows(), self.features.cols());
                    draw_noise_into(self.features, &mut seed.sample_rng(s), &mut m);
                    m
                })
                .collect()
        });
        NoiseBatch { seed, samples, cached }
    }

    /// Number of noise samples in `batch` on which the prediction is kept.
    pub(crate) fn count_matches(&self, explanation: &Explanation, batch: &NoiseBatch) -> Result<usize> {
        if batch.samples == 0 {
            return Err(Error::InvalidParameter("fidelity needs at least one sample".into()));
        }
        explanation.check_shape(self.features.rows(), self.features.cols())?;
        let mut buffer = Matrix::zeros(self.features.rows(), self.features.cols());
        let mut correct = 0;
        for s in 0..batch.samples {
            match &batch.cached {
                Some(noise) => {
                    buffer.as_mut_slice().copy_from_slice(noise[s].as_slice());
                    pin_into(self.features, explanation, &mut buffer);
                }
                None => perturb_into(self.features, explanation, &mut batch.seed.sample_rng(s), &mut buffer),
            }
            if self.model.predict_query(self.cg, &buffer)? == self.reference_class {
                correct += 1;
            }
        }
        Ok(correct)
    }

    /// Exact fidelity by enumerating every assignment of the unpinned
    /// entries, each entry ranging uniformly over `domains[column]`.
    pub fn exact(&self, explanation: &Explanation, domains: &[Vec<f64>], budget: u64) -> Result<f64> {
        let (rows, cols) = (self.features.rows(), self.features.cols());
        explanation.check_shape(rows, cols)?;
        if domains.len() != cols {
            return Err(Error::Dimension(format!("{} domains for {cols} columns", domains.len())));
        }
        if let Some(j) = domains.iter().position(Vec::is_empty) {
            return Err(Error::EmptyPool(j));
        }
        let free: Vec<(usize, usize)> = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .filter(|&(i, j)| !explanation.pins(i, j))
            .collect();
        let needed: f64 = free.iter().map(|&(_, j)| domains[j].len() as f64).product();
        if needed > budget as f64 {
            return Err(Error::EnumerationBudget { needed, budget });
        }
        let mut y = self.features.values().clone();
        let mut digits = vec![0usize; free.len()];
        for (&(i, j), _) in free.iter().zip(&digits) {
            y.set(i, j, domains[j][0]);
        }
        let mut kept = 0u64;
        let mut total = 0u64;
        loop {
            total += 1;
            if self.model.predict_query(self.cg, &y)? == self.reference_class {
                kept += 1;
            }
            // odometer increment
            let mut pos = 0;
            loop {
                if pos == free.len() {
                    return Ok(kept as f64 / total as f64);
                }
                let (i, j) = free[pos];
                digits[pos] += 1;
                if digits[pos] < domains[j].len() {
                    y.set(i, j, domains[j][digits[pos]]);
                    break;
                }
                digits[pos] = 0;
                y.set(i, j, domains[j][0]);
                pos += 1;
            }
        }
    }
}

/// Monte-Carlo RDT-Fidelity of `explanation`.
pub fn rdt_fidelity<M: NodeClassifier + ?Sized>(
    model: &M,
    cg: &ComputationalGraph,
    features: &FeatureMatrix,
    explanation: &Explanation,
    samples: usize,
    noise: NoiseSeed,
) -> Result<FidelityEstimate> {
    FidelityEvaluator::new(model, cg, features)?.estimate(explanation, samples, noise)
}

/// Exact RDT-Fidelity by full enumeration (test oracle for small instances).
pub fn exact_fidelity<M: NodeClassifier + ?Sized>(
    model: &M,
    cg: &ComputationalGraph,
    features: &FeatureMatrix,
    explanation: &Explanation,
    domains: &[Vec<f64>],
) -> Result<f64> {
    FidelityEvaluator::new(model, cg, features)?.exact(explanation, domains, DEFAULT_ENUMERATION_BUDGET)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::gnn::{Gcn, GcnArch, Model, RuleSum};
    use crate::graph::Graph;

    fn toy() -> (Model, ComputationalGraph, FeatureMatrix) {
        let g = Graph::new(4, [(0, 1), (0, 2), (2, 3)]).unwrap();
        let cg = ComputationalGraph::extract(&g, 0, 2).unwrap();
        let x = Matrix::from_vec(4, 1, vec![3.0, -1.0, 2.0, 1.0]).unwrap();
        let domain = vec![(-2..=3).map(f64::from).collect::<Vec<_>>()];
        let f = FeatureMatrix::with_pools(x, domain).unwrap();
        (Model::RuleSum(RuleSum::new(0.0, 2)), cg, f)
    }

    #[test]
    fn full_mask_leaves_input_untouched() {
        let (_, _, f) = toy();
        let full = Explanation::full(0, 4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(&perturb(&f, &full, &mut rng).unwrap(), f.values());
    }

    #[test]
    fn empty_mask_with_zero_pools_gives_zeros() {
        let x = Matrix::filled(3, 2, 7.0);
        let f = FeatureMatrix::with_pools(x, vec![vec![0.0], vec![0.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = perturb(&f, &Explanation::empty(0, 3, 2), &mut rng).unwrap();
        assert_eq!(y.max_abs(), 0.0);
    }

    #[test]
    fn toy_perturbation_pins_selected_nodes() {
        let (_, _, f) = toy();
        let e = Explanation::from_sets(0, 4, 1, [0, 2], [0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let y = perturb(&f, &e, &mut rng).unwrap();
            assert_eq!((y.get(0, 0), y.get(2, 0)), (3.0, 2.0));
            for i in [1, 3] {
                let v = y.get(i, 0);
                assert!((-2.0..=3.0).contains(&v) && v.fract() == 0.0);
            }
        }
    }

    #[test]
    fn shape_mismatch_and_empty_pool() {
        let (_, _, f) = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(perturb(&f, &Explanation::empty(0, 3, 1), &mut rng).is_err());
        let bad = FeatureMatrix::new(Matrix::zeros(0, 1));
        let e = Explanation::empty(0, 0, 1);
        assert!(matches!(perturb(&bad, &e, &mut rng), Err(Error::EmptyPool(0))));
    }

    #[test]
    fn full_mask_fidelity_is_one() {
        let (m, cg, f) = toy();
        let est = rdt_fidelity(&m, &cg, &f, &Explanation::full(0, 4, 1), 37, NoiseSeed::new(1, &[])).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.std_error, 0.0);
        assert_eq!(est.samples, 37);
    }

    #[test]
    fn all_nodes_single_feature_is_one() {
        let (m, cg, f) = toy();
        let e = Explanation::from_sets(0, 4, 1, 0..4, [0]).unwrap();
        assert_eq!(rdt_fidelity(&m, &cg, &f, &e, 100, NoiseSeed::new(2, &[])).unwrap().value, 1.0);
        assert_eq!(exact_fidelity(&m, &cg, &f, &e, f.pools()).unwrap(), 1.0);
    }

    #[test]
    fn exact_oracle_on_toy_masks() {
        let (m, cg, f) = toy();
        // brute force over the free entries, written independently
        let domain: Vec<f64> = (-2..=3).map(f64::from).collect();
        let fixed = [3.0, -1.0, 2.0, 1.0];
        let brute = |pinned: &[usize]| {
            let free: Vec<usize> = (0..4).filter(|i| !pinned.contains(i)).collect();
            let mut kept = 0;
            let mut total = 0;
            let combos = domain.len().pow(free.len() as u32);
            for mut code in 0..combos {
                let mut sum: f64 = pinned.iter().map(|&i| fixed[i]).sum();
                for _ in &free {
                    sum += domain[code % domain.len()];
                    code /= domain.len();
                }
                total += 1;
                kept += usize::from(sum >= 0.0);
            }
            kept as f64 / total as f64
        };
        for pinned in [vec![], vec![0], vec![0, 2], vec![1], vec![1, 3], vec![0, 1, 2]] {
            let e = Explanation::from_sets(0, 4, 1, pinned.iter().copied(), [0]).unwrap();
            let exact = exact_fidelity(&m, &cg, &f, &e, f.pools()).unwrap();
            assert_eq!(exact, brute(&pinned), "pinned {pinned:?}");
        }
        // nodes without their feature pin nothing
        let no_features = Explanation::from_sets(0, 4, 1, [0, 2], []).unwrap();
        assert_eq!(
            exact_fidelity(&m, &cg, &f, &no_features, f.pools()).unwrap(),
            brute(&[])
        );
    }

    #[test]
    fn constant_model_has_fidelity_one_everywhere() {
        let gcn = Gcn::new(GcnArch::Plain, vec![Matrix::zeros(2, 3), Matrix::zeros(3, 3)], None).unwrap();
        let model = Model::Gcn(gcn);
        let g = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        let cg = ComputationalGraph::extract(&g, 1, 2).unwrap();
        let f = FeatureMatrix::with_pools(Matrix::zeros(3, 2), vec![vec![0.0, 1.0], vec![-1.0, 2.0]]).unwrap();
        let e = Explanation::empty(1, 3, 2);
        assert_eq!(exact_fidelity(&model, &cg, &f, &e, f.pools()).unwrap(), 1.0);
    }

    #[test]
    fn enumeration_budget_is_enforced() {
        let (m, cg, f) = toy();
        let ev = FidelityEvaluator::new(&m, &cg, &f).unwrap();
        let err = ev.exact(&Explanation::empty(0, 4, 1), f.pools(), 100).unwrap_err();
        assert!(matches!(err, Error::EnumerationBudget { budget: 100, .. }));
    }

    #[test]
    fn cached_and_streamed_noise_agree() {
        let (m, cg, f) = toy();
        let ev = FidelityEvaluator::new(&m, &cg, &f).unwrap();
        let seed = NoiseSeed::new(5, &[1, 2]);
        for pinned in [vec![], vec![0], vec![1, 3]] {
            let e = Explanation::from_sets(0, 4, 1, pinned, [0]).unwrap();
            let a = ev.count_matches(&e, &ev.noise_batch(seed, 200, true)).unwrap();
            let b = ev.count_matches(&e, &ev.noise_batch(seed, 200, false)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn stability_formula() {
        assert_eq!(stability(1.0), 1.0);
        assert_eq!(stability(0.0), 1.0);
        assert!((stability(0.5) - 0.8).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn stability_is_at_least_point_eight(p in 0.0f64..=1.0) {
            let s = stability(p);
            prop_assert!((0.8 - 1e-15..=1.0).contains(&s));
            prop_assert!(s >= stability(0.5));
        }

        #[test]
        fn perturb_never_touches_pinned_entries(seed in any::<u64>(), nodes in proptest::collection::vec(any::<bool>(), 5), feats in proptest::collection::vec(any::<bool>(), 3)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..15).map(|_| rng.random_range(-5.0..5.0)).collect();
            let f = FeatureMatrix::new(Matrix::from_vec(5, 3, data).unwrap());
            let e = Explanation::from_sets(0, 5, 3,
                nodes.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i),
                feats.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)).unwrap();
            let y = perturb(&f, &e, &mut rng).unwrap();
            for i in 0..5 {
                for j in 0..3 {
                    if e.pins(i, j) {
                        prop_assert_eq!(y.get(i, j).to_bits(), f.values().get(i, j).to_bits());
                    } else {
                        prop_assert!(f.pool(j).contains(&y.get(i, j)));
                    }
                }
            }
        }

        #[test]
        fn estimates_are_seed_deterministic(seed in any::<u64>()) {
            let (m, cg, f) = toy();
            let e = Explanation::from_sets(0, 4, 1, [0], [0]).unwrap();
            let a = rdt_fidelity(&m, &cg, &f, &e, 50, NoiseSeed::new(seed, &[])).unwrap();
            let b = rdt_fidelity(&m, &cg, &f, &e, 50, NoiseSeed::new(seed, &[])).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=1.0).contains(&a.value));
        }
    }
}
