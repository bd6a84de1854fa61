use proptest::prelude::*;

use super::*;
use crate::gnn::{Model, RuleSum};
use crate::graph::Graph;

fn toy() -> (Model, ComputationalGraph, FeatureMatrix) {
    let g = Graph::new(4, [(0, 1), (0, 2), (2, 3)]).unwrap();
    let cg = ComputationalGraph::extract(&g, 0, 2).unwrap();
    let x = Matrix::from_vec(4, 1, vec![3.0, -1.0, 2.0, 1.0]).unwrap();
    let f = FeatureMatrix::with_pools(x, vec![(-2..=3).map(f64::from).collect()]).unwrap();
    (Model::RuleSum(RuleSum::new(0.0, 2)), cg, f)
}

#[test]
fn toy_validity() {
    let (m, cg, f) = toy();
    let e = Explanation::from_sets(0, 4, 1, [0, 2], [0]).unwrap();
    assert_eq!(validity(&m, &cg, &f, &e, 0.0).unwrap(), 1);
    assert_eq!(validity(&m, &cg, &f, &Explanation::empty(0, 4, 1), 0.0).unwrap(), 1);
    assert_eq!(validity(&m, &cg, &f, &Explanation::full(0, 4, 1), 0.0).unwrap(), 1);
    // a baseline of -1 flips the empty explanation: sum -4 < 0
    assert_eq!(validity(&m, &cg, &f, &Explanation::empty(0, 4, 1), -1.0).unwrap(), 0);
}

#[test]
fn toy_fidelity_variants() {
    let (m, cg, f) = toy();
    let e = Explanation::from_sets(0, 4, 1, [0, 2], [0]).unwrap();
    let v = fidelity_variants(&m, &cg, &f, &e, 0.0).unwrap();
    // -1 + 1 = 0 keeps class 1
    assert_eq!(v.plus_acc, 0.0);
    assert_eq!(v.minus_acc, 0.0);
    let full = fidelity_variants(&m, &cg, &f, &Explanation::full(0, 4, 1), 0.0).unwrap();
    assert_eq!((full.minus_acc, full.minus_prob), (0.0, 0.0));
    let empty = fidelity_variants(&m, &cg, &f, &Explanation::empty(0, 4, 1), 0.0).unwrap();
    assert_eq!((empty.plus_acc, empty.plus_prob), (0.0, 0.0));
    // removing v1 and v3 with baseline -5 flips the rule: -5 - 1 - 5 + 1 < 0
    let flipped = fidelity_variants(&m, &cg, &f, &e, -5.0).unwrap();
    assert_eq!((flipped.plus_acc, flipped.plus_prob), (1.0, 1.0));
}

#[test]
fn minus_acc_complements_validity() {
    let (m, cg, f) = toy();
    for nodes in [vec![], vec![1], vec![1, 3], vec![0, 2], vec![3]] {
        let e = Explanation::from_sets(0, 4, 1, nodes, [0]).unwrap();
        for baseline in [-2.0, 0.0, 1.0] {
            let v = fidelity_variants(&m, &cg, &f, &e, baseline).unwrap();
            let valid = validity(&m, &cg, &f, &e, baseline).unwrap();
            assert_eq!(v.minus_acc + f64::from(valid), 1.0);
        }
    }
}

#[test]
fn entropy_values() {
    assert!((sparsity_entropy(MaskSide::Soft(&vec![0.3; 1433])).unwrap() - 1433f64.ln()).abs() < 1e-12);
    assert_eq!(sparsity_entropy(MaskSide::Hard(&[false, true, false])).unwrap(), 0.0);
    assert!((sparsity_entropy(MaskSide::Hard(&[true, false, true])).unwrap() - 2f64.ln()).abs() < 1e-15);
    let zero = sparsity_entropy(MaskSide::Soft(&[0.0, 0.0])).unwrap();
    assert_eq!(zero.to_bits(), 0f64.to_bits());
    assert!(sparsity_entropy(MaskSide::Soft(&[-1.0, 2.0])).is_err());
}

#[test]
fn ground_truth_counts() {
    let mut gt = vec![false; 105];
    gt[..5].iter_mut().for_each(|g| *g = true);
    let mut sel = vec![false; 105];
    for i in [0, 1, 2, 3, 50] {
        sel[i] = true;
    }
    let s = ground_truth_scores(&sel, &gt).unwrap();
    assert_eq!(s.precision, 0.8);
    assert_eq!(s.accuracy, 103.0 / 105.0);
    let empty = ground_truth_scores(&[false; 105], &gt).unwrap();
    assert_eq!(empty.precision, 0.0);
    assert_eq!(empty.accuracy, 100.0 / 105.0);
    assert_eq!(ground_truth_scores(&gt, &gt).unwrap(), GroundTruthScores { precision: 1.0, accuracy: 1.0 });
}

/// Tau-b straight from its definition over all pairs, using signs.
fn tau_b_oracle(x: &[f64], y: &[f64]) -> f64 {
    let sgn = |v: f64| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
    let (mut num, mut ax, mut ay) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..x.len() {
        for j in 0..x.len() {
            let a = sgn(x[i] - x[j]);
            let b = sgn(y[i] - y[j]);
            num += a * b;
            ax += a * a;
            ay += b * b;
        }
    }
    num / (ax * ay).sqrt()
}

#[test]
fn kendall_basics() {
    let x = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(kendall_tau_b(&x, &x).unwrap(), 1.0);
    assert_eq!(kendall_tau_b(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
    assert!(matches!(kendall_tau_b(&x, &[1.0; 4]), Err(Error::Undefined(_))));
    assert!(kendall_tau_b(&x, &[1.0]).is_err());
    let p = [0.0, 0.92, 0.88, 0.93, 0.94, 0.94];
    let a = [0.22, 0.45, 0.69, 0.75, 0.80, 0.84];
    assert!((kendall_tau_b(&p, &a).unwrap() - tau_b_oracle(&p, &a)).abs() < 1e-12);
}

#[test]
fn homophily_counts() {
    let labels = [0, 0, 1, 0, 1];
    let e = Explanation::from_sets(7, 5, 1, [0, 1, 2, 3, 4], []).unwrap();
    assert_eq!(homophily(&e, 0, &labels).unwrap(), Some(0.5));
    let only_query = Explanation::from_sets(7, 5, 1, [0], []).unwrap();
    assert_eq!(homophily(&only_query, 0, &labels).unwrap(), None);
    let same = Explanation::from_sets(7, 5, 1, [1, 3], []).unwrap();
    assert_eq!(homophily(&same, 0, &labels).unwrap(), Some(1.0));
    assert_eq!(homophily(&same, 2, &labels).unwrap(), Some(0.0));
}

#[test]
fn hard_transforms() {
    let uniform = vec![1.0; 10];
    assert_eq!(HardTransform::TopFraction(0.5).apply(&uniform).unwrap().iter().filter(|b| **b).count(), 5);
    // ties keep the lowest indices
    assert_eq!(&HardTransform::TopFraction(0.2).apply(&uniform).unwrap()[..3], &[true, true, false]);
    assert_eq!(HardTransform::TopFraction(0.25).apply(&[0.1, 0.9, 0.5]).unwrap(), vec![false, true, false]);
    // min-max of (0.9, 0.5, 0.0089, 0.0) gives (1, 0.555, 0.0099, 0)
    let nt = HardTransform::NormalizeThreshold(0.01).apply(&[0.9, 0.5, 0.0089, 0.0]).unwrap();
    assert_eq!(nt, vec![true, true, false, false]);
    assert_eq!(HardTransform::NormalizeThreshold(0.01).apply(&[2.0; 3]).unwrap(), vec![true; 3]);
    assert!(HardTransform::TopFraction(0.0).apply(&uniform).is_err());
    assert_eq!("S-0.5".parse::<HardTransform>().unwrap(), HardTransform::TopFraction(0.5));
    assert_eq!("S-0.7".parse::<HardTransform>().unwrap(), HardTransform::TopFraction(0.7));
    assert_eq!("NT".parse::<HardTransform>().unwrap(), HardTransform::NormalizeThreshold(0.01));
    assert_eq!("top:0.3".parse::<HardTransform>().unwrap(), HardTransform::TopFraction(0.3));
    assert!("top:2".parse::<HardTransform>().is_err());
    assert!("median".parse::<HardTransform>().is_err());
}

#[test]
fn soft_to_hard_fills_missing_side() {
    let mask = SoftMask::new(Some(vec![0.0, 3.0, 1.0, 2.0]), None).unwrap();
    let e = soft_to_hard(&mask, 9, 4, 2, HardTransform::TopFraction(0.5)).unwrap();
    assert_eq!(e.selected_nodes(), vec![1, 3]);
    assert_eq!(e.selected_features(), vec![0, 1]);
    assert!(soft_to_hard(&mask, 9, 5, 2, HardTransform::TopFraction(0.5)).is_err());
}

#[test]
fn edge_to_node_scores() {
    assert_eq!(edge_mask_to_node_mask(2, &[(0, 1)], &[0.5]).unwrap(), vec![0.25, 0.25]);
    assert_eq!(edge_mask_to_node_mask(3, &[], &[]).unwrap(), vec![0.0; 3]);
    assert_eq!(edge_mask_to_node_mask(3, &[(0, 1), (1, 2), (0, 2)], &[1.0; 3]).unwrap(), vec![1.0; 3]);
    assert!(edge_mask_to_node_mask(2, &[(0, 2)], &[1.0]).is_err());
}

#[test]
fn record_csv_row_matches_header() {
    let r = MetricRecord {
        node: 3,
        validity: 1,
        node_sparsity: 0.5,
        feature_sparsity: 1.0,
        rdt_fidelity: 0.9,
        stability: stability_of(0.9),
        fidelity_plus_acc: None,
        fidelity_minus_acc: Some(0.0),
        fidelity_plus_prob: None,
        fidelity_minus_prob: None,
        precision: Some(1.0),
        accuracy: None,
    };
    let row = r.to_csv_row();
    assert_eq!(row.split(',').count(), MetricRecord::CSV_HEADER.split(',').count());
    assert!(row.starts_with("3,1,5.0000000000000000e-1,1.0000000000000000e0,9.0000000000000002e-1,"));
    assert!(row.ends_with(",,0.0000000000000000e0,,,1.0000000000000000e0,"));
    let summary = summarize(&[r.clone(), MetricRecord { validity: 0, precision: None, ..r }]);
    assert_eq!(summary[0], ("validity", Some(0.5)));
    assert_eq!(summary[9], ("precision", Some(1.0)));
    assert_eq!(summary[5], ("fidelity_plus_acc", None));
}

fn stability_of(p: f64) -> f64 {
    crate::fidelity::stability(p)
}

proptest! {
    #[test]
    fn entropy_bounded_by_log_size(v in proptest::collection::vec(0.0f64..10.0, 1..50)) {
        let h = sparsity_entropy(MaskSide::Soft(&v)).unwrap();
        prop_assert!(h >= 0.0 && h <= (v.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn tau_reverses_sign(v in proptest::collection::hash_set(-1000i32..1000, 2..12)) {
        let x: Vec<f64> = v.iter().map(|&a| f64::from(a)).collect();
        let y: Vec<f64> = (0..x.len()).map(|i| i as f64).collect();
        let rev: Vec<f64> = y.iter().rev().copied().collect();
        let t = kendall_tau_b(&x, &y).unwrap();
        prop_assert!((t + kendall_tau_b(&x, &rev).unwrap()).abs() < 1e-12);
        prop_assert!((t - tau_b_oracle(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn tau_with_ties_matches_oracle(x in proptest::collection::vec(0u8..4, 2..10), y in proptest::collection::vec(0u8..4, 10)) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let y: Vec<f64> = y[..x.len()].iter().map(|&b| f64::from(b)).collect();
        match kendall_tau_b(&x, &y) {
            Ok(t) => prop_assert!((t - tau_b_oracle(&x, &y)).abs() < 1e-12),
            Err(e) => prop_assert!(matches!(e, Error::Undefined(_))),
        }
    }

    #[test]
    fn normalize_threshold_is_affine_invariant(v in proptest::collection::vec(0.0f64..1.0, 1..30), a in 0.1f64..10.0, b in 0.0f64..5.0) {
        let t = HardTransform::NormalizeThreshold(0.3);
        let scaled: Vec<f64> = v.iter().map(|x| a * x + b).collect();
        let lhs = t.apply(&v).unwrap();
        let rhs = t.apply(&scaled).unwrap();
        // allow disagreement only for entries sitting on the threshold up to rounding
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for i in 0..v.len() {
            if hi > lo && ((v[i] - lo) / (hi - lo) - 0.3).abs() > 1e-9 {
                prop_assert_eq!(lhs[i], rhs[i]);
            }
        }
    }

    #[test]
    fn top_fraction_one_keeps_all(v in proptest::collection::vec(0.0f64..1.0, 0..30)) {
        prop_assert!(HardTransform::TopFraction(1.0).apply(&v).unwrap().iter().all(|b| *b));
    }
}
