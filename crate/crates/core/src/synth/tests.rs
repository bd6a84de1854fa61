use std::collections::HashSet;

use super::*;
use crate::gnn::{Gcn, GcnArch};

fn small() -> SynthConfig {
    SynthConfig {
        base_nodes: 60,
        attachment: 3,
        houses: 10,
        ..SynthConfig::default()
    }
}

#[test]
fn ba_edge_count_and_degrees() {
    let mut rng = rng::stream(1, &[]);
    let edges = barabasi_albert(50, 4, &mut rng);
    assert_eq!(edges.len(), 46 * 4);
    let g = Graph::new(50, edges).unwrap();
    assert_eq!(g.num_edges(), 46 * 4, "targets of one step are distinct");
    assert!((4..50).all(|v| g.degree(v) >= 4));
}

#[test]
fn houses_are_motifs_with_roles() {
    let config = SynthConfig {
        perturbation_rate: 0.0,
        ..small()
    };
    let d = generate(&config).unwrap();
    assert_eq!(d.houses.len(), 20);
    let mut seen = HashSet::new();
    for (h, house) in d.houses.iter().enumerate() {
        let [b0, b1, m0, m1, t] = *house;
        for (u, v) in [(b0, b1), (b0, m0), (b1, m1), (m0, m1), (m0, t), (m1, t)] {
            assert!(d.graph.has_edge(u, v));
        }
        let c = d.community_of(b0);
        assert_eq!([d.labels[b0], d.labels[b1], d.labels[m0], d.labels[m1], d.labels[t]], [4 * c + 1, 4 * c + 1, 4 * c + 2, 4 * c + 2, 4 * c + 3]);
        for &v in house {
            assert!(seen.insert(v), "houses share node {v}");
            assert_eq!(d.ground_truth(v), Some(house));
            assert_eq!(d.house_of[v], Some(h));
        }
        // exactly one edge leaves the house, into the base graph of its community
        let outside: Vec<usize> = house.iter().flat_map(|&v| d.graph.neighbors(v).iter().copied()).filter(|u| !house.contains(u)).collect();
        assert_eq!(outside.len(), 1);
        assert_eq!(d.labels[outside[0]], 4 * c);
    }
}

#[test]
fn label_counts() {
    let d = generate(&small()).unwrap();
    for c in 0..2 {
        let house_labelled = d.labels.iter().filter(|&&l| l / 4 == c && l % 4 != 0).count();
        assert_eq!(house_labelled, 5 * 10);
        assert_eq!(d.labels.iter().filter(|&&l| l == 4 * c).count(), 60);
    }
    assert_eq!(d.train_nodes.len() + d.test_nodes.len(), d.labels.len());
    assert_eq!(d.train_nodes.len(), (0.8 * small().num_nodes() as f64).round() as usize);
    assert!(d.house_nodes().len() == 100);
}

#[test]
fn no_houses_gives_two_classes() {
    let d = generate(&SynthConfig { houses: 0, ..small() }).unwrap();
    let classes: HashSet<usize> = d.labels.iter().copied().collect();
    assert_eq!(classes, HashSet::from([0, 4]));
    assert!(d.house_nodes().is_empty());
}

#[test]
fn generation_is_reproducible() {
    let a = generate(&small()).unwrap();
    let b = generate(&small()).unwrap();
    assert_eq!(a.graph, b.graph);
    assert_eq!(a.features.values(), b.features.values());
    assert_eq!((a.labels, a.train_nodes), (b.labels, b.train_nodes));
    let c = generate(&SynthConfig { seed: 1, ..small() }).unwrap();
    assert_ne!(a.graph, c.graph);
}

#[test]
fn raw_community_columns_have_opposite_means() {
    let config = small();
    let mut rng = rng::stream(3, &[]);
    let x = raw_features(&config, &mut rng).unwrap();
    let size = config.community_size();
    let tol = 3.0 * config.community_std / (size as f64).sqrt();
    for j in NOISE_FEATURES..NUM_FEATURES {
        for (c, expected) in [(0, -1.0), (1, 1.0)] {
            let mean = (c * size..(c + 1) * size).map(|v| x.get(v, j)).sum::<f64>() / size as f64;
            assert!((mean - expected).abs() < tol, "community {c} column {j}: {mean}");
        }
    }
}

#[test]
fn scaled_columns_have_unit_std_and_keep_sign() {
    let config = small();
    let d = generate(&config).unwrap();
    let size = config.community_size();
    for c in 0..2 {
        for j in 0..NUM_FEATURES {
            let col: Vec<f64> = (c * size..(c + 1) * size).map(|v| d.features.values().get(v, j)).collect();
            let m = col.iter().sum::<f64>() / size as f64;
            let sd = (col.iter().map(|a| (a - m).powi(2)).sum::<f64>() / size as f64).sqrt();
            assert!((sd - 1.0).abs() < 1e-12);
            if j >= NOISE_FEATURES {
                assert!(if c == 0 { m < -1.0 } else { m > 1.0 });
            }
        }
    }
}

#[test]
fn perturbation_touches_few_edges() {
    let base = generate(&SynthConfig { perturbation_rate: 0.0, ..small() }).unwrap();
    let rate = 0.02;
    let perturbed = generate(&SynthConfig { perturbation_rate: rate, ..small() }).unwrap();
    assert_eq!(base.graph.num_edges(), perturbed.graph.num_edges());
    let a: HashSet<_> = base.graph.edges().collect();
    let b: HashSet<_> = perturbed.graph.edges().collect();
    let size = small().community_size();
    let budget: usize = (0..2)
        .map(|c| {
            let r = c * size..(c + 1) * size;
            let e = a.iter().filter(|(u, v)| r.contains(u) && r.contains(v)).count();
            (rate * e as f64).ceil() as usize
        })
        .sum();
    assert!(budget > 0);
    assert!(a.difference(&b).count() <= budget);
    assert!(b.difference(&a).count() <= budget);
}

#[test]
fn bridges_connect_the_communities() {
    let d = generate(&small()).unwrap();
    let size = small().community_size();
    let cross = d.graph.edges().filter(|&(u, v)| (u < size) != (v < size)).count();
    assert_eq!(cross, (0.01 * small().num_nodes() as f64).round() as usize);
}

#[test]
fn invalid_configs() {
    for config in [
        SynthConfig { attachment: 60, ..small() },
        SynthConfig { attachment: 0, ..small() },
        SynthConfig { houses: 61, ..small() },
        SynthConfig { perturbation_rate: 1.5, ..small() },
        SynthConfig { train_fraction: 1.0, ..small() },
    ] {
        assert!(matches!(generate(&config), Err(Error::InvalidParameter(_))));
    }
}

#[test]
fn ground_truth_eval_perfect_and_empty() {
    let synth = generate(&small()).unwrap();
    let d = Dataset::from(&synth);
    let mut rng = rng::stream(0, &[]);
    let model = Model::Gcn(Gcn::init(GcnArch::Stacked, NUM_FEATURES, 8, NUM_CLASSES, 3, &mut rng).unwrap());
    let snapshots = vec![(0, model.clone()), (1, model)];
    let nodes: Vec<usize> = synth.house_nodes().into_iter().take(6).collect();
    let perfect = |_: &Model, cg: &ComputationalGraph, _: &FeatureMatrix| -> Result<Vec<bool>> {
        let truth = synth.ground_truth(cg.query_node()).unwrap();
        Ok(cg.local_nodes().iter().map(|v| truth.contains(v)).collect())
    };
    let report = run_ground_truth_eval(&d, &snapshots, &nodes, &perfect).unwrap();
    assert!(report.rows.iter().all(|r| r.precision == 1.0 && r.accuracy == 1.0));
    // identical snapshots: both sequences constant
    assert_eq!(report.faithfulness, None);

    let empty = |m: &Model, cg: &ComputationalGraph, x: &FeatureMatrix| explain_nodes(&GtExplainer::Baseline(BaselineKind::Empty), m, cg, x);
    let report = run_ground_truth_eval(&d, &snapshots, &nodes, &empty).unwrap();
    assert!(report.rows.iter().all(|r| r.precision == 0.0 && r.accuracy < 1.0));

    let grad = |m: &Model, cg: &ComputationalGraph, x: &FeatureMatrix| explain_nodes(&GtExplainer::Baseline(BaselineKind::Grad), m, cg, x);
    let cg = ComputationalGraph::extract(&d.graph, nodes[0], 3).unwrap();
    let x = d.features.restrict(&cg).unwrap();
    assert_eq!(grad(&snapshots[0].1, &cg, &x).unwrap().iter().filter(|b| **b).count(), HOUSE_SIZE);

    assert!(run_ground_truth_eval(&d, &snapshots, &[0], &perfect).is_err(), "base nodes have no ground truth");
}
