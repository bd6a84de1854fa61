//! Shared fixture for the criterion benches.

use zorro_core::gnn::{train_gcn, TrainConfig};
use zorro_core::synth::{generate, SynthConfig, SynthDataset};
use zorro_core::Model;

pub struct Fixture {
    pub data: SynthDataset,
    pub model: Model,
}

/// Default synthetic benchmark with a two-layer GCN trained on it.
pub fn fixture() -> Fixture {
    let data = generate(&SynthConfig::default()).expect("synthetic dataset");
    let outcome = train_gcn(
        &data.graph,
        data.features.values(),
        &data.labels,
        &data.train_nodes,
        &data.test_nodes,
        &TrainConfig::gcn2(0),
    )
    .expect("training");
    Fixture {
        data,
        model: Model::Gcn(outcome.model),
    }
}
