use zorro_core::io::{save_dataset, Dataset};
use zorro_core::synth::{generate, SynthConfig};

use crate::args::SynthGenArgs;
use crate::error::CliResult;
use crate::manifest::write_manifest;

pub fn run(a: &SynthGenArgs, argv: &[String]) -> CliResult<()> {
    let config = SynthConfig {
        base_nodes: a.base_nodes,
        attachment: a.attachment,
        houses: a.houses,
        perturbation_rate: a.perturbation_rate,
        bridge_fraction: a.bridge_fraction,
        train_fraction: a.train_fraction,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let synth = generate(&config)?;
    eprintln!(
        "generated {} nodes, {} edges, {} houses",
        synth.graph.num_nodes(),
        synth.graph.num_edges(),
        synth.houses.len()
    );
    let written = save_dataset(&a.out, &Dataset::from(&synth))?;
    let outputs: Vec<_> = written.into_iter().map(|p| (p, true)).collect();
    write_manifest(&a.out, "synth-gen", argv, &config, &outputs)
}
