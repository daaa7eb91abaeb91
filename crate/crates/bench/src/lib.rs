//! Inputs shared by the benchmarks.

use gnvp_core::chem::Molecule;
use gnvp_core::data::bundled_dataset;
use gnvp_core::flow::{FlowConfig, FlowModel};
use gnvp_core::graph::{dequantize, DequantizedGraph, GraphSpec};
use gnvp_core::numeric::SeededRng;

/// Default QM9-lite model with every parameter nudged off its initial value.
pub fn qm9_model(seed: u64) -> FlowModel {
    let spec = GraphSpec::qm9lite();
    let mut model = FlowModel::new(spec.clone(), FlowConfig::for_spec(&spec), seed);
    model.perturb(0.02, seed);
    model
}

/// The first `n` corpus graphs, dequantized.
pub fn qm9_batch(n: usize, seed: u64) -> Vec<DequantizedGraph> {
    let spec = GraphSpec::qm9lite();
    let mut rng = SeededRng::new(seed);
    bundled_dataset(&spec)
        .expect("bundled corpus")
        .expect("corpus parses")
        .graphs()
        .iter()
        .take(n)
        .map(|g| dequantize(g, 0.9, &mut rng).expect("valid scale"))
        .collect()
}

pub fn corpus_molecules(spec: &GraphSpec) -> Vec<Molecule> {
    bundled_dataset(spec).expect("bundled corpus").expect("corpus parses").molecules()
}
