//! Bundled SMILES-lite corpora.

use crate::chem::{parse_dataset, ChemError, Dataset, LoadMode};
use crate::graph::GraphSpec;

/// 256 molecules, at most 9 heavy atoms over C, N, O, F.
pub const QM9LITE: &str = include_str!("../data/qm9lite.smi");
/// 64 molecules, at most 38 heavy atoms over C, N, O, F, S, Cl.
pub const ZINCLITE: &str = include_str!("../data/zinclite.smi");

/// The corpus bundled for a named spec.
pub fn bundled_text(spec_name: &str) -> Option<&'static str> {
    match spec_name {
        "qm9lite" => Some(QM9LITE),
        "zinclite" => Some(ZINCLITE),
        _ => None,
    }
}

/// Parses the bundled corpus of `spec` (strict mode).
pub fn bundled_dataset(spec: &GraphSpec) -> Option<Result<Dataset, ChemError>> {
    bundled_text(&spec.name).map(|text| parse_dataset(text, spec, LoadMode::Strict))
}
