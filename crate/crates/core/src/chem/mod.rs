//! SMILES-lite text, validity, canonical keys and dataset ingestion.

mod canon;
mod convert;
mod dataset;
mod element;
mod molecule;
mod smiles;
mod valence;
mod writer;

pub use canon::{canonical_ranks, canonical_smiles};
pub use convert::{from_graph, to_graph};
pub use dataset::{load_dataset, parse_dataset, Dataset, DatasetEntry, LoadMode};
pub use element::{Element, UnknownElement};
pub use molecule::{Bond, Molecule};
pub use smiles::{parse_smiles_lite, SmilesError, SmilesErrorKind};
pub use valence::{check_validity, is_valid, ValenceTable, ValenceViolation, ValidityReport};
pub use writer::{write_smiles, SmilesWriter};

/// Writes the canonical string of a valid molecule.
pub fn write_smiles_canonical(m: &Molecule, table: &ValenceTable) -> Result<String, ChemError> {
    let report = check_validity(m, table)?;
    if !report.valid {
        return Err(ChemError::InvalidMolecule(if report.empty {
            "molecule has no atoms".into()
        } else {
            format!("{} valence violation(s)", report.violations.len())
        }));
    }
    Ok(canonical_smiles(m))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChemError {
    #[error(transparent)]
    Smiles(#[from] SmilesError),
    #[error("invalid molecule: {0}")]
    InvalidMolecule(String),
    #[error("no valence entry for {0}")]
    MissingValence(Element),
    #[error("molecule has {atoms} atoms, spec allows {max}")]
    TooLarge { atoms: usize, max: usize },
    #[error("{0} is not in the {1} vocabulary")]
    NotInVocabulary(Element, String),
    #[error("line {line}: {message}")]
    DatasetLine { line: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}
