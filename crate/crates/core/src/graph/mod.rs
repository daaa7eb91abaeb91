//! Discrete and dequantized graph encodings.

mod dequant;
mod discretize;
mod molecular;
mod permute;
mod spec;

pub use dequant::{
    dequantize, dequantize_midpoint, requantize, requantize_tensors, DequantizedGraph,
    DEFAULT_DEQUANT_SCALE,
};
pub use discretize::{discretize_adjacency, discretize_argmax, discretize_tensors, discretize_with_bonds};
pub use molecular::{batch_tensors, MolecularGraph};
pub use permute::{check_permutation, invert_permutation, permute_nodes};
pub use spec::{GraphDims, GraphSpec, VIRTUAL_ATOM_SYMBOL, VIRTUAL_BOND_SYMBOL};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("graph does not match dimensions {expected:?}: {detail}")]
    Dimensions { expected: GraphDims, detail: String },
    #[error("graph invariant violated: {0}")]
    Invariant(String),
    #[error("dequantization scale must lie in (0, 1), got {0}")]
    DequantScale(f64),
    #[error("corrupted dequantized graph: {0}")]
    Corrupted(String),
    #[error("node reindexing is not a permutation")]
    NotAPermutation,
}
