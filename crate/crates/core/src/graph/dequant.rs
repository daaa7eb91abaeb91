use crate::numeric::{Real, SeededRng, Tensor};

use super::{GraphDims, GraphError, MolecularGraph};

/// Scale of the uniform dequantization noise.
pub const DEFAULT_DEQUANT_SCALE: Real = 0.9;

/// Continuous relaxation `(A', X')` of a discrete graph.
#[derive(Clone, Debug, PartialEq)]
pub struct DequantizedGraph {
    pub adjacency: Tensor,
    pub features: Tensor,
    pub scale: Real,
}

impl DequantizedGraph {
    pub fn dims_match(&self, dims: GraphDims) -> bool {
        self.adjacency.shape() == [dims.nodes, dims.nodes, dims.bond_types]
            && self.features.shape() == [dims.nodes, dims.atom_types]
    }
}

fn check_scale(c: Real) -> Result<(), GraphError> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(GraphError::DequantScale(c as f64))
    }
}

/// `A' = A + c*u`, `X' = X + c*u` with `u ~ U[0,1)` drawn independently per entry.
pub fn dequantize(g: &MolecularGraph, c: Real, rng: &mut SeededRng) -> Result<DequantizedGraph, GraphError> {
    check_scale(c)?;
    let mut adjacency = g.adjacency();
    for v in adjacency.data_mut() {
        *v += c * rng.uniform();
    }
    let mut features = g.features();
    for v in features.data_mut() {
        *v += c * rng.uniform();
    }
    Ok(DequantizedGraph {
        adjacency,
        features,
        scale: c,
    })
}

/// Deterministic dequantization at the centre of each noise cell (`u = 1/2`).
pub fn dequantize_midpoint(g: &MolecularGraph, c: Real) -> Result<DequantizedGraph, GraphError> {
    check_scale(c)?;
    Ok(DequantizedGraph {
        adjacency: g.adjacency().map(|v| v + 0.5 * c),
        features: g.features().map(|v| v + 0.5 * c),
        scale: c,
    })
}

/// Elementwise floor back to a discrete graph.
pub fn requantize(dims: GraphDims, g: &DequantizedGraph) -> Result<MolecularGraph, GraphError> {
    requantize_tensors(dims, &g.adjacency, &g.features)
}

pub fn requantize_tensors(dims: GraphDims, adjacency: &Tensor, features: &Tensor) -> Result<MolecularGraph, GraphError> {
    let floor = |t: &Tensor| -> Result<Tensor, GraphError> {
        if let Some(&bad) = t.data().iter().find(|v| !(0.0..2.0).contains(*v)) {
            return Err(GraphError::Corrupted(format!("entry {bad} outside [0, 2)")));
        }
        Ok(t.map(Real::floor))
    };
    MolecularGraph::from_tensors(dims, &floor(adjacency)?, &floor(features)?)
        .map_err(|e| GraphError::Corrupted(e.to_string()))
}
