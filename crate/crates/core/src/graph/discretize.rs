use crate::numeric::{Real, Tensor};

use super::{GraphDims, MolecularGraph};

fn argmax(scores: impl Iterator<Item = Real>) -> usize {
    let mut best = 0;
    let mut best_score = Real::NEG_INFINITY;
    for (k, s) in scores.enumerate() {
        // strict comparison keeps the lowest index on ties
        if s > best_score {
            best = k;
            best_score = s;
        }
    }
    best
}

/// Bond channel per ordered pair from continuous adjacency scores `[N,N,R]`:
/// scores of `(i,j)` and `(j,i)` are averaged, the diagonal is virtual.
pub fn discretize_adjacency(dims: GraphDims, a_cont: &[Real]) -> Vec<usize> {
    let (n, r) = (dims.nodes, dims.bond_types);
    debug_assert_eq!(a_cont.len(), n * n * r);
    let mut bonds = vec![dims.virtual_bond(); n * n];
    for i in 0..n {
        for j in i + 1..n {
            let b = argmax(
                (0..r).map(|k| 0.5 * (a_cont[(i * n + j) * r + k] + a_cont[(j * n + i) * r + k])),
            );
            bonds[i * n + j] = b;
            bonds[j * n + i] = b;
        }
    }
    bonds
}

/// Node-wise and edge-wise argmax of continuous `(A, X)` scores.
///
/// Edge scores are symmetrized first. Nodes whose argmax is the virtual atom
/// type lose all their bonds so the output always satisfies the graph
/// invariants. Ties go to the lowest channel index.
pub fn discretize_argmax(dims: GraphDims, a_cont: &[Real], x_cont: &[Real]) -> MolecularGraph {
    let bonds = discretize_adjacency(dims, a_cont);
    discretize_with_bonds(dims, bonds, x_cont)
}

/// Completes a graph from an already-discrete bond matrix and feature scores.
pub fn discretize_with_bonds(dims: GraphDims, mut bonds: Vec<usize>, x_cont: &[Real]) -> MolecularGraph {
    let (n, m) = (dims.nodes, dims.atom_types);
    debug_assert_eq!(x_cont.len(), n * m);
    let atoms: Vec<usize> = (0..n)
        .map(|i| argmax(x_cont[i * m..(i + 1) * m].iter().copied()))
        .collect();
    for i in 0..n {
        if atoms[i] == dims.virtual_atom() {
            for j in 0..n {
                bonds[i * n + j] = dims.virtual_bond();
                bonds[j * n + i] = dims.virtual_bond();
            }
        }
    }
    MolecularGraph::from_indices(dims, atoms, bonds).expect("discretized graph satisfies invariants")
}

pub fn discretize_tensors(dims: GraphDims, a_cont: &Tensor, x_cont: &Tensor) -> MolecularGraph {
    discretize_argmax(dims, a_cont.data(), x_cont.data())
}
