use super::{GraphError, MolecularGraph};

/// Reindexes nodes so that new node `i` is old node `perm[i]`.
pub fn permute_nodes(g: &MolecularGraph, perm: &[usize]) -> Result<MolecularGraph, GraphError> {
    let dims = g.dims();
    let n = dims.nodes;
    check_permutation(perm, n)?;
    let atoms = perm.iter().map(|&p| g.atom(p)).collect();
    let mut bonds = vec![0; n * n];
    for i in 0..n {
        for j in 0..n {
            bonds[i * n + j] = g.bond(perm[i], perm[j]);
        }
    }
    MolecularGraph::from_indices(dims, atoms, bonds)
}

pub fn check_permutation(perm: &[usize], n: usize) -> Result<(), GraphError> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(GraphError::NotAPermutation);
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(GraphError::NotAPermutation);
        }
        seen[p] = true;
    }
    Ok(())
}

pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}
