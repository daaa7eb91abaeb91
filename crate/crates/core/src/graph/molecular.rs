use crate::numeric::{Real, Tensor};

use super::{GraphDims, GraphError};

/// Discrete attributed graph `(A, X)`.
///
/// Stored compactly as one atom-type index per node and one bond-channel
/// index per ordered node pair; the one-hot tensors are produced on demand.
/// Construction enforces every encoding invariant, so a value of this type
/// is always a well-formed graph.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MolecularGraph {
    dims: GraphDims,
    atoms: Vec<usize>,
    bonds: Vec<usize>,
}

impl MolecularGraph {
    /// All-virtual graph.
    pub fn empty(dims: GraphDims) -> Self {
        MolecularGraph {
            dims,
            atoms: vec![dims.virtual_atom(); dims.nodes],
            bonds: vec![dims.virtual_bond(); dims.nodes * dims.nodes],
        }
    }

    /// Builds a graph from per-node atom types and a full N x N bond-channel
    /// matrix (row-major), validating all invariants.
    pub fn from_indices(
        dims: GraphDims,
        atoms: Vec<usize>,
        bonds: Vec<usize>,
    ) -> Result<Self, GraphError> {
        let n = dims.nodes;
        if atoms.len() != n || bonds.len() != n * n {
            return Err(GraphError::Dimensions {
                expected: dims,
                detail: format!("{} atoms, {} bond entries", atoms.len(), bonds.len()),
            });
        }
        if let Some(i) = atoms.iter().position(|&a| a >= dims.atom_types) {
            return Err(GraphError::Invariant(format!("node {i} has atom type out of range")));
        }
        let vb = dims.virtual_bond();
        for i in 0..n {
            if bonds[i * n + i] != vb {
                return Err(GraphError::Invariant(format!("diagonal ({i},{i}) is not virtual")));
            }
            for j in 0..n {
                let b = bonds[i * n + j];
                if b >= dims.bond_types {
                    return Err(GraphError::Invariant(format!("pair ({i},{j}) channel out of range")));
                }
                if b != bonds[j * n + i] {
                    return Err(GraphError::Invariant(format!("pair ({i},{j}) is not symmetric")));
                }
                let touches_virtual =
                    atoms[i] == dims.virtual_atom() || atoms[j] == dims.virtual_atom();
                if b != vb && touches_virtual {
                    return Err(GraphError::Invariant(format!(
                        "virtual node bonded through pair ({i},{j})"
                    )));
                }
            }
        }
        Ok(MolecularGraph { dims, atoms, bonds })
    }

    /// Reads one-hot tensors `A: [N,N,R]` and `X: [N,M]`; every entry must be
    /// exactly 0 or 1 and every pair/node one-hot.
    pub fn from_tensors(dims: GraphDims, adjacency: &Tensor, features: &Tensor) -> Result<Self, GraphError> {
        let (n, m, r) = (dims.nodes, dims.atom_types, dims.bond_types);
        if adjacency.shape() != [n, n, r] || features.shape() != [n, m] {
            return Err(GraphError::Dimensions {
                expected: dims,
                detail: format!("A {:?}, X {:?}", adjacency.shape(), features.shape()),
            });
        }
        let one_hot = |row: &[Real], what: String| -> Result<usize, GraphError> {
            let mut hot = None;
            for (k, &v) in row.iter().enumerate() {
                if v == 1.0 {
                    if hot.is_some() {
                        return Err(GraphError::Invariant(format!("{what} has several hot entries")));
                    }
                    hot = Some(k);
                } else if v != 0.0 {
                    return Err(GraphError::Invariant(format!("{what} has non-binary entry {v}")));
                }
            }
            hot.ok_or_else(|| GraphError::Invariant(format!("{what} has no hot entry")))
        };
        let atoms = (0..n)
            .map(|i| one_hot(&features.data()[i * m..(i + 1) * m], format!("node {i}")))
            .collect::<Result<Vec<_>, _>>()?;
        let bonds = (0..n * n)
            .map(|p| one_hot(&adjacency.data()[p * r..(p + 1) * r], format!("pair ({},{})", p / n, p % n)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_indices(dims, atoms, bonds)
    }

    pub fn dims(&self) -> GraphDims {
        self.dims
    }

    pub fn atom(&self, i: usize) -> usize {
        self.atoms[i]
    }

    pub fn bond(&self, i: usize, j: usize) -> usize {
        self.bonds[i * self.dims.nodes + j]
    }

    pub fn atoms(&self) -> &[usize] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[usize] {
        &self.bonds
    }

    pub fn is_virtual(&self, i: usize) -> bool {
        self.atoms[i] == self.dims.virtual_atom()
    }

    /// Number of non-virtual nodes.
    pub fn atom_count(&self) -> usize {
        (0..self.dims.nodes).filter(|&i| !self.is_virtual(i)).count()
    }

    /// One-hot adjacency tensor `[N,N,R]`.
    pub fn adjacency(&self) -> Tensor {
        let r = self.dims.bond_types;
        let mut t = Tensor::zeros(&[self.dims.nodes, self.dims.nodes, r]);
        for (p, &b) in self.bonds.iter().enumerate() {
            t.data_mut()[p * r + b] = 1.0;
        }
        t
    }

    /// One-hot feature matrix `[N,M]`.
    pub fn features(&self) -> Tensor {
        let m = self.dims.atom_types;
        let mut t = Tensor::zeros(&[self.dims.nodes, m]);
        for (i, &a) in self.atoms.iter().enumerate() {
            t.data_mut()[i * m + a] = 1.0;
        }
        t
    }

    /// Per-channel degree of every node (`[node][channel]`).
    pub fn channel_degrees(&self) -> Vec<Vec<usize>> {
        let n = self.dims.nodes;
        (0..n)
            .map(|i| {
                let mut d = vec![0; self.dims.bond_types];
                for j in 0..n {
                    if i != j {
                        d[self.bond(i, j)] += 1;
                    }
                }
                d
            })
            .collect()
    }
}

/// Stacks graphs into batch tensors `A: [B,N,N,R]` and `X: [B,N,M]`.
pub fn batch_tensors(graphs: &[MolecularGraph]) -> (Tensor, Tensor) {
    let dims = graphs[0].dims();
    let mut a = Vec::with_capacity(graphs.len() * dims.adjacency_len());
    let mut x = Vec::with_capacity(graphs.len() * dims.feature_len());
    for g in graphs {
        a.extend_from_slice(g.adjacency().data());
        x.extend_from_slice(g.features().data());
    }
    let b = graphs.len();
    (
        Tensor::new(vec![b, dims.nodes, dims.nodes, dims.bond_types], a).expect("batch shape"),
        Tensor::new(vec![b, dims.nodes, dims.atom_types], x).expect("batch shape"),
    )
}
