use crate::graph::{GraphSpec, MolecularGraph};

use super::{Bond, ChemError, Molecule};

/// Pads a molecule into the fixed-size encoding of `spec`.
pub fn to_graph(m: &Molecule, spec: &GraphSpec) -> Result<MolecularGraph, ChemError> {
    let dims = spec.dims();
    let n = dims.nodes;
    if m.atom_count() > n {
        return Err(ChemError::TooLarge {
            atoms: m.atom_count(),
            max: n,
        });
    }
    let mut atoms = vec![dims.virtual_atom(); n];
    for (i, &e) in m.atoms().iter().enumerate() {
        atoms[i] = spec
            .atom_index(e)
            .ok_or_else(|| ChemError::NotInVocabulary(e, spec.name.clone()))?;
    }
    let mut bonds = vec![dims.virtual_bond(); n * n];
    for b in m.bonds() {
        if b.order > spec.max_bond_order {
            return Err(ChemError::InvalidMolecule(format!(
                "bond order {} not representable in {}",
                b.order, spec.name
            )));
        }
        let ch = b.order as usize - 1;
        bonds[b.a * n + b.b] = ch;
        bonds[b.b * n + b.a] = ch;
    }
    Ok(MolecularGraph::from_indices(dims, atoms, bonds).expect("padded molecule is well formed"))
}

/// Drops virtual nodes and virtual-channel pairs. Atoms keep node order.
pub fn from_graph(g: &MolecularGraph, spec: &GraphSpec) -> Molecule {
    let dims = g.dims();
    assert_eq!(dims, spec.dims(), "graph and spec dimensions differ");
    let kept: Vec<usize> = (0..dims.nodes).filter(|&i| !g.is_virtual(i)).collect();
    let mut index = vec![usize::MAX; dims.nodes];
    for (k, &i) in kept.iter().enumerate() {
        index[i] = k;
    }
    let atoms = kept.iter().map(|&i| spec.atoms[g.atom(i)]).collect();
    let mut bonds = Vec::new();
    for (ka, &i) in kept.iter().enumerate() {
        for &j in &kept[ka + 1..] {
            let ch = g.bond(i, j);
            if ch != dims.virtual_bond() {
                bonds.push(Bond {
                    a: index[i],
                    b: index[j],
                    order: ch as u8 + 1,
                });
            }
        }
    }
    Molecule::new(atoms, bonds).expect("graph decodes to a well-formed molecule")
}
