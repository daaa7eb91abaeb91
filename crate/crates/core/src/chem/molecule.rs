use super::{ChemError, Element};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    /// 1, 2 or 3.
    pub order: u8,
}

/// Hydrogen-suppressed molecule: heavy atoms and explicit bonds.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Molecule {
    atoms: Vec<Element>,
    bonds: Vec<Bond>,
}

impl Molecule {
    pub fn new(atoms: Vec<Element>, bonds: Vec<Bond>) -> Result<Self, ChemError> {
        let mut seen = std::collections::HashSet::new();
        for bond in &bonds {
            if bond.a >= atoms.len() || bond.b >= atoms.len() {
                return Err(ChemError::InvalidMolecule(format!(
                    "bond ({}, {}) refers to a missing atom",
                    bond.a, bond.b
                )));
            }
            if bond.a == bond.b {
                return Err(ChemError::InvalidMolecule(format!("self-bond on atom {}", bond.a)));
            }
            if !(1..=3).contains(&bond.order) {
                return Err(ChemError::InvalidMolecule(format!("bond order {}", bond.order)));
            }
            if !seen.insert((bond.a.min(bond.b), bond.a.max(bond.b))) {
                return Err(ChemError::InvalidMolecule(format!(
                    "duplicate bond between {} and {}",
                    bond.a, bond.b
                )));
            }
        }
        Ok(Molecule { atoms, bonds })
    }

    pub fn atoms(&self) -> &[Element] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// `(neighbour, order)` lists per atom.
    pub fn neighbours(&self) -> Vec<Vec<(usize, u8)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for b in &self.bonds {
            adj[b.a].push((b.b, b.order));
            adj[b.b].push((b.a, b.order));
        }
        adj
    }

    pub fn bond_order_sums(&self) -> Vec<u32> {
        let mut sums = vec![0u32; self.atoms.len()];
        for b in &self.bonds {
            sums[b.a] += b.order as u32;
            sums[b.b] += b.order as u32;
        }
        sums
    }

    /// Connected components as sorted atom index lists, ordered by first atom.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.neighbours();
        let mut comp = vec![usize::MAX; self.atoms.len()];
        let mut out = Vec::new();
        for start in 0..self.atoms.len() {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            comp[start] = id;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for &(v, _) in &adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = id;
                        members.push(v);
                        stack.push(v);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Molecule whose atom `i` is this molecule's atom `order[i]`. When
    /// `order` covers only some atoms, bonds leaving that subset are dropped.
    pub fn reorder(&self, order: &[usize]) -> Molecule {
        let mut new_index = vec![usize::MAX; self.atoms.len()];
        for (i, &o) in order.iter().enumerate() {
            new_index[o] = i;
        }
        let atoms = order.iter().map(|&o| self.atoms[o]).collect();
        let bonds = self
            .bonds
            .iter()
            .filter(|b| new_index[b.a] != usize::MAX && new_index[b.b] != usize::MAX)
            .map(|b| Bond {
                a: new_index[b.a],
                b: new_index[b.b],
                order: b.order,
            })
            .collect();
        Molecule { atoms, bonds }
    }

    /// Bond order between two atoms, if bonded.
    pub fn bond_between(&self, a: usize, b: usize) -> Option<u8> {
        self.bonds
            .iter()
            .find(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a))
            .map(|x| x.order)
    }
}
