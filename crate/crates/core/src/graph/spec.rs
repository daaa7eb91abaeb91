use crate::chem::Element;

/// Fixed dimensions shared by every graph of a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GraphDims {
    /// Padded node count N.
    pub nodes: usize,
    /// Atom types M, including the virtual type (last index).
    pub atom_types: usize,
    /// Bond channels R, including the virtual channel (last index).
    pub bond_types: usize,
}

impl GraphDims {
    pub fn adjacency_len(&self) -> usize {
        self.nodes * self.nodes * self.bond_types
    }

    pub fn feature_len(&self) -> usize {
        self.nodes * self.atom_types
    }

    /// Latent dimension D = N*N*R + N*M.
    pub fn latent_dim(&self) -> usize {
        self.adjacency_len() + self.feature_len()
    }

    pub fn virtual_atom(&self) -> usize {
        self.atom_types - 1
    }

    pub fn virtual_bond(&self) -> usize {
        self.bond_types - 1
    }
}

/// Vocabulary and padding size of a graph encoding.
///
/// Non-virtual bond channel `k` carries bond order `k + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphSpec {
    pub name: String,
    pub num_nodes: usize,
    /// Real atom types; the virtual type is appended implicitly.
    pub atoms: Vec<Element>,
    /// Highest bond order represented; the virtual channel is appended.
    pub max_bond_order: u8,
}

pub const VIRTUAL_ATOM_SYMBOL: &str = "*";
pub const VIRTUAL_BOND_SYMBOL: &str = "none";
const BOND_SYMBOLS: [&str; 3] = ["single", "double", "triple"];

impl GraphSpec {
    pub fn new(name: &str, num_nodes: usize, atoms: Vec<Element>, max_bond_order: u8) -> Self {
        assert!(num_nodes > 0, "graph spec needs at least one node");
        assert!(!atoms.is_empty(), "graph spec needs at least one atom type");
        assert!((1..=3).contains(&max_bond_order), "bond order must be 1..=3");
        GraphSpec {
            name: name.to_string(),
            num_nodes,
            atoms,
            max_bond_order,
        }
    }

    /// N=9 over C, N, O, F with single/double/triple bonds.
    pub fn qm9lite() -> Self {
        use Element::*;
        Self::new("qm9lite", 9, vec![C, N, O, F], 3)
    }

    /// N=38 over C, N, O, F, S, Cl.
    pub fn zinclite() -> Self {
        use Element::*;
        Self::new("zinclite", 38, vec![C, N, O, F, S, Cl], 3)
    }

    /// Looks up a bundled spec by name.
    pub fn named(name: &str) -> Option<Self> {
        match name {
            "qm9lite" => Some(Self::qm9lite()),
            "zinclite" => Some(Self::zinclite()),
            _ => None,
        }
    }

    pub fn dims(&self) -> GraphDims {
        GraphDims {
            nodes: self.num_nodes,
            atom_types: self.atoms.len() + 1,
            bond_types: self.max_bond_order as usize + 1,
        }
    }

    pub fn atom_vocab(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.atoms.iter().map(|e| e.symbol()).collect();
        v.push(VIRTUAL_ATOM_SYMBOL);
        v
    }

    pub fn bond_vocab(&self) -> Vec<&str> {
        let mut v: Vec<&str> = BOND_SYMBOLS[..self.max_bond_order as usize].to_vec();
        v.push(VIRTUAL_BOND_SYMBOL);
        v
    }

    pub fn atom_index(&self, element: Element) -> Option<usize> {
        self.atoms.iter().position(|&e| e == element)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qm9lite_dimensions() {
        let s = GraphSpec::qm9lite();
        let d = s.dims();
        assert_eq!((d.nodes, d.atom_types, d.bond_types), (9, 5, 4));
        assert_eq!(s.atom_vocab(), vec!["C", "N", "O", "F", "*"]);
        assert_eq!(s.bond_vocab(), vec!["single", "double", "triple", "none"]);
        assert_eq!(d.latent_dim(), 9 * 9 * 4 + 9 * 5);
    }

    #[test]
    fn zinclite_dimensions() {
        let d = GraphSpec::zinclite().dims();
        assert_eq!((d.nodes, d.atom_types, d.bond_types), (38, 7, 4));
    }
}
