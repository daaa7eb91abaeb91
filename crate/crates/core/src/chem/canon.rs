//! Canonical SMILES-lite via iterative neighbourhood refinement.
//!
//! Atoms start from an invariant (element, degree, bond-order sum) and are
//! re-ranked by their sorted neighbour ranks until the partition is stable.
//! Remaining ties are broken by trying each atom of the first tied class in
//! turn and keeping the lexicographically smallest serialization, so the
//! result is exact rather than heuristic. Fragments are canonicalized
//! independently and joined in sorted order.

use super::{Molecule, SmilesWriter};

type Adjacency = Vec<Vec<(usize, u8)>>;

/// Dense ranks (0-based) of `keys`, equal keys sharing a rank.
fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present"))
        .collect()
}

fn class_count(ranks: &[usize]) -> usize {
    ranks.iter().max().map_or(0, |m| m + 1)
}

/// Refines `ranks` until the number of classes stops growing.
fn refine(adj: &Adjacency, mut ranks: Vec<usize>) -> Vec<usize> {
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = adj
            .iter()
            .enumerate()
            .map(|(i, nbrs)| {
                let mut n: Vec<(usize, u8)> = nbrs.iter().map(|&(j, o)| (ranks[j], o)).collect();
                n.sort_unstable();
                (ranks[i], n)
            })
            .collect();
        let next = dense_ranks(&keys);
        if class_count(&next) == class_count(&ranks) {
            return next;
        }
        ranks = next;
    }
}

fn initial_ranks(m: &Molecule, adj: &Adjacency) -> Vec<usize> {
    let sums = m.bond_order_sums();
    let keys: Vec<(u8, usize, u32)> = m
        .atoms()
        .iter()
        .enumerate()
        .map(|(i, e)| (e.atomic_number(), adj[i].len(), sums[i]))
        .collect();
    dense_ranks(&keys)
}

fn search(m: &Molecule, adj: &Adjacency, ranks: Vec<usize>, best: &mut Option<String>) {
    let ranks = refine(adj, ranks);
    let n = ranks.len();
    if class_count(&ranks) == n {
        let s = SmilesWriter::new(m).write_ranked(&ranks);
        if best.as_ref().is_none_or(|b| s < *b) {
            *best = Some(s);
        }
        return;
    }
    // first (lowest) rank shared by several atoms
    let mut counts = vec![0usize; n];
    for &r in &ranks {
        counts[r] += 1;
    }
    let tied = (0..n).find(|&r| counts[r] > 1).expect("a tied class exists");
    for atom in (0..n).filter(|&i| ranks[i] == tied) {
        let split: Vec<usize> = ranks
            .iter()
            .enumerate()
            .map(|(i, &r)| if i == atom { 2 * r } else { 2 * r + 1 })
            .collect();
        search(m, adj, dense_ranks(&split), best);
    }
}

fn canonical_fragment(m: &Molecule) -> String {
    let adj = m.neighbours();
    let ranks = initial_ranks(m, &adj);
    let mut best = None;
    search(m, &adj, ranks, &mut best);
    best.unwrap_or_default()
}

/// Canonical string: identical for every atom relabelling of a molecule.
pub fn canonical_smiles(m: &Molecule) -> String {
    let mut parts: Vec<String> = m
        .components()
        .iter()
        .map(|atoms| canonical_fragment(&m.reorder(atoms)))
        .collect();
    parts.sort();
    parts.join(".")
}

/// Canonical atom order (a permutation) of a connected molecule.
pub fn canonical_ranks(m: &Molecule) -> Vec<usize> {
    let adj = m.neighbours();
    let mut ranks = refine(&adj, initial_ranks(m, &adj));
    // deterministic completion for callers that just need an order
    while class_count(&ranks) < ranks.len() {
        let n = ranks.len();
        let mut counts = vec![0usize; n];
        for &r in &ranks {
            counts[r] += 1;
        }
        let tied = (0..n).find(|&r| counts[r] > 1).expect("tied class");
        let atom = (0..n).find(|&i| ranks[i] == tied).expect("member");
        let split: Vec<usize> = ranks
            .iter()
            .enumerate()
            .map(|(i, &r)| if i == atom { 2 * r } else { 2 * r + 1 })
            .collect();
        ranks = refine(&adj, dense_ranks(&split));
    }
    ranks
}
