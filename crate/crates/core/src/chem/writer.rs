use super::Molecule;

/// Depth-first SMILES-lite serializer.
pub struct SmilesWriter<'a> {
    m: &'a Molecule,
    adj: Vec<Vec<(usize, u8)>>,
}

#[derive(Clone, Copy)]
struct RingBond {
    opener: usize,
    closer: usize,
    order: u8,
}

fn bond_symbol(order: u8) -> &'static str {
    match order {
        2 => "=",
        3 => "#",
        _ => "",
    }
}

fn ring_label(n: u32) -> String {
    if n < 10 {
        n.to_string()
    } else {
        format!("%{n:02}")
    }
}

impl<'a> SmilesWriter<'a> {
    pub fn new(m: &'a Molecule) -> Self {
        SmilesWriter {
            m,
            adj: m.neighbours(),
        }
    }

    /// Serializes with atoms visited in increasing `ranks` order: each
    /// fragment starts from its lowest-ranked atom and branches are taken
    /// lowest rank first.
    pub fn write_ranked(&self, ranks: &[usize]) -> String {
        let n = self.m.atom_count();
        let mut adj = self.adj.clone();
        for nbrs in &mut adj {
            nbrs.sort_by_key(|&(j, _)| ranks[j]);
        }
        let mut roots: Vec<usize> = (0..n).collect();
        roots.sort_by_key(|&i| ranks[i]);

        // pass 1: spanning forest and ring-closure bonds
        let mut visited = vec![false; n];
        let mut children: Vec<Vec<(usize, u8)>> = vec![Vec::new(); n];
        let mut rings: Vec<RingBond> = Vec::new();
        let mut order_of_roots = Vec::new();
        for &root in &roots {
            if visited[root] {
                continue;
            }
            order_of_roots.push(root);
            self.discover(root, usize::MAX, &adj, &mut visited, &mut children, &mut rings);
        }

        // pass 2: emit
        let mut out = String::new();
        let mut free_labels: Vec<u32> = Vec::new();
        let mut next_label = 1;
        let mut open: Vec<(usize, u32)> = Vec::new(); // ring index -> label
        for (k, &root) in order_of_roots.iter().enumerate() {
            if k > 0 {
                out.push('.');
            }
            self.emit(
                root,
                &children,
                &rings,
                &mut open,
                &mut free_labels,
                &mut next_label,
                &mut out,
            );
        }
        out
    }

    fn discover(
        &self,
        u: usize,
        parent: usize,
        adj: &[Vec<(usize, u8)>],
        visited: &mut [bool],
        children: &mut [Vec<(usize, u8)>],
        rings: &mut Vec<RingBond>,
    ) {
        visited[u] = true;
        for &(v, order) in &adj[u] {
            if v == parent {
                continue;
            }
            if visited[v] {
                let known = rings
                    .iter()
                    .any(|r| (r.opener == v && r.closer == u) || (r.opener == u && r.closer == v));
                if !known {
                    // v is an ancestor still being expanded
                    rings.push(RingBond {
                        opener: v,
                        closer: u,
                        order,
                    });
                }
            } else {
                children[u].push((v, order));
                self.discover(v, u, adj, visited, children, rings);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn emit(
        &self,
        u: usize,
        children: &[Vec<(usize, u8)>],
        rings: &[RingBond],
        open: &mut Vec<(usize, u32)>,
        free_labels: &mut Vec<u32>,
        next_label: &mut u32,
        out: &mut String,
    ) {
        out.push_str(self.m.atoms()[u].symbol());
        // closings first, in the order their rings were opened
        let mut closing: Vec<(usize, u32)> = open
            .iter()
            .copied()
            .filter(|&(ri, _)| rings[ri].closer == u)
            .collect();
        closing.sort_by_key(|&(_, label)| label);
        for &(ri, label) in &closing {
            out.push_str(&ring_label(label));
            open.retain(|&(r, _)| r != ri);
        }
        // openings, in ring discovery order (which follows rank order)
        for (ri, ring) in rings.iter().enumerate() {
            if ring.opener != u {
                continue;
            }
            let label = free_labels.pop().unwrap_or_else(|| {
                let l = *next_label;
                *next_label += 1;
                l
            });
            out.push_str(bond_symbol(ring.order));
            out.push_str(&ring_label(label));
            open.push((ri, label));
        }
        // labels closed here become reusable only after this atom
        free_labels.extend(closing.iter().map(|&(_, label)| label));
        free_labels.sort_unstable_by(|a, b| b.cmp(a));
        let kids = &children[u];
        for (k, &(v, order)) in kids.iter().enumerate() {
            let last = k + 1 == kids.len();
            if !last {
                out.push('(');
            }
            out.push_str(bond_symbol(order));
            self.emit(v, children, rings, open, free_labels, next_label, out);
            if !last {
                out.push(')');
            }
        }
    }
}

/// Serializes atoms in their stored order (not canonical).
pub fn write_smiles(m: &Molecule) -> String {
    let ranks: Vec<usize> = (0..m.atom_count()).collect();
    SmilesWriter::new(m).write_ranked(&ranks)
}
