//! Regenerates the bundled SMILES-lite corpora in `crates/core/data/`.
//!
//!     cargo run -p gnvp-core --example make_corpus
//!
//! Molecules are grown as random trees, closed into rings and given a few
//! multiple bonds, then kept only if they pass the valence check and have a
//! canonical form not seen before.

use std::collections::HashSet;
use std::fmt::Write as _;

use gnvp_core::chem::{
    canonical_smiles, check_validity, parse_smiles_lite, Bond, Element, Molecule, ValenceTable,
};
use gnvp_core::numeric::SeededRng;

struct Recipe {
    sizes: (usize, usize),
    elements: &'static [(Element, f64)],
    max_rings: usize,
    multiple_bond_rate: f64,
}

fn generation_valence(e: Element) -> u32 {
    match e {
        Element::S => 2,
        _ => ValenceTable::default().max_valence(e).unwrap(),
    }
}

fn pick_element(rng: &mut SeededRng, table: &[(Element, f64)]) -> Element {
    let total: f64 = table.iter().map(|(_, w)| w).sum();
    let mut u = rng.uniform() * total;
    for &(e, w) in table {
        if u < w {
            return e;
        }
        u -= w;
    }
    table[0].0
}

fn distances(n: usize, bonds: &[Bond], from: usize) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for b in bonds {
        adj[b.a].push(b.b);
        adj[b.b].push(b.a);
    }
    let mut dist = vec![usize::MAX; n];
    dist[from] = 0;
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

fn grow(rng: &mut SeededRng, recipe: &Recipe) -> Option<Molecule> {
    let (lo, hi) = recipe.sizes;
    let n = lo + rng.below(hi - lo + 1);
    let mut atoms = vec![Element::C];
    for _ in 1..n {
        atoms.push(pick_element(rng, recipe.elements));
    }
    let mut free: Vec<u32> = atoms.iter().map(|&e| generation_valence(e)).collect();
    let mut bonds = Vec::new();
    for i in 1..n {
        let parents: Vec<usize> = (0..i).filter(|&p| free[p] > 0).collect();
        if parents.is_empty() {
            return None;
        }
        // favour recent atoms for chain-like growth
        let p = if rng.uniform() < 0.6 {
            *parents.last().unwrap()
        } else {
            parents[rng.below(parents.len())]
        };
        if free[i] == 0 {
            return None;
        }
        bonds.push(Bond { a: p, b: i, order: 1 });
        free[p] -= 1;
        free[i] -= 1;
    }
    let rings = if recipe.max_rings == 0 { 0 } else { rng.below(recipe.max_rings + 1) };
    for _ in 0..rings {
        for _attempt in 0..30 {
            let a = rng.below(n);
            let dist = distances(n, &bonds, a);
            let want = if rng.uniform() < 0.7 { 5 } else { 2 + rng.below(4) };
            let candidates: Vec<usize> = (0..n)
                .filter(|&b| dist[b] == want && free[a] > 0 && free[b] > 0)
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let b = candidates[rng.below(candidates.len())];
            bonds.push(Bond { a, b, order: 1 });
            free[a] -= 1;
            free[b] -= 1;
            break;
        }
    }
    for bond in &mut bonds {
        if rng.uniform() < recipe.multiple_bond_rate && free[bond.a] > 0 && free[bond.b] > 0 {
            let extra = if rng.uniform() < 0.2 { 2.min(free[bond.a]).min(free[bond.b]) } else { 1 };
            bond.order += extra as u8;
            free[bond.a] -= extra;
            free[bond.b] -= extra;
        }
    }
    Molecule::new(atoms, bonds).ok()
}

fn build(
    rng: &mut SeededRng,
    recipe: &Recipe,
    seeds: &[&str],
    target: usize,
    max_atoms: usize,
) -> Vec<String> {
    let table = ValenceTable::default();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for s in seeds {
        let m = parse_smiles_lite(s).expect("seed molecule parses");
        assert!(check_validity(&m, &table).unwrap().valid, "{s}");
        if seen.insert(canonical_smiles(&m)) {
            out.push(s.to_string());
        }
    }
    while out.len() < target {
        let Some(m) = grow(rng, recipe) else { continue };
        if m.atom_count() > max_atoms || !check_validity(&m, &table).unwrap().valid {
            continue;
        }
        let key = canonical_smiles(&m);
        if seen.insert(key.clone()) {
            out.push(key);
        }
    }
    out
}

fn write(path: &str, header: &str, lines: &[String]) {
    let mut text = String::new();
    for h in header.lines() {
        writeln!(text, "# {h}").unwrap();
    }
    for l in lines {
        writeln!(text, "{l}").unwrap();
    }
    std::fs::write(path, text).expect("write corpus");
    println!("wrote {} molecules to {path}", lines.len());
}

fn main() {
    use Element::*;
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");

    let qm9 = Recipe {
        sizes: (3, 9),
        elements: &[(C, 0.62), (N, 0.13), (O, 0.2), (F, 0.05)],
        max_rings: 2,
        multiple_bond_rate: 0.18,
    };
    let qm9_seeds = [
        "C", "N", "O", "CC", "CO", "C#N", "O=C=O", "C=O", "CCO", "CC(C)=O", "C1CC1", "C1CCCCC1",
        "C1=CC=CC=C1", "OC1=CC=CC=C1", "CC(=O)O", "NC(=O)C", "FC(F)F", "C1COC1", "N#CC#N",
        "CC1=CC=CN1",
    ];
    let mut rng = SeededRng::new(9);
    let lines = build(&mut rng, &qm9, &qm9_seeds, 256, 9);
    write(
        &format!("{dir}/qm9lite.smi"),
        "QM9-style corpus: 256 kekulized, hydrogen-suppressed molecules,\n\
         at most 9 heavy atoms over C, N, O, F.\n\
         Regenerate with: cargo run -p gnvp-core --example make_corpus",
        &lines,
    );

    let zinc = Recipe {
        sizes: (14, 38),
        elements: &[(C, 0.7), (N, 0.12), (O, 0.11), (F, 0.025), (S, 0.02), (Cl, 0.025)],
        max_rings: 4,
        multiple_bond_rate: 0.15,
    };
    let zinc_seeds = [
        "CC(=O)NC1=CC=C(O)C=C1",
        "CN1C=NC2=C1C(=O)N(C)C(=O)N2C",
        "CC(C)CC1=CC=C(C=C1)C(C)C(=O)O",
        "ClC1=CC=C(C=C1)C(=O)NCCS",
        "OC(=O)C1=CC=CC=C1OC(=O)C",
        "FC1=CC=C(C=C1)C1=CC(=NN1C1=CC=C(C=C1)S(=O)(=O)N)C(F)(F)F",
    ];
    let mut rng = SeededRng::new(38);
    let lines = build(&mut rng, &zinc, &zinc_seeds, 64, 38);
    write(
        &format!("{dir}/zinclite.smi"),
        "ZINC-style corpus: 64 kekulized, hydrogen-suppressed molecules,\n\
         at most 38 heavy atoms over C, N, O, F, S, Cl.\n\
         Regenerate with: cargo run -p gnvp-core --example make_corpus",
        &lines,
    );
}
