//! Reference computations used by the acceptance checks. Nothing here calls
//! into the code under test except to build inputs.
#![allow(dead_code)]

use std::collections::HashSet;

use gnvp_core::chem::{canonical_smiles, check_validity, to_graph, Bond, Element, Molecule, ValenceTable};
use gnvp_core::flow::{FlowConfig, FlowModel};
use gnvp_core::graph::{GraphDims, GraphSpec, MolecularGraph};
use gnvp_core::numeric::SeededRng;

/// N=3, one real atom type, single bonds: M=2, R=2, D=24.
pub fn toy_spec() -> GraphSpec {
    GraphSpec::new("toy", 3, vec![Element::C], 1)
}

pub fn toy_config() -> FlowConfig {
    FlowConfig {
        adjacency_layers: 4,
        node_layers: 4,
        mlp_hidden: vec![16, 16],
        gcn_hidden: 8,
        gcn_rounds: 2,
        ..FlowConfig::default()
    }
}

/// Every trainable parameter perturbed by N(0, std^2) and the batch-norm
/// running statistics randomized.
pub fn random_model(spec: GraphSpec, config: FlowConfig, seed: u64, std: f64) -> FlowModel {
    let mut model = FlowModel::new(spec, config, seed);
    model.perturb(std, seed ^ 0xacce);
    let mut rng = SeededRng::new(seed.wrapping_mul(31).wrapping_add(7));
    let names: Vec<String> = model
        .params()
        .entries()
        .iter()
        .filter(|e| !e.trainable)
        .map(|e| e.name.clone())
        .collect();
    for name in names {
        let var = name.ends_with("running_var");
        for v in model.params_mut().by_name_mut(&name).unwrap().data_mut() {
            *v = if var { 0.5 + rng.uniform() } else { 0.3 * rng.normal() };
        }
    }
    model
}

/// Random graph obeying the encoding rules (not necessarily chemical).
pub fn random_graph(dims: GraphDims, rng: &mut SeededRng) -> MolecularGraph {
    let n = dims.nodes;
    let atoms: Vec<usize> = (0..n).map(|_| rng.below(dims.atom_types)).collect();
    let mut bonds = vec![dims.virtual_bond(); n * n];
    for i in 0..n {
        for j in i + 1..n {
            if atoms[i] != dims.virtual_atom() && atoms[j] != dims.virtual_atom() {
                let b = rng.below(dims.bond_types);
                bonds[i * n + j] = b;
                bonds[j * n + i] = b;
            }
        }
    }
    MolecularGraph::from_indices(dims, atoms, bonds).unwrap()
}

/// log|det| by LU with partial pivoting.
pub fn log_abs_det(mut a: Vec<f64>, n: usize) -> f64 {
    let mut acc = 0.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
            .unwrap();
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
        }
        let p = a[col * n + col];
        if p == 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += p.abs().ln();
        for row in col + 1..n {
            let f = a[row * n + col] / p;
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
        }
    }
    acc
}

/// Five-point central-difference Jacobian, row-major `[out, in]`.
pub fn numeric_jacobian(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let d = x.len();
    let mut jac = vec![0.0; d * d];
    let mut xp = x.to_vec();
    for i in 0..d {
        let mut eval = |off: f64| {
            xp[i] = x[i] + off;
            let v = f(&xp);
            xp[i] = x[i];
            v
        };
        let (p2, p1, m1, m2) = (eval(2.0 * h), eval(h), eval(-h), eval(-2.0 * h));
        for o in 0..d {
            jac[o * d + i] = (-p2[o] + 8.0 * p1[o] - 8.0 * m1[o] + m2[o]) / (12.0 * h);
        }
    }
    jac
}

/// Central differences of a scalar function of a flat vector.
pub fn central_gradient(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let plus = f(&xp);
            xp[i] = x[i] - h;
            let minus = f(&xp);
            xp[i] = x[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// All valid molecules over C and O with at most four atoms and bond orders
/// up to two, one per canonical form.
pub fn enumerate_small(spec: &GraphSpec) -> Vec<MolecularGraph> {
    let table = ValenceTable::default();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for n in 1..=4usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        for mask in 0..1usize << n {
            let atoms: Vec<Element> = (0..n)
                .map(|i| if mask >> i & 1 == 0 { Element::C } else { Element::O })
                .collect();
            for code in 0..3usize.pow(pairs.len() as u32) {
                let mut c = code;
                let mut bonds = Vec::new();
                for &(a, b) in &pairs {
                    let order = (c % 3) as u8;
                    c /= 3;
                    if order > 0 {
                        bonds.push(Bond { a, b, order });
                    }
                }
                let m = Molecule::new(atoms.clone(), bonds).unwrap();
                if check_validity(&m, &table).unwrap().valid && seen.insert(canonical_smiles(&m)) {
                    out.push(to_graph(&m, spec).unwrap());
                }
            }
        }
    }
    out
}
