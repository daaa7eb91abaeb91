#![allow(dead_code)]

use gnvp_core::chem::Element;
use gnvp_core::flow::{FlowConfig, FlowModel};
use gnvp_core::graph::{GraphDims, GraphSpec, MolecularGraph};
use gnvp_core::numeric::{Real, SeededRng, Tensor};

/// N=3 nodes, one real atom type and single bonds: M=2, R=2, D=24.
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

/// Model with every parameter perturbed and non-trivial running statistics.
pub fn random_model(spec: GraphSpec, config: FlowConfig, seed: u64, std: Real) -> FlowModel {
    let mut model = FlowModel::new(spec, config, seed);
    model.perturb(std, seed ^ 0x5eed);
    let mut rng = SeededRng::new(seed.wrapping_add(17));
    let store = model.params_mut();
    let names: Vec<String> = store
        .entries()
        .iter()
        .filter(|e| !e.trainable)
        .map(|e| e.name.clone())
        .collect();
    for name in names {
        let t = store.by_name_mut(&name).unwrap();
        let is_var = name.ends_with("running_var");
        for v in t.data_mut() {
            *v = if is_var { 0.5 + rng.uniform() } else { 0.3 * rng.normal() };
        }
    }
    model
}

/// Random graph satisfying the encoding invariants (not necessarily a valid
/// molecule).
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

/// log|det| of a square row-major matrix by LU with partial pivoting.
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
        assert!(p != 0.0, "singular matrix");
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

/// Five-point central-difference Jacobian of `f: R^d -> R^d`, row-major
/// `[out, in]`.
pub fn numeric_jacobian(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let d = x.len();
    let mut jac = vec![0.0; d * d];
    let mut xp = x.to_vec();
    let mut at = |xp: &mut Vec<f64>, i: usize, off: f64| {
        xp[i] = x[i] + off;
        let v = f(xp);
        xp[i] = x[i];
        v
    };
    for i in 0..d {
        let p2 = at(&mut xp, i, 2.0 * h);
        let p1 = at(&mut xp, i, h);
        let m1 = at(&mut xp, i, -h);
        let m2 = at(&mut xp, i, -2.0 * h);
        for o in 0..d {
            jac[o * d + i] = (-p2[o] + 8.0 * p1[o] - 8.0 * m1[o] + m2[o]) / (12.0 * h);
        }
    }
    jac
}

pub fn flat(adjacency: &Tensor, features: &Tensor) -> Vec<Real> {
    let mut v = adjacency.data().to_vec();
    v.extend_from_slice(features.data());
    v
}

pub fn sup_norm(a: &[Real], b: &[Real]) -> Real {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, Real::max)
}
