//! Latent-space exploration: encoding, grids around a molecule, proxy
//! properties and linear property directions.

mod property;
mod regress;

pub use property::{compute_property, Property};
pub use regress::{fit_regressor, fit_regressor_on_graphs, PropertyRegressor};

use crate::chem::{check_validity, canonical_smiles, from_graph, ChemError, Molecule, ValenceTable};
use crate::flow::{FlowError, FlowModel, LatentPoint};
use crate::generation::{decode_points, GenerationError};
use crate::graph::{dequantize, dequantize_midpoint, GraphError, MolecularGraph};
use crate::numeric::{Real, SeededRng};

#[derive(Debug, thiserror::Error)]
pub enum LatentError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error("unknown property {0:?} (expected heavy_atom_count, ring_count, hetero_fraction or logp_proxy)")]
    UnknownProperty(String),
    #[error("property {0} needs at least two distinct values to fit")]
    ConstantProperty(String),
    #[error("{0}")]
    Invalid(String),
}

/// How a discrete graph is lifted to the continuous input of the flow.
pub enum Encoding<'a> {
    /// `A + c/2`: deterministic, centred in the noise cell.
    Midpoint,
    Noisy(&'a mut SeededRng),
}

pub fn encode(model: &FlowModel, g: &MolecularGraph, c: Real, how: Encoding) -> Result<LatentPoint, LatentError> {
    let dq = match how {
        Encoding::Midpoint => dequantize_midpoint(g, c)?,
        Encoding::Noisy(rng) => dequantize(g, c, rng)?,
    };
    Ok(model.model_forward(&dq)?.0)
}

/// Noise-free encodings of many graphs.
pub fn encode_all(model: &FlowModel, graphs: &[MolecularGraph], c: Real) -> Result<Vec<LatentPoint>, LatentError> {
    let mut out = Vec::with_capacity(graphs.len());
    for chunk in graphs.chunks(64) {
        let dq = chunk
            .iter()
            .map(|g| dequantize_midpoint(g, c))
            .collect::<Result<Vec<_>, _>>()?;
        out.extend(model.forward_batch(&dq)?.into_iter().map(|(z, _)| z));
    }
    Ok(out)
}

/// Decoded molecule, or `None` when it fails the validity check.
fn valid_molecule(model: &FlowModel, g: &MolecularGraph, table: &ValenceTable) -> Result<Option<Molecule>, LatentError> {
    let m = from_graph(g, model.spec());
    Ok(check_validity(&m, table)?.valid.then_some(m))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub center: LatentPoint,
    pub axis_u: Vec<Real>,
    pub axis_v: Vec<Real>,
    /// Cells run from `-extent` to `extent` on both axes.
    pub extent: usize,
    pub step: Real,
}

fn dot(a: &[Real], b: &[Real]) -> Real {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [Real]) {
    let n = dot(v, v).sqrt();
    for x in v {
        *x /= n;
    }
}

impl GridSpec {
    /// Two orthonormal axes from seeded Gaussian draws (Gram-Schmidt, applied
    /// twice for accuracy).
    pub fn random(center: LatentPoint, extent: usize, step: Real, seed: u64) -> Result<Self, LatentError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(LatentError::Invalid(format!("grid step must be positive, got {step}")));
        }
        let d = center.dim();
        if d < 2 {
            return Err(LatentError::Invalid("latent space needs two dimensions".into()));
        }
        let mut rng = SeededRng::new(seed);
        let mut u: Vec<Real> = (0..d).map(|_| rng.normal()).collect();
        let mut v: Vec<Real> = (0..d).map(|_| rng.normal()).collect();
        normalize(&mut u);
        for _ in 0..2 {
            let p = dot(&u, &v);
            for (vi, ui) in v.iter_mut().zip(&u) {
                *vi -= p * ui;
            }
            normalize(&mut v);
        }
        Ok(GridSpec {
            center,
            axis_u: u,
            axis_v: v,
            extent,
            step,
        })
    }

    pub fn side(&self) -> usize {
        2 * self.extent + 1
    }

    /// `z0 + i*step*u + j*step*v`.
    pub fn point(&self, i: i64, j: i64) -> LatentPoint {
        let (a, b) = (i as Real * self.step, j as Real * self.step);
        let values = self
            .center
            .values
            .iter()
            .zip(self.axis_u.iter().zip(&self.axis_v))
            .map(|(z, (u, v))| z + a * u + b * v)
            .collect();
        LatentPoint {
            values,
            adjacency_len: self.center.adjacency_len,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub i: i64,
    pub j: i64,
    pub molecule: Option<Molecule>,
}

impl GridCell {
    pub fn smiles(&self) -> String {
        self.molecule.as_ref().map_or_else(|| "INVALID".to_string(), canonical_smiles)
    }
}

/// Decodes every grid point once, row by row (`i` outer, `j` inner).
pub fn grid_decode(model: &FlowModel, spec: &GridSpec, threads: usize) -> Result<Vec<GridCell>, LatentError> {
    let e = spec.extent as i64;
    let coords: Vec<(i64, i64)> = (-e..=e).flat_map(|i| (-e..=e).map(move |j| (i, j))).collect();
    let points: Vec<LatentPoint> = coords.iter().map(|&(i, j)| spec.point(i, j)).collect();
    let graphs = decode_points(model, &points, threads)?;
    let table = ValenceTable::default();
    coords
        .into_iter()
        .zip(graphs)
        .map(|((i, j), g)| {
            Ok(GridCell {
                i,
                j,
                molecule: valid_molecule(model, &g, &table)?,
            })
        })
        .collect()
}

pub fn grid_csv(cells: &[GridCell]) -> String {
    let mut out = String::from("i,j,smiles\n");
    for c in cells {
        out.push_str(&format!("{},{},{}\n", c.i, c.j, c.smiles()));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationStep {
    pub step: usize,
    pub molecule: Option<Molecule>,
    pub predicted: Real,
    /// Property of the decoded molecule, when it is valid.
    pub realized: Option<Real>,
}

/// Walks `z_k = z_0 + k * step_size * w/|w|` for `k = 0..=num_steps`,
/// decoding each point once.
pub fn optimize_along(
    model: &FlowModel,
    regressor: &PropertyRegressor,
    seed: &MolecularGraph,
    num_steps: usize,
    step_size: Real,
    c: Real,
) -> Result<Vec<OptimizationStep>, LatentError> {
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(LatentError::Invalid(format!("step size must be positive, got {step_size}")));
    }
    let z0 = encode(model, seed, c, Encoding::Midpoint)?;
    if regressor.weights.len() != z0.dim() {
        return Err(LatentError::Invalid(format!(
            "regressor has {} weights, latent dimension is {}",
            regressor.weights.len(),
            z0.dim()
        )));
    }
    let norm = dot(&regressor.weights, &regressor.weights).sqrt();
    if norm == 0.0 {
        return Err(LatentError::Invalid("regressor direction is zero".into()));
    }
    let property: Property = regressor.property.parse()?;
    let points: Vec<LatentPoint> = (0..=num_steps)
        .map(|k| {
            let a = k as Real * step_size / norm;
            LatentPoint {
                values: z0.values.iter().zip(&regressor.weights).map(|(z, w)| z + a * w).collect(),
                adjacency_len: z0.adjacency_len,
            }
        })
        .collect();
    let graphs = decode_points(model, &points, 1)?;
    let table = ValenceTable::default();
    points
        .iter()
        .zip(graphs)
        .enumerate()
        .map(|(k, (z, g))| {
            let molecule = valid_molecule(model, &g, &table)?;
            let realized = molecule.as_ref().map(|m| compute_property(m, property)).transpose()?;
            Ok(OptimizationStep {
                step: k,
                predicted: regressor.predict(&z.values),
                molecule,
                realized,
            })
        })
        .collect()
}

pub fn optimization_csv(steps: &[OptimizationStep]) -> String {
    let mut out = String::from("step,smiles,predicted_property,realized_property\n");
    for s in steps {
        let smiles = s.molecule.as_ref().map_or_else(|| "INVALID".to_string(), canonical_smiles);
        let realized = s.realized.map(|r| format!("{r:.6}")).unwrap_or_default();
        out.push_str(&format!("{},{},{:.6},{}\n", s.step, smiles, s.predicted, realized));
    }
    out
}
