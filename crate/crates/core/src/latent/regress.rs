use nalgebra::{DMatrix, DVector};

use crate::chem::from_graph;
use crate::flow::{FlowModel, LatentPoint};
use crate::graph::MolecularGraph;
use crate::numeric::Real;

use super::{compute_property, encode_all, LatentError, Property};

const RIDGE_LAMBDA: f64 = 1e-6;

/// Linear model `y = w.z + b` over latent vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct PropertyRegressor {
    pub property: String,
    pub weights: Vec<Real>,
    pub bias: Real,
    /// In-sample coefficient of determination.
    pub r_squared: Real,
    /// True when the design was rank deficient and the ridge solve was used.
    pub ridge: bool,
}

impl PropertyRegressor {
    pub fn predict(&self, z: &[Real]) -> Real {
        self.bias + self.weights.iter().zip(z).map(|(w, x)| w * x).sum::<Real>()
    }
}

/// Least squares with intercept. Inputs are centred, so the intercept is
/// recovered as `mean(y) - w.mean(z)`. Rank-deficient designs (including
/// fewer samples than dimensions) fall back to ridge with a tiny lambda.
pub fn fit_regressor(property: &str, latents: &[LatentPoint], targets: &[Real]) -> Result<PropertyRegressor, LatentError> {
    let n = latents.len();
    if n != targets.len() {
        return Err(LatentError::Invalid(format!("{n} latents but {} targets", targets.len())));
    }
    if n < 2 {
        return Err(LatentError::Invalid("need at least two samples".into()));
    }
    let d = latents[0].dim();
    if latents.iter().any(|z| z.dim() != d) {
        return Err(LatentError::Invalid("latent vectors differ in dimension".into()));
    }
    let y = DVector::from_iterator(n, targets.iter().map(|&t| t as f64));
    let y_mean = y.mean();
    if y.iter().all(|&v| v == y[0]) {
        return Err(LatentError::ConstantProperty(property.to_string()));
    }
    let mut x = DMatrix::from_fn(n, d, |i, j| latents[i].values[j] as f64);
    let x_mean: Vec<f64> = (0..d).map(|j| x.column(j).mean()).collect();
    for j in 0..d {
        x.column_mut(j).add_scalar_mut(-x_mean[j]);
    }
    let yc = y.add_scalar(-y_mean);

    let mut ridge = true;
    let mut w = None;
    if n > d {
        let qr = x.clone().qr();
        let r = qr.r();
        let diag_max = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let full_rank = r.diagonal().iter().all(|v| v.abs() > 1e-10 * diag_max.max(f64::MIN_POSITIVE));
        if full_rank {
            let qty = qr.q().transpose() * &yc;
            if let Some(sol) = r.solve_upper_triangular(&qty) {
                w = Some(sol);
                ridge = false;
            }
        }
    }
    let w = match w {
        Some(w) => w,
        None if n > d => {
            let mut g = x.transpose() * &x;
            for k in 0..d {
                g[(k, k)] += RIDGE_LAMBDA;
            }
            let rhs = x.transpose() * &yc;
            g.cholesky()
                .ok_or_else(|| LatentError::Invalid("ridge system is not positive definite".into()))?
                .solve(&rhs)
        }
        None => {
            // dual form: w = X^T (X X^T + lambda I)^-1 y
            let mut g = &x * x.transpose();
            for k in 0..n {
                g[(k, k)] += RIDGE_LAMBDA;
            }
            let alpha = g
                .cholesky()
                .ok_or_else(|| LatentError::Invalid("ridge system is not positive definite".into()))?
                .solve(&yc);
            x.transpose() * alpha
        }
    };
    let bias = y_mean - w.iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>();
    let resid = &yc - &x * &w;
    let ss_res = resid.norm_squared();
    let ss_tot = yc.norm_squared();
    let r_squared = (1.0 - ss_res / ss_tot).clamp(0.0, 1.0);
    Ok(PropertyRegressor {
        property: property.to_string(),
        weights: w.iter().map(|&v| v as Real).collect(),
        bias: bias as Real,
        r_squared: r_squared as Real,
        ridge,
    })
}

/// Encodes `graphs` (noise-free) and fits `property` of the molecules they
/// describe. Graphs whose molecule is invalid are skipped.
pub fn fit_regressor_on_graphs(
    model: &FlowModel,
    graphs: &[MolecularGraph],
    property: Property,
    c: Real,
) -> Result<PropertyRegressor, LatentError> {
    let mut kept = Vec::new();
    let mut targets = Vec::new();
    for g in graphs {
        let m = from_graph(g, model.spec());
        if let Ok(v) = compute_property(&m, property) {
            kept.push(g.clone());
            targets.push(v);
        }
    }
    let latents = encode_all(model, &kept, c)?;
    fit_regressor(property.name(), &latents, &targets)
}
