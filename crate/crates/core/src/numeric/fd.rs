use super::{Real, Tensor, TensorError};

/// Central-difference estimate of the gradient of `f` at `p`:
/// `(f(p + step*e_i) - f(p - step*e_i)) / (2*step)` per coordinate.
pub fn finite_difference_gradient<F>(mut f: F, p: &Tensor, step: Real) -> Result<Tensor, TensorError>
where
    F: FnMut(&Tensor) -> Result<Real, TensorError>,
{
    if step.is_nan() || step <= 0.0 {
        return Err(TensorError::InvalidStep(step as f64));
    }
    let mut probe = p.clone();
    let mut grad = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let plus = f(&probe)?;
        probe.data_mut()[i] = orig - step;
        let minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(TensorError::NonFinite {
                op: "finite_difference_gradient",
            });
        }
        grad.push((plus - minus) / (2.0 * step));
    }
    Tensor::new(p.shape().to_vec(), grad)
}

/// Norm-wise relative error `|a - b| / max(|a|, |b|)`; zero when both are
/// (numerically) zero.
pub fn relative_error(a: &Tensor, b: &Tensor) -> Real {
    let diff: Real = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<Real>()
        .sqrt();
    let scale = a.norm().max(b.norm());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}
