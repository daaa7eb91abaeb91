use crate::flow::ParamStore;
use crate::numeric::{Gradients, Real, Tensor};

use super::{TrainConfig, TrainError};

/// Adam with bias correction. Moments are kept for trainable parameters in
/// store order.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub alpha: Real,
    pub beta1: Real,
    pub beta2: Real,
    pub eps: Real,
    pub step: u64,
    pub first: Vec<Tensor>,
    pub second: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore, config: &TrainConfig) -> Self {
        let zeros: Vec<Tensor> = store.trainable().map(|(_, e)| Tensor::zeros(e.value.shape())).collect();
        Adam {
            alpha: config.adam_alpha,
            beta1: config.adam_beta1,
            beta2: config.adam_beta2,
            eps: config.adam_eps,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    /// One update of every trainable parameter from `grads` (looked up by name).
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<(), TrainError> {
        let ids: Vec<_> = store.trainable().map(|(id, e)| (id, e.name.clone())).collect();
        if ids.len() != self.first.len() {
            return Err(TrainError::State(format!(
                "optimizer tracks {} parameters, model has {}",
                self.first.len(),
                ids.len()
            )));
        }
        // validate everything before touching any state
        for (id, name) in &ids {
            let g = grads
                .get(name)
                .ok_or_else(|| TrainError::State(format!("no gradient for {name}")))?;
            if g.shape() != store.get(*id).shape() {
                return Err(TrainError::GradientShape {
                    name: name.clone(),
                    expected: store.get(*id).shape().to_vec(),
                    got: g.shape().to_vec(),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (k, (id, name)) in ids.iter().enumerate() {
            let g = grads.get(name).expect("checked above").data();
            let m = self.first[k].data_mut();
            let v = self.second[k].data_mut();
            let mut p = store.get(*id).clone();
            for (i, w) in p.data_mut().iter_mut().enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                *w -= self.alpha * mh / (vh.sqrt() + self.eps);
            }
            store.set(*id, p);
        }
        Ok(())
    }
}
