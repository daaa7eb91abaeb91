//! Conditioner networks for the coupling layers.

use crate::numeric::{Real, SeededRng, Tensor, TensorError, Var};

use super::params::{scaled_normal, Ctx, Mode, ParamId, ParamStore};

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, zero: bool, rng: &mut SeededRng) -> Self {
        let w = if zero {
            Tensor::zeros(&[fan_in, fan_out])
        } else {
            scaled_normal(&[fan_in, fan_out], fan_in, rng)
        };
        Linear {
            weight: store.add(format!("{name}.weight"), w, true),
            bias: store.add(format!("{name}.bias"), Tensor::zeros(&[fan_out]), true),
        }
    }

    /// `[rows, in] -> [rows, out]`
    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var, TensorError> {
        let w = ctx.var(self.weight);
        let b = ctx.var(self.bias);
        let h = ctx.tape.matmul(x, w)?;
        ctx.tape.add(h, b)
    }
}

/// Feature-wise normalization over the rows of a `[rows, F]` input.
#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub eps: Real,
}

impl BatchNorm {
    fn new(store: &mut ParamStore, name: &str, features: usize, eps: Real) -> Self {
        BatchNorm {
            gamma: store.add(format!("{name}.gamma"), Tensor::ones(&[features]), true),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(&[features]), true),
            running_mean: store.add(format!("{name}.running_mean"), Tensor::zeros(&[features]), false),
            running_var: store.add(format!("{name}.running_var"), Tensor::ones(&[features]), false),
            eps,
        }
    }

    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var, TensorError> {
        let normalized = match ctx.mode {
            Mode::Train => {
                let mean = ctx.tape.mean_axis(x, 0)?;
                let centered = ctx.tape.sub(x, mean)?;
                let sq = ctx.tape.mul(centered, centered)?;
                let var = ctx.tape.mean_axis(sq, 0)?;
                let shifted = ctx.tape.add_scalar(var, self.eps)?;
                let inv_std = ctx.tape.powf(shifted, -0.5)?;
                let (m, v) = (ctx.tape.value(mean).clone(), ctx.tape.value(var).clone());
                ctx.record_stat(self.running_mean, m);
                ctx.record_stat(self.running_var, v);
                ctx.tape.mul(centered, inv_std)?
            }
            Mode::Eval => {
                let rm = ctx.var(self.running_mean);
                let rv = ctx.tape.value(ctx.var(self.running_var)).clone();
                let inv_std = ctx.tape.constant(rv.map(|v| 1.0 / (v + self.eps).sqrt()))?;
                let centered = ctx.tape.sub(x, rm)?;
                ctx.tape.mul(centered, inv_std)?
            }
        };
        let scaled = ctx.tape.mul(normalized, ctx.var(self.gamma))?;
        ctx.tape.add(scaled, ctx.var(self.beta))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, ctx: &mut Ctx, x: Var) -> Result<Var, TensorError> {
        match self {
            Activation::Relu => ctx.tape.relu(x),
            Activation::Tanh => ctx.tape.tanh(x),
        }
    }
}

/// Multi-layer perceptron whose output layer starts at zero.
#[derive(Clone, Debug)]
pub struct MlpNet {
    pub hidden: Vec<(Linear, Option<BatchNorm>)>,
    pub output: Linear,
    pub activation: Activation,
}

impl MlpNet {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        widths: &[usize],
        batch_norm: Option<Real>,
        rng: &mut SeededRng,
    ) -> Self {
        assert!(widths.len() >= 2);
        let mut hidden = Vec::new();
        for (k, w) in widths.windows(2).take(widths.len() - 2).enumerate() {
            let lin = Linear::new(store, &format!("{name}.hidden{k}"), w[0], w[1], false, rng);
            let bn = batch_norm.map(|eps| BatchNorm::new(store, &format!("{name}.hidden{k}.norm"), w[1], eps));
            hidden.push((lin, bn));
        }
        let last = &widths[widths.len() - 2..];
        let output = Linear::new(store, &format!("{name}.output"), last[0], last[1], true, rng);
        MlpNet {
            hidden,
            output,
            activation: Activation::Relu,
        }
    }

    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var, TensorError> {
        let mut h = x;
        for (lin, bn) in &self.hidden {
            h = lin.forward(ctx, h)?;
            if let Some(bn) = bn {
                h = bn.forward(ctx, h)?;
            }
            h = self.activation.apply(ctx, h)?;
        }
        self.output.forward(ctx, h)
    }
}

#[derive(Clone, Debug)]
pub struct GcnRound {
    /// `[F_in, R*H]`: one block per bond channel.
    pub relation: ParamId,
    pub self_loop: ParamId,
    pub bias: ParamId,
    pub norm: Option<BatchNorm>,
}

/// Relation-wise message passing over a discrete adjacency tensor.
///
/// Each round computes `h_i' = tanh(norm(sum_r sum_j A[i,j,r] h_j W_r + h_i W_self + b))`.
/// The readout is a zero-initialized linear map of the target node's final
/// hidden state.
#[derive(Clone, Debug)]
pub struct RelGcnNet {
    pub rounds: Vec<GcnRound>,
    pub readout: Linear,
    pub hidden: usize,
    pub relations: usize,
}

impl RelGcnNet {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_features: usize,
        relations: usize,
        hidden: usize,
        num_rounds: usize,
        out_features: usize,
        batch_norm: Option<Real>,
        rng: &mut SeededRng,
    ) -> Self {
        let mut rounds = Vec::new();
        let mut fan_in = in_features;
        for k in 0..num_rounds {
            let n = format!("{name}.round{k}");
            rounds.push(GcnRound {
                relation: store.add(
                    format!("{n}.relation"),
                    scaled_normal(&[fan_in, relations * hidden], fan_in * relations, rng),
                    true,
                ),
                self_loop: store.add(format!("{n}.self"), scaled_normal(&[fan_in, hidden], fan_in, rng), true),
                bias: store.add(format!("{n}.bias"), Tensor::zeros(&[hidden]), true),
                norm: batch_norm.map(|eps| BatchNorm::new(store, &format!("{n}.norm"), hidden, eps)),
            });
            fan_in = hidden;
        }
        let readout = Linear::new(store, &format!("{name}.readout"), fan_in, out_features, true, rng);
        RelGcnNet {
            rounds,
            readout,
            hidden,
            relations,
        }
    }

    /// `x: [B,N,F]`, `adjacency: [B, N, N*R]` -> `[B, out]` for `target`.
    pub fn forward(&self, ctx: &mut Ctx, x: Var, adjacency: Var, target: usize) -> Result<Var, TensorError> {
        let shape = ctx.tape.value(x).shape().to_vec();
        let (b, n) = (shape[0], shape[1]);
        let mut h = ctx.tape.reshape(x, &[b * n, shape[2]])?;
        for round in &self.rounds {
            let per_relation = ctx.tape.matmul(h, ctx.var(round.relation))?;
            let per_relation = ctx.tape.reshape(per_relation, &[b, n * self.relations, self.hidden])?;
            let messages = ctx.tape.bmm(adjacency, per_relation)?;
            let messages = ctx.tape.reshape(messages, &[b * n, self.hidden])?;
            let own = ctx.tape.matmul(h, ctx.var(round.self_loop))?;
            let pre = ctx.tape.add(messages, own)?;
            let mut pre = ctx.tape.add(pre, ctx.var(round.bias))?;
            if let Some(norm) = &round.norm {
                pre = norm.forward(ctx, pre)?;
            }
            h = ctx.tape.tanh(pre)?;
        }
        let width = ctx.tape.value(h).shape()[1];
        let nodes = ctx.tape.reshape(h, &[b, n, width])?;
        let target_state = ctx.tape.select(nodes, 1, target)?;
        self.readout.forward(ctx, target_state)
    }
}
