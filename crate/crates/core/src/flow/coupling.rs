use crate::graph::GraphDims;
use crate::numeric::{Real, SeededRng, Tensor, TensorError, Var};

use super::nets::{MlpNet, RelGcnNet};
use super::params::{Ctx, ParamStore};
use super::FlowConfig;

/// Ones everywhere except slice `row` of the leading (node) axis.
fn row_mask(shape: &[usize], row: usize) -> Tensor {
    let stride: usize = shape[1..].iter().product();
    Tensor::from_fn(shape, |i| if i / stride == row { 0.0 } else { 1.0 })
}

/// Affine update of adjacency slice `target` from the rest of the tensor.
#[derive(Clone, Debug)]
pub struct AdjacencyCoupling {
    pub target: usize,
    pub scale_net: MlpNet,
    pub translate_net: MlpNet,
    pub scale_clamp: Real,
    dims: GraphDims,
}

impl AdjacencyCoupling {
    pub(crate) fn new(
        store: &mut ParamStore,
        index: usize,
        dims: GraphDims,
        config: &FlowConfig,
        rng: &mut SeededRng,
    ) -> Self {
        let inputs = dims.adjacency_len();
        let outputs = dims.nodes * dims.bond_types;
        let mut widths = vec![inputs];
        widths.extend(&config.mlp_hidden);
        widths.push(outputs);
        let norm = config.batch_norm.then_some(config.bn_eps);
        AdjacencyCoupling {
            target: index % dims.nodes,
            scale_net: MlpNet::new(store, &format!("adj{index}.s"), &widths, norm, rng),
            translate_net: MlpNet::new(store, &format!("adj{index}.t"), &widths, norm, rng),
            scale_clamp: config.scale_clamp,
            dims,
        }
    }

    /// `s` and `t` for the target slice, each `[B, N, R]`, from the masked input.
    pub fn conditioners(&self, ctx: &mut Ctx, z: Var) -> Result<(Var, Var), TensorError> {
        let d = self.dims;
        let batch = ctx.tape.value(z).shape()[0];
        let mask = ctx.tape.constant(row_mask(&[d.nodes, d.nodes, d.bond_types], self.target))?;
        let masked = ctx.tape.mul(z, mask)?;
        let flat = ctx.tape.reshape(masked, &[batch, d.adjacency_len()])?;
        let raw = self.scale_net.forward(ctx, flat)?;
        // s = c * tanh(raw / c) keeps exp(s) bounded
        let s = ctx.tape.scale(raw, 1.0 / self.scale_clamp)?;
        let s = ctx.tape.tanh(s)?;
        let s = ctx.tape.scale(s, self.scale_clamp)?;
        let t = self.translate_net.forward(ctx, flat)?;
        let s = ctx.tape.reshape(s, &[batch, d.nodes, d.bond_types])?;
        let t = ctx.tape.reshape(t, &[batch, d.nodes, d.bond_types])?;
        Ok((s, t))
    }

    /// `z: [B,N,N,R]` -> (output, per-sample log-det `[B]`).
    pub fn forward(&self, ctx: &mut Ctx, z: Var) -> Result<(Var, Var), TensorError> {
        let (s, t) = self.conditioners(ctx, z)?;
        let row = ctx.tape.select(z, 1, self.target)?;
        let es = ctx.tape.exp(s)?;
        let scaled = ctx.tape.mul(row, es)?;
        let updated = ctx.tape.add(scaled, t)?;
        let out = ctx.tape.assign(z, 1, self.target, updated)?;
        let batch = ctx.tape.value(z).shape()[0];
        let s_flat = ctx.tape.reshape(s, &[batch, self.dims.nodes * self.dims.bond_types])?;
        let logdet = ctx.tape.sum_axis(s_flat, 1)?;
        Ok((out, logdet))
    }

    pub fn inverse(&self, ctx: &mut Ctx, z: Var) -> Result<Var, TensorError> {
        let (s, t) = self.conditioners(ctx, z)?;
        let row = ctx.tape.select(z, 1, self.target)?;
        let shifted = ctx.tape.sub(row, t)?;
        let neg = ctx.tape.scale(s, -1.0)?;
        let es = ctx.tape.exp(neg)?;
        let restored = ctx.tape.mul(shifted, es)?;
        ctx.tape.assign(z, 1, self.target, restored)
    }
}

/// Additive update of feature row `target`, conditioned on the other rows and
/// a discrete adjacency tensor.
#[derive(Clone, Debug)]
pub struct NodeCoupling {
    pub target: usize,
    pub translate_net: RelGcnNet,
    dims: GraphDims,
}

impl NodeCoupling {
    pub(crate) fn new(
        store: &mut ParamStore,
        index: usize,
        dims: GraphDims,
        config: &FlowConfig,
        rng: &mut SeededRng,
    ) -> Self {
        NodeCoupling {
            target: index % dims.nodes,
            translate_net: RelGcnNet::new(
                store,
                &format!("node{index}.t"),
                dims.atom_types,
                dims.bond_types,
                config.gcn_hidden,
                config.gcn_rounds,
                dims.atom_types,
                config.batch_norm.then_some(config.bn_eps),
                rng,
            ),
            dims,
        }
    }

    /// `t` for the target row, `[B, M]`. `adjacency` is `[B, N, N*R]`.
    pub fn translation(&self, ctx: &mut Ctx, z: Var, adjacency: Var) -> Result<Var, TensorError> {
        let mask = ctx.tape.constant(row_mask(&[self.dims.nodes, self.dims.atom_types], self.target))?;
        let masked = ctx.tape.mul(z, mask)?;
        self.translate_net.forward(ctx, masked, adjacency, self.target)
    }

    /// `z: [B,N,M]` -> output. The log-det is identically zero.
    pub fn forward(&self, ctx: &mut Ctx, z: Var, adjacency: Var) -> Result<Var, TensorError> {
        let t = self.translation(ctx, z, adjacency)?;
        let row = ctx.tape.select(z, 1, self.target)?;
        let updated = ctx.tape.add(row, t)?;
        ctx.tape.assign(z, 1, self.target, updated)
    }

    pub fn inverse(&self, ctx: &mut Ctx, z: Var, adjacency: Var) -> Result<Var, TensorError> {
        let t = self.translation(ctx, z, adjacency)?;
        let row = ctx.tape.select(z, 1, self.target)?;
        let restored = ctx.tape.sub(row, t)?;
        ctx.tape.assign(z, 1, self.target, restored)
    }
}
