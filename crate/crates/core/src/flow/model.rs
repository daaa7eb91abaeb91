use crate::graph::{discretize_adjacency, discretize_tensors, DequantizedGraph, GraphDims, GraphSpec, MolecularGraph};
use crate::numeric::{Real, SeededRng, Tape, Tensor, Var};

use super::coupling::{AdjacencyCoupling, NodeCoupling};
use super::params::{Ctx, Mode, ParamId, ParamStore};
use super::{FlowConfig, FlowError};

const LN_2PI: Real = 1.837_877_066_409_345_5;

/// Isotropic Gaussian with a learned log standard deviation.
#[derive(Clone, Debug)]
pub struct GaussianPrior {
    pub log_sigma: ParamId,
    pub dim: usize,
}

/// Concatenated `(flatten(z_A), flatten(z_X))`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentPoint {
    pub values: Vec<Real>,
    pub adjacency_len: usize,
}

impl LatentPoint {
    pub fn new(values: Vec<Real>, dims: GraphDims) -> Result<Self, FlowError> {
        if values.len() != dims.latent_dim() {
            return Err(FlowError::Dimension {
                what: "latent dimension",
                expected: dims.latent_dim(),
                got: values.len(),
            });
        }
        Ok(LatentPoint {
            values,
            adjacency_len: dims.adjacency_len(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn z_adjacency(&self) -> &[Real] {
        &self.values[..self.adjacency_len]
    }

    pub fn z_features(&self) -> &[Real] {
        &self.values[self.adjacency_len..]
    }
}

/// Latent tensors of a batch as recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct TapeLatent {
    /// `[B,N,N,R]`
    pub z_adjacency: Var,
    /// `[B,N,M]`
    pub z_features: Var,
    /// `[B]`
    pub logdet: Var,
}

/// Order of the two stages when inverting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReverseOrder {
    /// Adjacency first, then node features conditioned on the discretized
    /// adjacency. This is the order generation uses.
    AdjacencyFirst,
    /// Node features first, conditioned on the argmax of the untransformed
    /// adjacency latent. Only useful for comparison.
    NodeFirst,
}

#[derive(Clone, Debug)]
pub struct FlowModel {
    spec: GraphSpec,
    config: FlowConfig,
    params: ParamStore,
    adjacency_layers: Vec<AdjacencyCoupling>,
    node_layers: Vec<NodeCoupling>,
    prior: GaussianPrior,
}

/// One-hot `[N, N*R]` adjacency of a discrete bond matrix.
fn one_hot_bonds(dims: GraphDims, bonds: &[usize]) -> Vec<Real> {
    let r = dims.bond_types;
    let mut out = vec![0.0; dims.adjacency_len()];
    for (p, &b) in bonds.iter().enumerate() {
        out[p * r + b] = 1.0;
    }
    out
}

impl FlowModel {
    /// Fresh model. Output layers of every conditioner start at zero, so
    /// the map is the identity until trained; hidden layers are drawn from
    /// `seed`.
    pub fn new(spec: GraphSpec, config: FlowConfig, seed: u64) -> Self {
        let dims = spec.dims();
        let mut rng = SeededRng::new(seed);
        let mut params = ParamStore::new();
        let node_layers = (0..config.node_layers)
            .map(|k| NodeCoupling::new(&mut params, k, dims, &config, &mut rng))
            .collect();
        let adjacency_layers = (0..config.adjacency_layers)
            .map(|k| AdjacencyCoupling::new(&mut params, k, dims, &config, &mut rng))
            .collect();
        let prior = GaussianPrior {
            log_sigma: params.add("prior.log_sigma".into(), Tensor::scalar(0.0), true),
            dim: dims.latent_dim(),
        };
        FlowModel {
            spec,
            config,
            params,
            adjacency_layers,
            node_layers,
            prior,
        }
    }

    pub fn spec(&self) -> &GraphSpec {
        &self.spec
    }

    pub fn dims(&self) -> GraphDims {
        self.spec.dims()
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn adjacency_layers(&self) -> &[AdjacencyCoupling] {
        &self.adjacency_layers
    }

    pub fn node_layers(&self) -> &[NodeCoupling] {
        &self.node_layers
    }

    pub fn prior(&self) -> &GaussianPrior {
        &self.prior
    }

    pub fn log_sigma(&self) -> Real {
        self.params.get(self.prior.log_sigma).data()[0]
    }

    pub fn sigma(&self) -> Real {
        self.log_sigma().exp()
    }

    pub fn set_log_sigma(&mut self, value: Real) {
        self.params.set(self.prior.log_sigma, Tensor::scalar(value));
    }

    /// Adds `N(0, std^2)` noise to every trainable parameter, including the
    /// zero-initialized output layers. Used to obtain non-trivial models
    /// without training.
    pub fn perturb(&mut self, std: Real, seed: u64) {
        let mut rng = SeededRng::new(seed);
        let ids: Vec<ParamId> = self.params.trainable().map(|(id, _)| id).collect();
        for id in ids {
            let old = self.params.get(id);
            let noisy = Tensor::from_fn(old.shape(), |i| old.data()[i] + std * rng.normal());
            self.params.set(id, noisy);
        }
    }

    /// Log density of `z` under the prior.
    pub fn prior_logprob(&self, z: &[Real]) -> Real {
        let ls = self.log_sigma();
        let inv_var = (-2.0 * ls).exp();
        z.iter()
            .map(|&v| -0.5 * LN_2PI - ls - 0.5 * v * v * inv_var)
            .sum()
    }

    /// Sum over the batch of prior log densities, as a scalar on the tape.
    pub fn prior_logprob_sum_on_tape(&self, ctx: &mut Ctx, latent: &TapeLatent) -> Result<Var, FlowError> {
        let b = ctx.tape.value(latent.z_adjacency).shape()[0];
        let dim = self.dims().latent_dim() as Real;
        let sq_a = ctx.tape.mul(latent.z_adjacency, latent.z_adjacency)?;
        let sq_a = ctx.tape.sum_all(sq_a)?;
        let sq_x = ctx.tape.mul(latent.z_features, latent.z_features)?;
        let sq_x = ctx.tape.sum_all(sq_x)?;
        let sq = ctx.tape.add(sq_a, sq_x)?;
        let ls = ctx.var(self.prior.log_sigma);
        let neg2 = ctx.tape.scale(ls, -2.0)?;
        let inv_var = ctx.tape.exp(neg2)?;
        let quad = ctx.tape.mul(sq, inv_var)?;
        let quad = ctx.tape.scale(quad, -0.5)?;
        let norm = ctx.tape.scale(ls, -dim * b as Real)?;
        let lp = ctx.tape.add(quad, norm)?;
        Ok(ctx.tape.add_scalar(lp, -0.5 * LN_2PI * dim * b as Real)?)
    }

    /// Forward pass over batch tensors on a tape. `adjacency_condition` is
    /// the discrete adjacency `[B,N,N*R]` the node couplings see.
    pub fn forward_on_tape(
        &self,
        ctx: &mut Ctx,
        adjacency: Var,
        features: Var,
        adjacency_condition: Var,
    ) -> Result<TapeLatent, FlowError> {
        let b = ctx.tape.value(adjacency).shape()[0];
        let mut zx = features;
        for layer in &self.node_layers {
            zx = layer.forward(ctx, zx, adjacency_condition)?;
        }
        let mut za = adjacency;
        let mut logdet = ctx.tape.constant(Tensor::zeros(&[b]))?;
        for layer in &self.adjacency_layers {
            let (out, ld) = layer.forward(ctx, za)?;
            za = out;
            logdet = ctx.tape.add(logdet, ld)?;
        }
        Ok(TapeLatent {
            z_adjacency: za,
            z_features: zx,
            logdet,
        })
    }

    fn check_graph(&self, g: &DequantizedGraph) -> Result<(), FlowError> {
        let d = self.dims();
        if !g.dims_match(d) {
            return Err(FlowError::Dimension {
                what: "dequantized graph entries",
                expected: d.latent_dim(),
                got: g.adjacency.len() + g.features.len(),
            });
        }
        Ok(())
    }

    /// Places a batch of dequantized graphs on the tape: `(A', X', floor(A'))`.
    pub fn batch_inputs(&self, tape: &mut Tape, graphs: &[DequantizedGraph]) -> Result<(Var, Var, Var), FlowError> {
        let d = self.dims();
        let b = graphs.len();
        let mut a = Vec::with_capacity(b * d.adjacency_len());
        let mut x = Vec::with_capacity(b * d.feature_len());
        for g in graphs {
            self.check_graph(g)?;
            a.extend_from_slice(g.adjacency.data());
            x.extend_from_slice(g.features.data());
        }
        let cond: Vec<Real> = a.iter().map(|v| v.floor()).collect();
        let a = tape.constant(Tensor::new(vec![b, d.nodes, d.nodes, d.bond_types], a)?)?;
        let x = tape.constant(Tensor::new(vec![b, d.nodes, d.atom_types], x)?)?;
        let cond = tape.constant(Tensor::new(vec![b, d.nodes, d.nodes * d.bond_types], cond)?)?;
        Ok((a, x, cond))
    }

    /// Encodes a batch in evaluation mode: latent points and log-determinants.
    pub fn forward_batch(&self, graphs: &[DequantizedGraph]) -> Result<Vec<(LatentPoint, Real)>, FlowError> {
        if graphs.is_empty() {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new();
        let (a, x, cond) = self.batch_inputs(&mut tape, graphs)?;
        let mut ctx = Ctx::inference(&mut tape, &self.params)?;
        let lat = self.forward_on_tape(&mut ctx, a, x, cond)?;
        let d = self.dims();
        let za = tape.value(lat.z_adjacency).data();
        let zx = tape.value(lat.z_features).data();
        let ld = tape.value(lat.logdet).data();
        Ok((0..graphs.len())
            .map(|i| {
                let mut v = za[i * d.adjacency_len()..(i + 1) * d.adjacency_len()].to_vec();
                v.extend_from_slice(&zx[i * d.feature_len()..(i + 1) * d.feature_len()]);
                (
                    LatentPoint {
                        values: v,
                        adjacency_len: d.adjacency_len(),
                    },
                    ld[i],
                )
            })
            .collect())
    }

    /// `f(G') = (z, log|det df/dG'|)`.
    pub fn model_forward(&self, g: &DequantizedGraph) -> Result<(LatentPoint, Real), FlowError> {
        Ok(self.forward_batch(std::slice::from_ref(g))?.remove(0))
    }

    /// Inverse map, adjacency stage first.
    pub fn model_inverse(&self, z: &LatentPoint) -> Result<(Tensor, Tensor), FlowError> {
        Ok(self.inverse_batch(std::slice::from_ref(z), ReverseOrder::AdjacencyFirst)?.remove(0))
    }

    /// Inverts a batch of latent points into continuous `(A [N,N,R], X [N,M])`.
    pub fn inverse_batch(&self, zs: &[LatentPoint], order: ReverseOrder) -> Result<Vec<(Tensor, Tensor)>, FlowError> {
        if zs.is_empty() {
            return Ok(Vec::new());
        }
        let d = self.dims();
        let b = zs.len();
        let mut za = Vec::with_capacity(b * d.adjacency_len());
        let mut zx = Vec::with_capacity(b * d.feature_len());
        for z in zs {
            if z.dim() != d.latent_dim() || z.adjacency_len != d.adjacency_len() {
                return Err(FlowError::Dimension {
                    what: "latent dimension",
                    expected: d.latent_dim(),
                    got: z.dim(),
                });
            }
            za.extend_from_slice(z.z_adjacency());
            zx.extend_from_slice(z.z_features());
        }
        let mut tape = Tape::new();
        let za = tape.constant(Tensor::new(vec![b, d.nodes, d.nodes, d.bond_types], za)?)?;
        let zx = tape.constant(Tensor::new(vec![b, d.nodes, d.atom_types], zx)?)?;
        let mut ctx = Ctx::inference(&mut tape, &self.params)?;

        let condition = |ctx: &mut Ctx, a: Var| -> Result<Var, FlowError> {
            let values = ctx.tape.value(a).data().to_vec();
            let mut cond = Vec::with_capacity(values.len());
            for chunk in values.chunks(d.adjacency_len()) {
                cond.extend(one_hot_bonds(d, &discretize_adjacency(d, chunk)));
            }
            Ok(ctx.tape.constant(Tensor::new(vec![b, d.nodes, d.nodes * d.bond_types], cond)?)?)
        };

        let (a, x) = match order {
            ReverseOrder::AdjacencyFirst => {
                let a = self.invert_adjacency(&mut ctx, za)?;
                let cond = condition(&mut ctx, a)?;
                (a, self.invert_nodes(&mut ctx, zx, cond)?)
            }
            ReverseOrder::NodeFirst => {
                let cond = condition(&mut ctx, za)?;
                let x = self.invert_nodes(&mut ctx, zx, cond)?;
                (self.invert_adjacency(&mut ctx, za)?, x)
            }
        };
        let a = tape.value(a).data();
        let x = tape.value(x).data();
        (0..b)
            .map(|i| {
                let at = Tensor::new(
                    vec![d.nodes, d.nodes, d.bond_types],
                    a[i * d.adjacency_len()..(i + 1) * d.adjacency_len()].to_vec(),
                )?;
                let xt = Tensor::new(
                    vec![d.nodes, d.atom_types],
                    x[i * d.feature_len()..(i + 1) * d.feature_len()].to_vec(),
                )?;
                Ok((at, xt))
            })
            .collect()
    }

    fn invert_adjacency(&self, ctx: &mut Ctx, mut z: Var) -> Result<Var, FlowError> {
        for layer in self.adjacency_layers.iter().rev() {
            z = layer.inverse(ctx, z)?;
        }
        Ok(z)
    }

    fn invert_nodes(&self, ctx: &mut Ctx, mut z: Var, cond: Var) -> Result<Var, FlowError> {
        for layer in self.node_layers.iter().rev() {
            z = layer.inverse(ctx, z, cond)?;
        }
        Ok(z)
    }

    /// Inverse followed by argmax discretization.
    pub fn decode(&self, z: &LatentPoint) -> Result<MolecularGraph, FlowError> {
        Ok(self.decode_batch(std::slice::from_ref(z))?.remove(0))
    }

    pub fn decode_batch(&self, zs: &[LatentPoint]) -> Result<Vec<MolecularGraph>, FlowError> {
        let d = self.dims();
        Ok(self
            .inverse_batch(zs, ReverseOrder::AdjacencyFirst)?
            .iter()
            .map(|(a, x)| discretize_tensors(d, a, x))
            .collect())
    }

    /// Applies adjacency layer `k` alone to `z: [N,N,R]`.
    pub fn adjacency_layer_forward(&self, k: usize, z: &Tensor) -> Result<(Tensor, Real), FlowError> {
        let mut tape = Tape::new();
        let zv = tape.constant(z.clone().reshape(&[1, z.shape()[0], z.shape()[1], z.shape()[2]])?)?;
        let mut ctx = Ctx::inference(&mut tape, &self.params)?;
        let (out, ld) = self.adjacency_layers[k].forward(&mut ctx, zv)?;
        Ok((tape.value(out).clone().reshape(z.shape())?, tape.value(ld).data()[0]))
    }

    pub fn adjacency_layer_inverse(&self, k: usize, z: &Tensor) -> Result<Tensor, FlowError> {
        let mut tape = Tape::new();
        let zv = tape.constant(z.clone().reshape(&[1, z.shape()[0], z.shape()[1], z.shape()[2]])?)?;
        let mut ctx = Ctx::inference(&mut tape, &self.params)?;
        let out = self.adjacency_layers[k].inverse(&mut ctx, zv)?;
        Ok(tape.value(out).clone().reshape(z.shape())?)
    }

    /// Applies node layer `k` alone to `z: [N,M]` given a one-hot `A: [N,N,R]`.
    /// The log-determinant of an additive layer is zero.
    pub fn node_layer_forward(&self, k: usize, z: &Tensor, adjacency: &Tensor) -> Result<(Tensor, Real), FlowError> {
        self.node_layer(k, z, adjacency, true).map(|t| (t, 0.0))
    }

    pub fn node_layer_inverse(&self, k: usize, z: &Tensor, adjacency: &Tensor) -> Result<Tensor, FlowError> {
        self.node_layer(k, z, adjacency, false)
    }

    fn node_layer(&self, k: usize, z: &Tensor, adjacency: &Tensor, forward: bool) -> Result<Tensor, FlowError> {
        let d = self.dims();
        let mut tape = Tape::new();
        let zv = tape.constant(z.clone().reshape(&[1, d.nodes, d.atom_types])?)?;
        let av = tape.constant(adjacency.clone().reshape(&[1, d.nodes, d.nodes * d.bond_types])?)?;
        let mut ctx = Ctx::inference(&mut tape, &self.params)?;
        let layer = &self.node_layers[k];
        let out = if forward {
            layer.forward(&mut ctx, zv, av)?
        } else {
            layer.inverse(&mut ctx, zv, av)?
        };
        Ok(tape.value(out).clone().reshape(z.shape())?)
    }

    /// Folds batch statistics from a training pass into the running
    /// statistics of every normalization layer.
    pub fn update_running_stats(&mut self, stats: Vec<(ParamId, Tensor)>) {
        let m = self.config.bn_momentum;
        for (id, batch) in stats {
            let old = self.params.get(id);
            let new = Tensor::from_fn(old.shape(), |i| (1.0 - m) * old.data()[i] + m * batch.data()[i]);
            self.params.set(id, new);
        }
    }

    /// Same architecture, parameters copied by name from `params`.
    pub(crate) fn with_params(spec: GraphSpec, config: FlowConfig, params: ParamStore) -> Result<Self, FlowError> {
        let mut model = FlowModel::new(spec, config, 0);
        if params.len() != model.params.len() {
            return Err(FlowError::Malformed(format!(
                "expected {} parameters, found {}",
                model.params.len(),
                params.len()
            )));
        }
        for entry in params.entries() {
            let id = model
                .params
                .id_of(&entry.name)
                .ok_or_else(|| FlowError::Malformed(format!("unknown parameter {}", entry.name)))?;
            if model.params.get(id).shape() != entry.value.shape() {
                return Err(FlowError::Malformed(format!("shape mismatch for {}", entry.name)));
            }
            model.params.set(id, entry.value.clone());
        }
        Ok(model)
    }

    /// Training-mode context helper: binds the parameters differentiably.
    pub fn bind<'t>(&self, tape: &'t mut Tape, mode: Mode) -> Result<Ctx<'t>, FlowError> {
        Ok(Ctx::differentiable(tape, &self.params, mode)?)
    }
}
