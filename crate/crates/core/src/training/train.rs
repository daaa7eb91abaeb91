use std::path::Path;
use std::time::Instant;

use crate::flow::{load_checkpoint_with_state, save_checkpoint_with_state, FlowError, FlowModel};
use crate::graph::{GraphSpec, MolecularGraph};
use crate::numeric::{Real, SeededRng, Tensor, TensorError};

use super::{nll_loss, Adam, TrainConfig, TrainError};

/// Everything needed to continue a run exactly where it stopped. Epoch `e`
/// draws its shuffle and noise from `SeededRng::new(seed).split(e)`, so the
/// seed and epoch counter stand in for the generator state.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub model: FlowModel,
    pub adam: Adam,
    /// Last completed epoch.
    pub epoch: usize,
    pub seed: u64,
}

impl TrainState {
    pub fn new(model: FlowModel, config: &TrainConfig) -> Self {
        let adam = Adam::new(model.params(), config);
        TrainState {
            model,
            adam,
            epoch: 0,
            seed: config.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean per-molecule loss over the epoch's minibatches.
    pub mean_nll: Real,
    pub sigma: Real,
    pub wall_seconds: Option<f64>,
}

pub const METRICS_HEADER: &str = "epoch,mean_nll,sigma,wall_seconds";

/// Metrics log as CSV, with a comment line noting the omitted constant.
pub fn metrics_csv(rows: &[EpochMetrics], latent_dim: usize, c: Real) -> String {
    let mut out = format!(
        "# mean_nll excludes the constant -D*ln(c) dequantization term (D={latent_dim}, c={c})\n{METRICS_HEADER}\n"
    );
    for r in rows {
        let wall = r.wall_seconds.map(|w| format!("{w:.3}")).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", r.epoch, r.mean_nll, r.sigma, wall));
    }
    out
}

/// Seeded split of `0..n` into (train, held-out) index lists, both sorted.
pub fn split_indices(n: usize, train_fraction: Real, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    SeededRng::new(seed).split(u64::MAX).shuffle(&mut idx);
    let k = ((n as Real * train_fraction).round() as usize).clamp(1.min(n), n);
    let (mut a, mut b) = (idx[..k].to_vec(), idx[k..].to_vec());
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

fn is_non_finite(e: &TrainError) -> bool {
    matches!(e, TrainError::Flow(FlowError::Numeric(TensorError::NonFinite { .. })))
}

/// Runs epochs `state.epoch + 1 ..= config.epochs`. `on_epoch` sees the
/// state after each epoch (for checkpointing and logging).
pub fn train(
    state: &mut TrainState,
    graphs: &[MolecularGraph],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&TrainState, &EpochMetrics) -> Result<(), TrainError>,
) -> Result<Vec<EpochMetrics>, TrainError> {
    config.validate()?;
    if graphs.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let base = SeededRng::new(state.seed);
    let mut log = Vec::new();
    for epoch in state.epoch + 1..=config.epochs {
        let started = Instant::now();
        let mut rng = base.split(epoch as u64);
        let mut order: Vec<usize> = (0..graphs.len()).collect();
        rng.shuffle(&mut order);
        let mut batches: Vec<&[usize]> = order.chunks(config.batch_size).collect();
        // a lone trailing sample gives degenerate batch statistics
        if batches.len() > 1 && batches.last().unwrap().len() == 1 {
            batches.pop();
            let n = batches.len();
            batches[n - 1] = &order[(n - 1) * config.batch_size..];
        }
        let mut total = 0.0;
        for (b, idx) in batches.iter().enumerate() {
            let batch: Vec<MolecularGraph> = idx.iter().map(|&i| graphs[i].clone()).collect();
            let eval = nll_loss(&state.model, &batch, config.dequant_c, &mut rng).map_err(|e| {
                if is_non_finite(&e) {
                    TrainError::NonFiniteLoss { epoch, batch: b }
                } else {
                    e
                }
            })?;
            if !eval.value.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: b });
            }
            state.adam.step(state.model.params_mut(), &eval.gradients)?;
            state.model.update_running_stats(eval.batch_stats);
            total += eval.value * idx.len() as Real;
        }
        state.epoch = epoch;
        let metrics = EpochMetrics {
            epoch,
            mean_nll: total / graphs.len() as Real,
            sigma: state.model.sigma(),
            wall_seconds: config.record_wall_time.then(|| started.elapsed().as_secs_f64()),
        };
        log::info!("epoch {epoch}: mean nll {:.4}, sigma {:.4}", metrics.mean_nll, metrics.sigma);
        on_epoch(state, &metrics)?;
        log.push(metrics);
    }
    Ok(log)
}

const STATE_VERSION: u32 = 1;

fn encode_state(state: &TrainState) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&STATE_VERSION.to_le_bytes());
    for v in [state.epoch as u64, state.seed, state.adam.step] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in [state.adam.alpha, state.adam.beta1, state.adam.beta2, state.adam.eps] {
        out.extend_from_slice(&(v as f64).to_le_bytes());
    }
    out.extend_from_slice(&(state.adam.first.len() as u64).to_le_bytes());
    for t in state.adam.first.iter().chain(&state.adam.second) {
        for &v in t.data() {
            out.extend_from_slice(&(v as f64).to_le_bytes());
        }
    }
    out
}

fn decode_state(model: FlowModel, blob: &[u8]) -> Result<TrainState, TrainError> {
    let bad = || TrainError::State("malformed optimizer state".into());
    if blob.len() < 4 || u32::from_le_bytes(blob[..4].try_into().unwrap()) != STATE_VERSION {
        return Err(TrainError::State("checkpoint holds no optimizer state".into()));
    }
    let mut pos = 4;
    let mut next = || -> Result<[u8; 8], TrainError> {
        let b: [u8; 8] = blob.get(pos..pos + 8).ok_or_else(bad)?.try_into().unwrap();
        pos += 8;
        Ok(b)
    };
    let epoch = u64::from_le_bytes(next()?) as usize;
    let seed = u64::from_le_bytes(next()?);
    let step = u64::from_le_bytes(next()?);
    let mut hyper = [0.0; 4];
    for h in &mut hyper {
        *h = f64::from_le_bytes(next()?) as Real;
    }
    let count = u64::from_le_bytes(next()?) as usize;
    let shapes: Vec<Vec<usize>> = model.params().trainable().map(|(_, e)| e.value.shape().to_vec()).collect();
    if count != shapes.len() {
        return Err(bad());
    }
    let mut read = |shape: &[usize]| -> Result<Tensor, TrainError> {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| next().map(|b| f64::from_le_bytes(b) as Real))
            .collect::<Result<Vec<_>, _>>()?;
        Tensor::new(shape.to_vec(), data).map_err(|_| bad())
    };
    let first = shapes.iter().map(|s| read(s)).collect::<Result<Vec<_>, _>>()?;
    let second = shapes.iter().map(|s| read(s)).collect::<Result<Vec<_>, _>>()?;
    Ok(TrainState {
        model,
        adam: Adam {
            alpha: hyper[0],
            beta1: hyper[1],
            beta2: hyper[2],
            eps: hyper[3],
            step,
            first,
            second,
        },
        epoch,
        seed,
    })
}

/// Checkpoint holding the model and the optimizer state.
pub fn save_train_state(state: &TrainState, path: impl AsRef<Path>) -> Result<(), TrainError> {
    save_checkpoint_with_state(&state.model, Some(&encode_state(state)), path)?;
    Ok(())
}

pub fn load_train_state(path: impl AsRef<Path>, spec: Option<&GraphSpec>) -> Result<TrainState, TrainError> {
    let (model, blob) = load_checkpoint_with_state(path, spec)?;
    decode_state(model, &blob)
}
