use crate::flow::{Ctx, FlowModel, Mode, ParamId};
use crate::graph::{dequantize, DequantizedGraph, MolecularGraph};
use crate::numeric::{Gradients, Real, SeededRng, Tape, Tensor, Var};

use super::TrainError;

/// Loss value with its parameter gradients.
#[derive(Clone, Debug)]
pub struct LossEval {
    pub value: Real,
    pub gradients: Gradients,
    /// Batch statistics seen by normalization layers (train mode only).
    pub batch_stats: Vec<(ParamId, Tensor)>,
}

/// Mean over the batch of `-log p(z) - log|det J|`, recorded on `ctx`.
///
/// The constant `-D*ln(c)` from the dequantization scale is left out.
pub fn nll_on_tape(model: &FlowModel, ctx: &mut Ctx, graphs: &[DequantizedGraph]) -> Result<Var, TrainError> {
    let (a, x, cond) = model.batch_inputs(ctx.tape, graphs)?;
    let latent = model.forward_on_tape(ctx, a, x, cond)?;
    let logp = model.prior_logprob_sum_on_tape(ctx, &latent)?;
    let logdet = ctx.tape.sum_all(latent.logdet)?;
    let total = ctx.tape.add(logp, logdet)?;
    Ok(ctx.tape.scale(total, -1.0 / graphs.len() as Real)?)
}

/// Loss and gradients on already-dequantized graphs.
pub fn nll_fixed(model: &FlowModel, graphs: &[DequantizedGraph], mode: Mode) -> Result<LossEval, TrainError> {
    if graphs.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut tape = Tape::new();
    let mut ctx = model.bind(&mut tape, mode)?;
    let loss = nll_on_tape(model, &mut ctx, graphs)?;
    let batch_stats = ctx.take_batch_stats();
    let value = tape.value(loss).item()?;
    let gradients = tape.backward(loss)?;
    Ok(LossEval {
        value,
        gradients,
        batch_stats,
    })
}

/// Training loss on a batch with fresh dequantization noise from `rng`.
pub fn nll_loss(
    model: &FlowModel,
    batch: &[MolecularGraph],
    c: Real,
    rng: &mut SeededRng,
) -> Result<LossEval, TrainError> {
    let graphs = batch
        .iter()
        .map(|g| dequantize(g, c, rng))
        .collect::<Result<Vec<_>, _>>()?;
    nll_fixed(model, &graphs, Mode::Train)
}

/// Evaluation-mode loss without gradients.
pub fn nll_value(model: &FlowModel, graphs: &[DequantizedGraph]) -> Result<Real, TrainError> {
    if graphs.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut tape = Tape::new();
    let mut ctx = Ctx::inference(&mut tape, model.params())?;
    let loss = nll_on_tape(model, &mut ctx, graphs)?;
    Ok(tape.value(loss).item()?)
}
