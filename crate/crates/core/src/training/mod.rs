//! Maximum-likelihood training of the flow.

mod adam;
mod config;
mod loss;
mod train;

pub use adam::Adam;
pub use config::TrainConfig;
pub use loss::{nll_fixed, nll_loss, nll_on_tape, nll_value, LossEval};
pub use train::{
    load_train_state, metrics_csv, save_train_state, split_indices, train, EpochMetrics, TrainState,
    METRICS_HEADER,
};

use crate::flow::FlowError;
use crate::graph::GraphError;
use crate::numeric::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("config: {0}")]
    Config(String),
    #[error("gradient for {name} has shape {got:?}, parameter has {expected:?}")]
    GradientShape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("training state: {0}")]
    State(String),
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        TrainError::Flow(FlowError::Numeric(e))
    }
}
