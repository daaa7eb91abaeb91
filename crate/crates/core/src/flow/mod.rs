//! The invertible graph flow: coupling layers, conditioners, prior and
//! checkpoint files.

mod checkpoint;
mod coupling;
mod model;
mod nets;
mod params;

pub use checkpoint::{load_checkpoint, load_checkpoint_with_state, save_checkpoint, save_checkpoint_with_state, CHECKPOINT_VERSION};
pub use coupling::{AdjacencyCoupling, NodeCoupling};
pub use model::{FlowModel, GaussianPrior, LatentPoint, ReverseOrder, TapeLatent};
pub use nets::{Activation, BatchNorm, GcnRound, Linear, MlpNet, RelGcnNet};
pub use params::{Ctx, Mode, ParamEntry, ParamId, ParamStore};

use crate::graph::{GraphError, GraphSpec};
use crate::numeric::{Real, TensorError};

#[derive(Debug, thiserror::Error)]
pub enum FlowError {
    #[error(transparent)]
    Numeric(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint is for spec {found}, requested {expected}")]
    SpecMismatch { expected: String, found: String },
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("checkpoint checksum mismatch")]
    Checksum,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub adjacency_layers: usize,
    pub node_layers: usize,
    /// Hidden widths of the adjacency-coupling MLPs.
    pub mlp_hidden: Vec<usize>,
    pub gcn_hidden: usize,
    pub gcn_rounds: usize,
    pub batch_norm: bool,
    pub bn_eps: Real,
    /// Weight of the newest batch in the running statistics.
    pub bn_momentum: Real,
    pub scale_clamp: Real,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            adjacency_layers: 27,
            node_layers: 36,
            mlp_hidden: vec![128, 128],
            gcn_hidden: 64,
            gcn_rounds: 2,
            batch_norm: true,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
            scale_clamp: 5.0,
        }
    }
}

impl FlowConfig {
    /// Layer counts for a spec: 27/36 for `qm9lite`, one layer per node in
    /// each stage otherwise.
    pub fn for_spec(spec: &GraphSpec) -> Self {
        if spec.name == "qm9lite" {
            FlowConfig::default()
        } else {
            FlowConfig {
                adjacency_layers: spec.num_nodes,
                node_layers: spec.num_nodes,
                ..FlowConfig::default()
            }
        }
    }
}
