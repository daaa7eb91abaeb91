use std::fmt;

use gnvp_core::chem::ChemError;
use gnvp_core::flow::FlowError;
use gnvp_core::generation::GenerationError;
use gnvp_core::graph::GraphError;
use gnvp_core::latent::LatentError;
use gnvp_core::numeric::TensorError;
use gnvp_core::training::TrainError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Data,
    Numeric,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Usage => 1,
            Kind::Data => 2,
            Kind::Numeric => 3,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Kind::Usage => "usage",
            Kind::Data => "data",
            Kind::Numeric => "numeric",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Data,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Numeric,
            message: message.into(),
        }
    }
}

/// `gnvp-error: <kind>: <message>` on a single line.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flat = self.message.replace(['\n', '\r'], " ");
        write!(f, "gnvp-error: {}: {}", self.kind.label(), flat)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<ChemError> for CliError {
    fn from(e: ChemError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        CliError::numeric(e.to_string())
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::Numeric(_) | FlowError::Dimension { .. } => CliError::numeric(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Flow(f) => f.into(),
            TrainError::Config(m) => CliError::usage(m),
            TrainError::NonFiniteLoss { .. } | TrainError::GradientShape { .. } => CliError::numeric(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<GenerationError> for CliError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::Flow(f) => f.into(),
            GenerationError::Temperature(_) => CliError::usage(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<LatentError> for CliError {
    fn from(e: LatentError) -> Self {
        match e {
            LatentError::Flow(f) => f.into(),
            LatentError::Generation(g) => g.into(),
            LatentError::UnknownProperty(_) => CliError::usage(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}
