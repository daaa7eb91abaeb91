//! `key = value` config files shared by all subcommands.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use gnvp_core::flow::FlowConfig;
use gnvp_core::graph::GraphSpec;
use gnvp_core::training::TrainConfig;

use crate::error::CliError;

const KEYS: [&str; 15] = [
    "num_samples",
    "temperature",
    "temps",
    "threads",
    "grid_extent",
    "grid_step",
    "property",
    "steps",
    "step_size",
    "index",
    "adjacency_layers",
    "node_layers",
    "mlp_hidden",
    "gcn_hidden",
    "gcn_rounds",
];

/// Keys of a config file that are not training keys.
#[derive(Debug, Default)]
pub struct FileSettings {
    values: BTreeMap<String, String>,
}

impl FileSettings {
    /// Reads `path` (if any), applying training keys to `train` and keeping
    /// the rest. Unknown keys are a usage error.
    pub fn load(path: Option<&Path>, train: &mut TrainConfig) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let rest = train.apply_text(&text)?;
        let mut values = BTreeMap::new();
        for (k, v) in rest {
            if !KEYS.contains(&k.as_str()) {
                return Err(CliError::usage(format!("{}: unknown key {k:?}", path.display())));
            }
            values.insert(k, v);
        }
        Ok(FileSettings { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::usage(format!("config: invalid value {v:?} for {key}")))
            })
            .transpose()
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        self.values
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|x| {
                        x.trim()
                            .parse()
                            .map_err(|_| CliError::usage(format!("config: invalid value {v:?} for {key}")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// Architecture for a new model: spec defaults with file overrides.
    pub fn flow_config(&self, spec: &GraphSpec) -> Result<FlowConfig, CliError> {
        let mut c = FlowConfig::for_spec(spec);
        if let Some(v) = self.get("adjacency_layers")? {
            c.adjacency_layers = v;
        }
        if let Some(v) = self.get("node_layers")? {
            c.node_layers = v;
        }
        if let Some(v) = self.get_list("mlp_hidden")? {
            c.mlp_hidden = v;
        }
        if let Some(v) = self.get("gcn_hidden")? {
            c.gcn_hidden = v;
        }
        if let Some(v) = self.get("gcn_rounds")? {
            c.gcn_rounds = v;
        }
        Ok(c)
    }
}

/// First defined value: flag, then file, then default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
