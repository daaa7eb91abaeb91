use crate::graph::{GraphSpec, DEFAULT_DEQUANT_SCALE};
use crate::numeric::Real;

use super::TrainError;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam_alpha: Real,
    pub adam_beta1: Real,
    pub adam_beta2: Real,
    pub adam_eps: Real,
    pub seed: u64,
    pub dequant_c: Real,
    /// Write a checkpoint every this many epochs; 0 keeps only the final one.
    pub checkpoint_every: usize,
    /// Fraction of the corpus used for training; the rest is held out.
    pub train_fraction: Real,
    /// Fill the `wall_seconds` column. Off by default so logs are
    /// reproducible byte for byte.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 256,
            adam_alpha: 0.001,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            dequant_c: DEFAULT_DEQUANT_SCALE,
            checkpoint_every: 0,
            train_fraction: 0.9,
            record_wall_time: false,
        }
    }
}

const KEYS: [&str; 11] = [
    "epochs",
    "batch_size",
    "adam_alpha",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "seed",
    "dequant_c",
    "checkpoint_every",
    "train_fraction",
    "record_wall_time",
];

impl TrainConfig {
    /// Defaults for a spec: batch 256 for `qm9lite`, 128 otherwise.
    pub fn for_spec(spec: &GraphSpec) -> Self {
        TrainConfig {
            batch_size: if spec.name == "qm9lite" { 256 } else { 128 },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        for (name, v) in [
            ("adam_alpha", self.adam_alpha),
            ("adam_eps", self.adam_eps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        for (name, v) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&v) {
                return bad(&format!("{name} must lie in [0, 1)"));
            }
        }
        if !(self.dequant_c > 0.0 && self.dequant_c < 1.0) {
            return bad("dequant_c must lie in (0, 1)");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return bad("train_fraction must lie in (0, 1]");
        }
        Ok(())
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), TrainError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, TrainError> {
            value
                .parse()
                .map_err(|_| TrainError::Config(format!("invalid value {value:?} for {key}")))
        }
        match key {
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "adam_alpha" => self.adam_alpha = parse(key, value)?,
            "adam_beta1" => self.adam_beta1 = parse(key, value)?,
            "adam_beta2" => self.adam_beta2 = parse(key, value)?,
            "adam_eps" => self.adam_eps = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "dequant_c" => self.dequant_c = parse(key, value)?,
            "checkpoint_every" => self.checkpoint_every = parse(key, value)?,
            "train_fraction" => self.train_fraction = parse(key, value)?,
            "record_wall_time" => self.record_wall_time = parse(key, value)?,
            _ => return Err(TrainError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are ignored; keys that belong to other tools are returned
    /// untouched so callers can route them.
    pub fn apply_text(&mut self, text: &str) -> Result<Vec<(String, String)>, TrainError> {
        let mut rest = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(TrainError::Config(format!("line {}: expected key=value", n + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if KEYS.contains(&k) {
                self.set(k, v)?;
            } else {
                rest.push((k.to_string(), v.to_string()));
            }
        }
        Ok(rest)
    }

    pub fn to_text(&self) -> String {
        format!(
            "epochs = {}\nbatch_size = {}\nadam_alpha = {}\nadam_beta1 = {}\nadam_beta2 = {}\nadam_eps = {}\n\
             seed = {}\ndequant_c = {}\ncheckpoint_every = {}\ntrain_fraction = {}\nrecord_wall_time = {}\n",
            self.epochs,
            self.batch_size,
            self.adam_alpha,
            self.adam_beta1,
            self.adam_beta2,
            self.adam_eps,
            self.seed,
            self.dequant_c,
            self.checkpoint_every,
            self.train_fraction,
            self.record_wall_time,
        )
    }
}
