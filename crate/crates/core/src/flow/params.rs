use std::collections::HashMap;

use crate::numeric::{Real, SeededRng, Tape, Tensor, TensorError, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub value: Tensor,
    /// Running statistics are stored here too but never receive gradients.
    pub trainable: bool,
}

/// Ordered, named parameter table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: String, value: Tensor, trainable: bool) -> ParamId {
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push(ParamEntry {
            name,
            value,
            trainable,
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn set(&mut self, id: ParamId, value: Tensor) {
        assert_eq!(self.entries[id.0].value.shape(), value.shape());
        self.entries[id.0].value = value;
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.entries[i].value)
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).map(|&i| &mut self.entries[i].value)
    }

    pub fn trainable(&self) -> impl Iterator<Item = (ParamId, &ParamEntry)> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.trainable)
            .map(|(i, e)| (ParamId(i), e))
    }

    /// Number of trainable scalars.
    pub fn trainable_len(&self) -> usize {
        self.trainable().map(|(_, e)| e.value.len()).sum()
    }
}

/// Gaussian init with standard deviation `1/sqrt(fan_in)`.
pub(crate) fn scaled_normal(shape: &[usize], fan_in: usize, rng: &mut SeededRng) -> Tensor {
    let std = 1.0 / (fan_in.max(1) as Real).sqrt();
    Tensor::from_fn(shape, |_| std * rng.normal())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in normalization layers; statistics are collected.
    Train,
    /// Frozen running statistics.
    Eval,
}

/// Parameters bound onto a tape for one forward or inverse pass.
pub struct Ctx<'t> {
    pub tape: &'t mut Tape,
    pub mode: Mode,
    vars: Vec<Var>,
    batch_stats: Vec<(ParamId, Tensor)>,
}

impl<'t> Ctx<'t> {
    /// Binds trainable entries as differentiable parameters.
    pub fn differentiable(tape: &'t mut Tape, store: &ParamStore, mode: Mode) -> Result<Self, TensorError> {
        let vars = store
            .entries
            .iter()
            .map(|e| {
                if e.trainable {
                    tape.param(&e.name, e.value.clone())
                } else {
                    tape.constant(e.value.clone())
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Ctx {
            tape,
            mode,
            vars,
            batch_stats: Vec::new(),
        })
    }

    /// Binds everything as constants; nothing on the tape needs gradients.
    pub fn inference(tape: &'t mut Tape, store: &ParamStore) -> Result<Self, TensorError> {
        let vars = store
            .entries
            .iter()
            .map(|e| tape.constant(e.value.clone()))
            .collect::<Result<_, _>>()?;
        Ok(Ctx {
            tape,
            mode: Mode::Eval,
            vars,
            batch_stats: Vec::new(),
        })
    }

    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    pub(crate) fn record_stat(&mut self, id: ParamId, value: Tensor) {
        self.batch_stats.push((id, value));
    }

    /// Batch statistics gathered in [`Mode::Train`], keyed by the running
    /// statistic they update.
    pub fn take_batch_stats(&mut self) -> Vec<(ParamId, Tensor)> {
        std::mem::take(&mut self.batch_stats)
    }
}
