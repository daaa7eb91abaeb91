//! Binary checkpoint files.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! "GNVP" | version u32 | spec | config | stage order u8 | param table | state blob | crc32 u32
//! ```
//!
//! Parameter values are always stored as 64-bit floats. The state blob is
//! opaque here; the training loop stores its optimizer state in it. The CRC
//! covers every preceding byte.

use std::path::Path;

use crate::chem::Element;
use crate::graph::GraphSpec;
use crate::numeric::{Real, Tensor};

use super::params::ParamStore;
use super::{FlowConfig, FlowError, FlowModel};

const MAGIC: &[u8; 4] = b"GNVP";
pub const CHECKPOINT_VERSION: u32 = 1;
/// Node-feature stage runs before the adjacency stage in the forward pass.
const NODE_STAGE_FIRST: u8 = 0;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("length fits in u32"));
    }
    fn str(&mut self, s: &str) {
        self.len(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FlowError> {
        let end = self.pos.checked_add(n).ok_or(FlowError::Truncated)?;
        if end > self.buf.len() {
            return Err(FlowError::Truncated);
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, FlowError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, FlowError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, FlowError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, FlowError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Result<usize, FlowError> {
        Ok(self.u32()? as usize)
    }
    fn str(&mut self) -> Result<String, FlowError> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| FlowError::Malformed("invalid utf-8".into()))
    }
}

fn write_spec(w: &mut Writer, spec: &GraphSpec) {
    w.str(&spec.name);
    w.len(spec.num_nodes);
    w.len(spec.atoms.len());
    for a in &spec.atoms {
        w.str(a.symbol());
    }
    w.u8(spec.max_bond_order);
}

fn read_spec(r: &mut Reader) -> Result<GraphSpec, FlowError> {
    let name = r.str()?;
    let num_nodes = r.len()?;
    let count = r.len()?;
    let mut atoms = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let sym = r.str()?;
        atoms.push(
            sym.parse::<Element>()
                .map_err(|_| FlowError::Malformed(format!("unknown element {sym:?}")))?,
        );
    }
    let max_bond_order = r.u8()?;
    if num_nodes == 0 || atoms.is_empty() || !(1..=3).contains(&max_bond_order) {
        return Err(FlowError::Malformed("invalid graph spec".into()));
    }
    Ok(GraphSpec::new(&name, num_nodes, atoms, max_bond_order))
}

fn write_config(w: &mut Writer, c: &FlowConfig) {
    w.len(c.adjacency_layers);
    w.len(c.node_layers);
    w.len(c.mlp_hidden.len());
    for &h in &c.mlp_hidden {
        w.len(h);
    }
    w.len(c.gcn_hidden);
    w.len(c.gcn_rounds);
    w.u8(c.batch_norm as u8);
    w.f64(c.bn_eps as f64);
    w.f64(c.bn_momentum as f64);
    w.f64(c.scale_clamp as f64);
}

fn read_config(r: &mut Reader) -> Result<FlowConfig, FlowError> {
    let adjacency_layers = r.len()?;
    let node_layers = r.len()?;
    let n = r.len()?;
    let mlp_hidden = (0..n).map(|_| r.len()).collect::<Result<Vec<_>, _>>()?;
    Ok(FlowConfig {
        adjacency_layers,
        node_layers,
        mlp_hidden,
        gcn_hidden: r.len()?,
        gcn_rounds: r.len()?,
        batch_norm: r.u8()? != 0,
        bn_eps: r.f64()? as Real,
        bn_momentum: r.f64()? as Real,
        scale_clamp: r.f64()? as Real,
    })
}

fn encode(model: &FlowModel, state: Option<&[u8]>) -> Vec<u8> {
    let mut w = Writer::default();
    w.0.extend_from_slice(MAGIC);
    w.u32(CHECKPOINT_VERSION);
    write_spec(&mut w, model.spec());
    write_config(&mut w, model.config());
    w.u8(NODE_STAGE_FIRST);
    let entries = model.params().entries();
    w.len(entries.len());
    for e in entries {
        w.str(&e.name);
        w.u8(e.trainable as u8);
        w.len(e.value.rank());
        for &d in e.value.shape() {
            w.u64(d as u64);
        }
        for &v in e.value.data() {
            w.f64(v as f64);
        }
    }
    let state = state.unwrap_or(&[]);
    w.u64(state.len() as u64);
    w.0.extend_from_slice(state);
    let crc = crc32fast::hash(&w.0);
    w.u32(crc);
    w.0
}

fn decode(bytes: &[u8], expected: Option<&GraphSpec>) -> Result<(FlowModel, Vec<u8>), FlowError> {
    let parsed = parse(bytes, expected);
    let intact = bytes.len() >= 8 && {
        let (body, crc) = bytes.split_at(bytes.len() - 4);
        crc32fast::hash(body) == u32::from_le_bytes(crc.try_into().unwrap())
    };
    match parsed {
        Err(e @ (FlowError::BadMagic | FlowError::Version { .. } | FlowError::Truncated)) => Err(e),
        _ if !intact => Err(FlowError::Checksum),
        other => other,
    }
}

fn parse(bytes: &[u8], expected: Option<&GraphSpec>) -> Result<(FlowModel, Vec<u8>), FlowError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4).map_err(|_| FlowError::BadMagic)? != MAGIC {
        return Err(FlowError::BadMagic);
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(FlowError::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let spec = read_spec(&mut r)?;
    if let Some(want) = expected {
        if *want != spec {
            return Err(FlowError::SpecMismatch {
                expected: describe(want),
                found: describe(&spec),
            });
        }
    }
    let config = read_config(&mut r)?;
    if r.u8()? != NODE_STAGE_FIRST {
        return Err(FlowError::Malformed("unsupported stage order".into()));
    }
    let count = r.len()?;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let name = r.str()?;
        let trainable = r.u8()? != 0;
        let rank = r.len()?;
        let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let len = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or(FlowError::Truncated)?;
        if len.checked_mul(8).is_none_or(|b| b > bytes.len()) {
            return Err(FlowError::Truncated);
        }
        let data = (0..len).map(|_| r.f64().map(|v| v as Real)).collect::<Result<Vec<_>, _>>()?;
        let value = Tensor::new(shape, data).map_err(|e| FlowError::Malformed(e.to_string()))?;
        if params.id_of(&name).is_some() {
            return Err(FlowError::Malformed(format!("duplicate parameter {name}")));
        }
        params.add(name, value, trainable);
    }
    let state_len = r.u64()? as usize;
    let state = r.take(state_len)?.to_vec();
    r.u32()?;
    if r.pos != bytes.len() {
        return Err(FlowError::Malformed("trailing bytes".into()));
    }
    Ok((FlowModel::with_params(spec, config, params)?, state))
}

fn describe(spec: &GraphSpec) -> String {
    let atoms: Vec<&str> = spec.atoms.iter().map(|a| a.symbol()).collect();
    format!(
        "{} (N={}, atoms={}, max bond order {})",
        spec.name,
        spec.num_nodes,
        atoms.join(","),
        spec.max_bond_order
    )
}

pub fn save_checkpoint(model: &FlowModel, path: impl AsRef<Path>) -> Result<(), FlowError> {
    save_checkpoint_with_state(model, None, path)
}

pub fn save_checkpoint_with_state(
    model: &FlowModel,
    state: Option<&[u8]>,
    path: impl AsRef<Path>,
) -> Result<(), FlowError> {
    std::fs::write(path, encode(model, state))?;
    Ok(())
}

/// Loads a model, failing unless the stored spec equals `spec`.
pub fn load_checkpoint(path: impl AsRef<Path>, spec: &GraphSpec) -> Result<FlowModel, FlowError> {
    Ok(decode(&std::fs::read(path)?, Some(spec))?.0)
}

/// Loads a model and its state blob (empty when none was saved). With
/// `spec = None` the stored spec is accepted as is.
pub fn load_checkpoint_with_state(
    path: impl AsRef<Path>,
    spec: Option<&GraphSpec>,
) -> Result<(FlowModel, Vec<u8>), FlowError> {
    decode(&std::fs::read(path)?, spec)
}
