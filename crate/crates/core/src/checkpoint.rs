//! Versioned binary container for a model, its schema hash and,
//! optionally, the optimizer state.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"FINNCKPT"  u32 version
//! u64 len, config text        (key=value lines)
//! u64 len, schema hash        (hex text, may be empty)
//! u64 len, MLP activations    (comma separated)
//! u32 count, tensors          (parameters, then BN running statistics)
//! u8 has_optimizer
//!   f64 alpha, beta1, beta2, epsilon; u64 t
//!   u32 count, tensors        (first moments, then second moments)
//! ```
//!
//! A tensor is `u32 name_len, name, u32 ndim, u64 dims.., f64 data..`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::layers::{Activation, DenseLayer};
use crate::math::Tensor;
use crate::models::{ModelConfig, ModelGraph};
use crate::training::{AdamConfig, AdamState};

pub const MAGIC: &[u8; 8] = b"FINNCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: ModelGraph,
    pub schema_hash: String,
    pub optimizer: Option<AdamState>,
}

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

    fn text(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.extend_from_slice(s.as_bytes());
    }

    fn tensor(&mut self, name: &str, t: &Tensor) {
        self.u32(name.len() as u32);
        self.0.extend_from_slice(name.as_bytes());
        self.u32(t.shape().len() as u32);
        for &d in t.shape() {
            self.u64(d as u64);
        }
        for &x in t.data() {
            self.f64(x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("length overflows usize".into()))
    }

    fn utf8(bytes: &[u8]) -> Result<String> {
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Checkpoint("text is not UTF-8".into()))
    }

    fn text(&mut self) -> Result<String> {
        let n = self.len()?;
        Self::utf8(self.take(n)?)
    }

    fn tensor(&mut self) -> Result<(String, Tensor)> {
        let n = self.u32()? as usize;
        let name = Self::utf8(self.take(n)?)?;
        let ndim = self.u32()? as usize;
        let shape = (0..ndim).map(|_| self.len()).collect::<Result<Vec<_>>>()?;
        let len = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&l| l.checked_mul(8).is_some_and(|b| b <= self.buf.len() - self.pos))
            .ok_or_else(|| Error::Checkpoint(format!("tensor `{name}` larger than the file")))?;
        let data = (0..len).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        let t = Tensor::new(shape, data).map_err(|e| Error::Checkpoint(format!("tensor `{name}`: {e}")))?;
        Ok((name, t))
    }
}

fn activation_list(model: &ModelGraph) -> String {
    model
        .mlp_activations()
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Serializes `model` (and optionally `optimizer`) to bytes.
pub fn to_bytes(model: &ModelGraph, schema_hash: &str, optimizer: Option<&AdamState>) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.text(&model.config().to_text());
    w.text(schema_hash);
    w.text(&activation_list(model));
    let names = model.param_names();
    let params = model.params();
    let buffers = model.buffers();
    w.u32((params.len() + buffers.len()) as u32);
    for (name, t) in names.iter().zip(&params) {
        w.tensor(name, t);
    }
    for (name, t) in &buffers {
        w.tensor(name, t);
    }
    match optimizer {
        None => w.u8(0),
        Some(st) => {
            w.u8(1);
            let c = st.config;
            for v in [c.alpha, c.beta1, c.beta2, c.epsilon] {
                w.f64(v);
            }
            w.u64(st.t);
            w.u32((st.m.len() + st.g.len()) as u32);
            for (name, t) in names.iter().zip(&st.m) {
                w.tensor(&format!("m.{name}"), t);
            }
            for (name, t) in names.iter().zip(&st.g) {
                w.tensor(&format!("g.{name}"), t);
            }
        }
    }
    w.0
}

fn install(slot: &mut Tensor, name: &str, t: Tensor) -> Result<()> {
    if slot.shape() != t.shape() {
        return Err(Error::Checkpoint(format!(
            "`{name}` has shape {:?}, config implies {:?}",
            t.shape(),
            slot.shape()
        )));
    }
    *slot = t;
    Ok(())
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let config = ModelConfig::from_text(&r.text()?)?;
    let schema_hash = r.text()?;
    let acts_text = r.text()?;
    let acts: Vec<Activation> = if acts_text.is_empty() {
        Vec::new()
    } else {
        acts_text.split(',').map(str::parse).collect::<Result<_>>()?
    };
    let mut model = ModelGraph::build(config)?;
    if model.mlp_activations() != acts {
        if acts.len() != model.mlp().len() {
            return Err(Error::Checkpoint("MLP depth disagrees with config".into()));
        }
        let layers = model
            .mlp()
            .iter()
            .zip(&acts)
            .map(|(l, &a)| DenseLayer::new(l.weight().clone(), l.bias().clone(), a))
            .collect::<Result<Vec<_>>>()?;
        model.set_mlp(layers)?;
    }

    let count = r.u32()? as usize;
    let names = model.param_names();
    let n_params = names.len();
    let n_buffers = model.buffers().len();
    if count != n_params + n_buffers {
        return Err(Error::Checkpoint(format!(
            "{count} tensors stored, model needs {}",
            n_params + n_buffers
        )));
    }
    for (i, expected) in names.iter().enumerate() {
        let (name, t) = r.tensor()?;
        if &name != expected {
            return Err(Error::Checkpoint(format!("expected `{expected}`, found `{name}`")));
        }
        install(model.params_mut()[i], &name, t)?;
    }
    for i in 0..n_buffers {
        let (name, t) = r.tensor()?;
        let mut buffers = model.buffers_mut();
        let (expected, slot) = &mut buffers[i];
        if name != *expected {
            return Err(Error::Checkpoint(format!("expected `{expected}`, found `{name}`")));
        }
        install(slot, &name, t)?;
    }

    let optimizer = match r.u8()? {
        0 => None,
        1 => {
            let config = AdamConfig {
                alpha: r.f64()?,
                beta1: r.f64()?,
                beta2: r.f64()?,
                epsilon: r.f64()?,
            };
            let t = r.u64()?;
            let count = r.u32()? as usize;
            if count != 0 && count != 2 * n_params {
                return Err(Error::Checkpoint("optimizer moments do not match parameters".into()));
            }
            let mut moments = Vec::with_capacity(count);
            for _ in 0..count {
                moments.push(r.tensor()?.1);
            }
            let g = moments.split_off(count / 2);
            Some(AdamState {
                config,
                t,
                m: moments,
                g,
            })
        }
        other => return Err(Error::Checkpoint(format!("bad optimizer flag {other}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(Checkpoint {
        model,
        schema_hash,
        optimizer,
    })
}

pub fn save(path: &Path, model: &ModelGraph, schema_hash: &str, optimizer: Option<&AdamState>) -> Result<()> {
    fs::write(path, to_bytes(model, schema_hash, optimizer))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    from_bytes(&fs::read(path)?)
}

/// Loads and refuses checkpoints trained against a different schema.
pub fn load_for_schema(path: &Path, schema_hash: &str) -> Result<Checkpoint> {
    let ck = load(path)?;
    if ck.schema_hash != schema_hash {
        return Err(Error::SchemaMismatch(format!(
            "checkpoint was trained on schema {}, data uses {schema_hash}",
            ck.schema_hash
        )));
    }
    Ok(ck)
}
