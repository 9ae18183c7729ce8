//! Binary checkpoint format (all integers and floats little-endian):
//!
//! ```text
//! magic      8 bytes  "ELRCKPT\0"
//! version    u32
//! config     7 x u64  vocab_size, context_length, num_layers, num_heads,
//!                     embed_dim, mlp_dim, seed
//! tensors    u32 count, then per tensor in layout order:
//!              u32 name length, name (UTF-8), u32 rank, rank x u64 dims,
//!              product(dims) x f64 payload
//! ```

use std::fs;
use std::path::Path;

use super::{Layout, ModelConfig, Parameters};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ELRCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode(params: &Parameters) -> Vec<u8> {
    let c = params.config();
    let mut out = Vec::with_capacity(64 + params.len() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [c.vocab_size, c.context_length, c.num_layers, c.num_heads, c.embed_dim, c.mlp_dim] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.extend_from_slice(&c.seed.to_le_bytes());
    out.extend_from_slice(&(params.layout().tensors.len() as u32).to_le_bytes());
    for (spec, values) in params.named_tensors() {
        out.extend_from_slice(&(spec.name.len() as u32).to_le_bytes());
        out.extend_from_slice(spec.name.as_bytes());
        out.extend_from_slice(&(spec.shape.len() as u32).to_le_bytes());
        for &dim in &spec.shape {
            out.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        for x in values {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::InvalidCheckpoint(format!("truncated at byte {}", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::InvalidCheckpoint("dimension overflows usize".into()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Parameters> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::InvalidCheckpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::InvalidCheckpoint(format!("unsupported version {version}")));
    }
    let config = ModelConfig {
        vocab_size: r.usize()?,
        context_length: r.usize()?,
        num_layers: r.usize()?,
        num_heads: r.usize()?,
        embed_dim: r.usize()?,
        mlp_dim: r.usize()?,
        seed: r.u64()?,
    };
    config.validate().map_err(|e| Error::InvalidCheckpoint(e.to_string()))?;
    let layout = Layout::new(&config);
    let count = r.u32()? as usize;
    if count != layout.tensors.len() {
        return Err(Error::InvalidCheckpoint(format!(
            "expected {} tensors, found {count}",
            layout.tensors.len()
        )));
    }
    let mut data = Vec::with_capacity(layout.total);
    for spec in &layout.tensors {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::InvalidCheckpoint("tensor name is not UTF-8".into()))?;
        if name != spec.name {
            return Err(Error::InvalidCheckpoint(format!("expected tensor {}, found {name}", spec.name)));
        }
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        if shape != spec.shape {
            return Err(Error::InvalidCheckpoint(format!(
                "tensor {name} has shape {shape:?}, expected {:?}",
                spec.shape
            )));
        }
        let payload = r.take(spec.len() * 8)?;
        data.extend(payload.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())));
    }
    if r.pos != bytes.len() {
        return Err(Error::InvalidCheckpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Parameters::from_parts(config, data)
}

pub fn save_checkpoint(params: &Parameters, path: &Path) -> Result<()> {
    fs::write(path, encode(params))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Parameters> {
    decode(&fs::read(path)?)
}
