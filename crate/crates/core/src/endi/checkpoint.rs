//! Parameter checkpoints.
//!
//! Little-endian binary layout:
//!
//! ```text
//! magic    8 bytes  "ENDICKPT"
//! version  u32      1
//! count    u32      number of tensors
//! per tensor:
//!   name_len u32, name (UTF-8)
//!   rank     u32 (1..=3), dims u32 × rank
//!   values   f64 × product(dims)
//! ```
//!
//! Tensors appear in the canonical parameter order.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::params::{EndiParams, PARAM_NAMES};
use super::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"ENDICKPT";
pub const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn u32_of(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Checkpoint(format!("{what} {n} does not fit in u32")))
}

pub fn encode(params: &EndiParams) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, u32_of(PARAM_NAMES.len(), "tensor count")?);
    for (name, t) in params.named() {
        put_u32(&mut out, u32_of(name.len(), "name length")?);
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, u32_of(t.shape().len(), "rank")?);
        for &d in t.shape() {
            put_u32(&mut out, u32_of(d, "dimension")?);
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<EndiParams> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    if count != PARAM_NAMES.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {count}",
            PARAM_NAMES.len()
        )));
    }
    let mut tensors = Vec::with_capacity(count);
    for expected in PARAM_NAMES {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        if name != expected {
            return Err(Error::Checkpoint(format!("expected tensor `{expected}`, found `{name}`")));
        }
        let rank = r.u32()? as usize;
        if !(1..=3).contains(&rank) {
            return Err(Error::Checkpoint(format!("{name}: rank {rank}")));
        }
        let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n.saturating_mul(8) <= bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("{name}: implausible shape {dims:?}")))?;
        let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        tensors.push(Tensor::new(dims, data).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    EndiParams::from_tensors(tensors).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save(params: &EndiParams, path: &Path) -> Result<()> {
    let bytes = encode(params)?;
    std::fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<EndiParams> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}
