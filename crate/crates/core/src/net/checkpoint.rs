//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! "OSFE" | version u32 | k u16 | heads u16 | tensor count u32
//! per tensor: name len u16 | UTF-8 name | rank u8 | dims u32 * rank | f32 * prod(dims)
//! CRC32 of all preceding bytes (u32)
//! ```

use std::fs;
use std::path::Path;

use super::{Hyper, ModelParameters};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"OSFE";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint(params: &ModelParameters) -> Result<Vec<u8>> {
    let hyper = params.hyper();
    let mut buf = Vec::with_capacity(16 + params.param_count() * 4);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(hyper.k as u16).to_le_bytes());
    buf.extend_from_slice(&(hyper.heads as u16).to_le_bytes());
    buf.extend_from_slice(&(params.tensor_infos().len() as u32).to_le_bytes());
    for (info, values) in params.tensors() {
        let name = info.name.as_bytes();
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name);
        buf.push(info.shape.len() as u8);
        for &d in &info.shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in values {
            let v = v as f32;
            if !v.is_finite() {
                return Err(Error::Numerical(format!("tensor {} does not fit in f32", info.name)));
            }
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

pub fn save_checkpoint(params: &ModelParameters, path: &Path) -> Result<()> {
    fs::write(path, write_checkpoint(params)?)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::CorruptCheckpoint("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<ModelParameters> {
    if bytes.len() < 20 {
        return Err(Error::CorruptCheckpoint("file too short".into()));
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(Error::CorruptCheckpoint("CRC mismatch".into()));
    }

    let mut cur = Cursor { bytes: body, pos: 4 };
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CorruptCheckpoint(format!("unsupported version {version}")));
    }
    let k = cur.u16()? as usize;
    let heads = cur.u16()? as usize;
    let hyper = Hyper::with_heads(k, heads).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    let count = cur.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = cur.u16()? as usize;
        let name = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::CorruptCheckpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = cur.u8()? as usize;
        let shape = (0..rank).map(|_| cur.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::CorruptCheckpoint(format!("tensor {name} is too large")))?;
        let raw = cur.take(n.checked_mul(4).ok_or_else(|| Error::CorruptCheckpoint("size overflow".into()))?)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        tensors.push((name, shape, values));
    }
    if cur.pos != body.len() {
        return Err(Error::CorruptCheckpoint("trailing bytes after tensors".into()));
    }
    ModelParameters::from_tensors(hyper, tensors).map_err(|e| match e {
        Error::ModelShape(msg) => Error::CorruptCheckpoint(msg),
        other => other,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParameters> {
    read_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParameters {
        ModelParameters::init(Hyper::new(8).unwrap(), 11)
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let bytes = write_checkpoint(&params()).unwrap();
        let loaded = read_checkpoint(&bytes).unwrap();
        assert_eq!(write_checkpoint(&loaded).unwrap(), bytes);
        for ((_, a), (_, b)) in params().tensors().zip(loaded.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
    }

    #[test]
    fn header_layout() {
        let bytes = write_checkpoint(&params()).unwrap();
        assert_eq!(&bytes[..4], b"OSFE");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u16::from_le_bytes(bytes[8..10].try_into().unwrap()), 8);
        assert_eq!(u16::from_le_bytes(bytes[10..12].try_into().unwrap()), 2);
    }

    #[test]
    fn corruption_detected() {
        let bytes = write_checkpoint(&params()).unwrap();
        for cut in [0, 3, 19, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(read_checkpoint(&bytes[..cut]), Err(Error::CorruptCheckpoint(_))), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        flipped[100] ^= 0x40;
        assert!(matches!(read_checkpoint(&flipped), Err(Error::CorruptCheckpoint(_))));
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(matches!(read_checkpoint(&magic), Err(Error::CorruptCheckpoint(_))));
    }

    #[test]
    fn shape_guard_on_k() {
        let loaded = read_checkpoint(&write_checkpoint(&ModelParameters::zeros(Hyper::new(16).unwrap())).unwrap()).unwrap();
        assert_eq!(loaded.k(), 16);
        assert!(matches!(loaded.ensure_k(8), Err(Error::ModelShape(_))));
    }
}
