//! Model checkpoint file, all integers and reals little-endian:
//!
//! ```text
//! magic      8 bytes  "QRCKPT\0\0"
//! version    u32      1
//! config     u32 byte length, then UTF-8 TOML of `ModelConfig`
//! blocks     u32 count, then per block:
//!              u16 name length, name bytes,
//!              u32 ndim, ndim x u64 dims,
//!              prod(dims) x f64 values (row-major)
//! ```
//!
//! Blocks include the normalisation running statistics.

use std::io::{Read, Write};
use std::path::Path;

use super::model::{ModelConfig, ModelParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"QRCKPT\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(params: &ModelParams) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let cfg = toml::to_string(&params.config).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(cfg.as_bytes());
    let mut p = params.clone();
    let blocks = p.blocks_mut();
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for b in blocks {
        out.extend_from_slice(&(b.name.len() as u16).to_le_bytes());
        out.extend_from_slice(b.name.as_bytes());
        out.extend_from_slice(&(b.shape.len() as u32).to_le_bytes());
        for &d in &b.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in b.data.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        if self.buf.len() - self.pos < n {
            return Err(format!("truncated at byte {}", self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> std::result::Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn decode_inner(buf: &[u8]) -> std::result::Result<ModelParams, String> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let len = r.u32()? as usize;
    let text = std::str::from_utf8(r.take(len)?).map_err(|e| format!("config: {e}"))?;
    let config: ModelConfig = toml::from_str(text).map_err(|e| format!("config: {e}"))?;
    let mut params = ModelParams::init(&config).map_err(|e| e.to_string())?;
    let count = r.u32()? as usize;
    let mut blocks = params.blocks_mut();
    if count != blocks.len() {
        return Err(format!("{count} blocks, model has {}", blocks.len()));
    }
    for b in blocks.iter_mut() {
        let nlen = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(nlen)?).map_err(|e| format!("block name: {e}"))?;
        if name != b.name {
            return Err(format!("expected block {}, found {name}", b.name));
        }
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u64()? as usize);
        }
        if shape != b.shape {
            return Err(format!("block {name}: shape {shape:?}, expected {:?}", b.shape));
        }
        let raw = r.take(8 * b.data.len())?;
        for (v, c) in b.data.iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(c.try_into().unwrap());
        }
    }
    drop(blocks);
    if r.pos != buf.len() {
        return Err(format!("{} trailing bytes", buf.len() - r.pos));
    }
    Ok(params)
}

pub fn decode_checkpoint(buf: &[u8]) -> Result<ModelParams> {
    decode_inner(buf).map_err(|msg| Error::Format {
        path: "<memory>".into(),
        msg,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &ModelParams) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(params)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    decode_inner(&buf).map_err(|msg| Error::Format {
        path: path.to_path_buf(),
        msg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_exact() {
        let mut cfg = ModelConfig::tiny();
        cfg.no_face_encoder = true;
        cfg.drop_finfo.sines = true;
        let mut p = ModelParams::init(&cfg).unwrap();
        p.classifier[1].norm.running_var[0] = 0.123456789;
        p.logits.b[1] = -3.5e-300;
        let back = decode_checkpoint(&encode_checkpoint(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn header_and_corruption() {
        let p = ModelParams::init(&ModelConfig::tiny()).unwrap();
        let bytes = encode_checkpoint(&p).unwrap();
        assert_eq!(&bytes[..8], b"QRCKPT\0\0");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad).is_err());
    }
}
