//! Binary model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "DTRXMDL\0"
//! version    u32      1
//! config     8 × u32  num_symbols, bits_per_symbol, d_model, heads,
//!                     blocks, ffn, flags (bit 0 residual, bit 1 lambda),
//!                     activation (0 relu, 1 sigmoid)
//! count      u32      number of tensors
//! table      count ×  { name_len u16, name utf-8, ndims u8, dims ndims × u32 }
//! payload    f64 × Σ  parameter values in table order
//! checksum   u32      CRC-32 of every preceding byte
//! ```

use std::path::Path;

use thiserror::Error;

use super::{Activation, ReceiverConfig, ReceiverError, ReceiverModel};
use crate::autodiff::Tensor;

pub const MAGIC: &[u8; 8] = b"DTRXMDL\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("model file truncated at byte {0}")]
    Truncated(usize),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("bad shape table: {0}")]
    ShapeTable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn encode_model(model: &ReceiverModel) -> Vec<u8> {
    let c = model.config();
    let mut out = Vec::with_capacity(64 + model.num_scalars() * 8);
    out.extend_from_slice(MAGIC);
    let flags = c.residual as u32 | (c.learnable_lambda as u32) << 1;
    let act = match c.activation {
        Activation::Relu => 0u32,
        Activation::Sigmoid => 1,
    };
    for v in [
        VERSION,
        c.num_symbols as u32,
        c.bits_per_symbol as u32,
        c.d_model as u32,
        c.heads as u32,
        c.blocks as u32,
        c.ffn as u32,
        flags,
        act,
        model.params().len() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for (name, t) in model.names().iter().zip(model.params()) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for t in model.params() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFileError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(ModelFileError::Truncated(self.buf.len()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ModelFileError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ModelFileError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ModelFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ModelFileError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ReceiverModel, ModelFileError> {
    if bytes.len() < MAGIC.len() || &bytes[..8] != MAGIC {
        return Err(if bytes.len() < MAGIC.len() && MAGIC.starts_with(bytes) {
            ModelFileError::Truncated(bytes.len())
        } else {
            ModelFileError::BadMagic
        });
    }
    let mut r = Reader { buf: bytes, pos: 8 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(ModelFileError::UnsupportedVersion(version));
    }
    let mut h = [0u32; 9];
    for v in &mut h {
        *v = r.u32()?;
    }
    let activation = match h[7] {
        0 => Activation::Relu,
        1 => Activation::Sigmoid,
        a => return Err(ModelFileError::ShapeTable(format!("unknown activation code {a}"))),
    };
    let config = ReceiverConfig {
        num_symbols: h[0] as usize,
        bits_per_symbol: h[1] as usize,
        d_model: h[2] as usize,
        heads: h[3] as usize,
        blocks: h[4] as usize,
        ffn: h[5] as usize,
        residual: h[6] & 1 != 0,
        learnable_lambda: h[6] & 2 != 0,
        activation,
    };
    let count = h[8] as usize;
    let mut table = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| ModelFileError::ShapeTable("tensor name is not UTF-8".into()))?
            .to_string();
        let ndims = r.u8()? as usize;
        let dims = (0..ndims).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        table.push((name, dims));
    }
    let mut named = Vec::with_capacity(table.len());
    for (name, dims) in table {
        let len = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let len = len.filter(|&l| l <= bytes.len() / 8).ok_or(ModelFileError::Truncated(bytes.len()))?;
        let data = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        let t = Tensor::new(dims, data).map_err(|e| ModelFileError::ShapeTable(format!("{name}: {e}")))?;
        named.push((name, t));
    }
    let body_end = r.pos;
    let stored = r.u32()?;
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(ModelFileError::Checksum { stored, computed });
    }
    if r.pos != bytes.len() {
        return Err(ModelFileError::ShapeTable(format!(
            "{} trailing bytes after checksum",
            bytes.len() - r.pos
        )));
    }
    ReceiverModel::from_parts(config, named).map_err(|e| match e {
        ReceiverError::ParamShape { name, expected, got } => ModelFileError::ShapeTable(format!(
            "tensor {name}: expected shape {expected:?}, found {got:?}"
        )),
        other => ModelFileError::ShapeTable(other.to_string()),
    })
}

pub fn save_model(model: &ReceiverModel, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
    std::fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ReceiverModel, ModelFileError> {
    decode_model(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(lambda: bool) -> ReceiverModel {
        let cfg = ReceiverConfig {
            d_model: 8,
            heads: 2,
            blocks: 2,
            ffn: 6,
            learnable_lambda: lambda,
            activation: Activation::Sigmoid,
            ..ReceiverConfig::new(3, 2)
        };
        ReceiverModel::new(cfg, 11).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for lambda in [false, true] {
            let m = model(lambda);
            let bytes = encode_model(&m);
            let back = decode_model(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(encode_model(&back), bytes);
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let m = model(false);
        save_model(&m, &p).unwrap();
        let back = load_model(&p).unwrap();
        save_model(&back, dir.path().join("n.bin")).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(dir.path().join("n.bin")).unwrap());
    }

    #[test]
    fn truncation_rejected_everywhere() {
        let bytes = encode_model(&model(false));
        for cut in [0, 4, 8, 20, 60, bytes.len() / 2, bytes.len() - 1] {
            let e = decode_model(&bytes[..cut]).unwrap_err();
            assert!(matches!(e, ModelFileError::Truncated(_) | ModelFileError::Checksum { .. }), "{cut}: {e}");
        }
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode_model(&model(false));
        bytes[0] = b'X';
        assert!(matches!(decode_model(&bytes), Err(ModelFileError::BadMagic)));
        let mut bytes = encode_model(&model(false));
        bytes[8] = 9;
        assert!(matches!(decode_model(&bytes), Err(ModelFileError::UnsupportedVersion(9))));
    }

    #[test]
    fn payload_corruption_caught_by_checksum() {
        let mut bytes = encode_model(&model(false));
        let i = bytes.len() - 20;
        bytes[i] ^= 1;
        assert!(matches!(decode_model(&bytes), Err(ModelFileError::Checksum { .. })));
    }

    #[test]
    fn mismatched_shape_table_rejected() {
        // claim an extra feed-forward unit: the table no longer fits the
        // config even though the checksum is recomputed
        let m = model(false);
        let mut bytes = encode_model(&m);
        bytes.truncate(bytes.len() - 4);
        let ffn_at = 8 + 4 + 5 * 4;
        bytes[ffn_at] = 7;
        let crc = crc32fast::hash(&bytes);
        bytes.extend_from_slice(&crc.to_le_bytes());
        assert!(matches!(decode_model(&bytes), Err(ModelFileError::ShapeTable(_))));
    }
}
