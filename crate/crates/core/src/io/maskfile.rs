//! `TCKT` binary mask files.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "TCKT" | version: u32 | layer_count: u32
//! per layer:
//!   name_len: u16 | name: utf-8 | ndims: u8 | dims: u32 × ndims | tau: u64
//!   bitset: ceil(len / 8) bytes, bit i of the layer at byte i/8, bit i%8
//! ```
//!
//! Unused high bits of the last bitset byte must be zero, and the popcount
//! of every bitset must equal its `tau`.

use std::path::Path;

use super::bytes::Reader;
use crate::error::{Error, ParseError, ParseErrorKind, Result};
use crate::pruning::{LayerMask, Mask};

pub const MASK_MAGIC: &[u8; 4] = b"TCKT";
pub const MASK_VERSION: u32 = 1;

pub fn encode_mask(mask: &Mask) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MASK_MAGIC);
    out.extend(MASK_VERSION.to_le_bytes());
    out.extend((mask.len() as u32).to_le_bytes());
    for layer in mask.layers() {
        let name = layer.name().as_bytes();
        out.extend((name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.push(layer.dims().len() as u8);
        for &d in layer.dims() {
            out.extend((d as u32).to_le_bytes());
        }
        out.extend((layer.tau() as u64).to_le_bytes());
        let nbytes = layer.len().div_ceil(8);
        let words = layer.words();
        out.extend((0..nbytes).map(|i| (words[i / 8] >> ((i % 8) * 8)) as u8));
    }
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<Mask, ParseError> {
    let mut r = Reader::new("tckt", bytes);
    let magic = r.take(4)?;
    if magic != MASK_MAGIC {
        return Err(r.error(
            0,
            ParseErrorKind::BadTag {
                expected: "TCKT".into(),
                actual: String::from_utf8_lossy(magic).into_owned(),
            },
        ));
    }
    let version = r.u32_le()?;
    if version != MASK_VERSION {
        return Err(r.error(
            4,
            ParseErrorKind::Version {
                found: version,
                supported: MASK_VERSION,
            },
        ));
    }
    let count = r.u32_le()? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_at = r.pos();
        let name_len = r.u16_le()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| r.error(name_at + 2, ParseErrorKind::Invalid("layer name is not utf-8".into())))?
            .to_string();
        let ndims = r.u8()? as usize;
        let mut dims = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            dims.push(r.u32_le()? as usize);
        }
        let tau_at = r.pos();
        let tau = r.u64_le()? as usize;
        let mut layer = LayerMask::zeros(name, dims);
        let bits_at = r.pos();
        let bits = r.take(layer.len().div_ceil(8))?;
        for (byte_idx, &byte) in bits.iter().enumerate() {
            for bit in 0..8 {
                if byte >> bit & 1 == 1 {
                    let i = byte_idx * 8 + bit;
                    if i >= layer.len() {
                        return Err(r.error(
                            bits_at + byte_idx,
                            ParseErrorKind::Invalid("nonzero padding bits".into()),
                        ));
                    }
                    layer.set(i, true);
                }
            }
        }
        if layer.tau() != tau {
            return Err(r.error(
                tau_at,
                ParseErrorKind::Invalid(format!("tau {tau} but bitset holds {} ones", layer.tau())),
            ));
        }
        layers.push(layer);
    }
    r.finish()?;
    Ok(Mask::new(layers))
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    std::fs::write(path, encode_mask(mask)).map_err(|e| Error::io(path, e))
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_mask(&bytes)?)
}
