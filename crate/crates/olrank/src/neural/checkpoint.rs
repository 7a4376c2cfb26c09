//! Versioned binary parameter checkpoints.
//!
//! Layout: an 8-byte magic, a little-endian `u32` format version, the three
//! shape fields `d`, `m`, `L` as little-endian `u32`, then the flat parameter
//! vector as little-endian 64-bit reals in layer order (`W_1` row-major,
//! middle layers, `W_L`).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::network::{total_params, NetworkParams};

const MAGIC: &[u8; 8] = b"OLNRCKPT";
const VERSION: u32 = 1;

/// Serializes network parameters to `path`.
pub fn save_checkpoint(params: &NetworkParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let flat = params.as_flat();
    let mut bytes = Vec::with_capacity(8 + 4 * 4 + 8 * flat.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(params.input_dim() as u32).to_le_bytes());
    bytes.extend_from_slice(&(params.width() as u32).to_le_bytes());
    bytes.extend_from_slice(&(params.depth() as u32).to_le_bytes());
    for v in flat {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads parameters written by [`save_checkpoint`].
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<NetworkParams> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let fail = |msg: &str| Error::Validation(format!("{}: {msg}", path.display()));

    if bytes.len() < 8 + 16 {
        return Err(fail("checkpoint truncated"));
    }
    if &bytes[..8] != MAGIC {
        return Err(fail("bad checkpoint magic"));
    }
    let read_u32 = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    if read_u32(8) != VERSION {
        return Err(fail("unsupported checkpoint version"));
    }
    let input_dim = read_u32(12) as usize;
    let width = read_u32(16) as usize;
    let depth = read_u32(20) as usize;
    if depth < 2 {
        return Err(fail("bad checkpoint shape"));
    }

    let p = total_params(input_dim, width, depth);
    let body = &bytes[24..];
    if body.len() != 8 * p {
        return Err(fail("checkpoint length does not match its shape"));
    }
    let theta: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    NetworkParams::from_flat(input_dim, width, depth, theta)
}
