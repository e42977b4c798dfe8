//! Binary checkpoint container.
//!
//! All integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "PFLSIMCK"
//! 8       4     format version (u32) = 1
//! 12      4     vocab_size (u32)
//! 16      4     embed_dim (u32)
//! 20      4     hidden_dim (u32)
//! 24      4     seq_len (u32)
//! 28      8     parameter count n (u64)
//! 36      8·n   parameters (f64, flat layout of `ModelParams::values`)
//! 36+8n   8     FNV-1a 64 checksum of the parameter bytes (u64)
//! ```

use std::fs;
use std::path::Path;

use super::{ModelConfig, ModelError, ModelParams};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PFLSIMCK";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER: usize = 36;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn encode(params: &ModelParams) -> Vec<u8> {
    let c = params.config;
    let mut out = Vec::with_capacity(HEADER + 8 * params.len() + 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for dim in [c.vocab_size, c.embed_dim, c.hidden_dim, c.seq_len] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in &params.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let checksum = fnv1a(&out[HEADER..]);
    out.extend_from_slice(&checksum.to_le_bytes());
    out
}

pub fn decode(bytes: &[u8]) -> Result<ModelParams, ModelError> {
    let bad = |m: &str| ModelError::Checkpoint(m.to_string());
    if bytes.len() < HEADER + 8 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint (bad magic or truncated header)"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    if u32_at(8) != CHECKPOINT_VERSION {
        return Err(bad("unsupported checkpoint version"));
    }
    let config = ModelConfig {
        vocab_size: u32_at(12) as usize,
        embed_dim: u32_at(16) as usize,
        hidden_dim: u32_at(20) as usize,
        seq_len: u32_at(24) as usize,
    };
    let n = u64::from_le_bytes(bytes[28..36].try_into().unwrap()) as usize;
    if bytes.len() != HEADER + 8 * n + 8 {
        return Err(bad("length does not match parameter count"));
    }
    let body = &bytes[HEADER..HEADER + 8 * n];
    let stored = u64::from_le_bytes(bytes[HEADER + 8 * n..].try_into().unwrap());
    if fnv1a(body) != stored {
        return Err(bad("checksum mismatch"));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ModelParams::from_values(config, values)
}

pub fn save_checkpoint(path: &Path, params: &ModelParams) -> Result<(), ModelError> {
    fs::write(path, encode(params)).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams, ModelError> {
    let bytes = fs::read(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}
