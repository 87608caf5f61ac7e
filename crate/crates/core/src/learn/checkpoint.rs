// SPDX-License-Identifier: Apache-2.0

//! Parameter checkpoints: `"MEBC" | u16 version | u64 seed | u32 fold |
//! u32 epoch | u64 n | n x f64`, little-endian.

use super::LearnError;

const MAGIC: &[u8; 4] = b"MEBC";
const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub fold: u32,
    pub epoch: u32,
    pub params: Vec<f64>,
}

pub fn encode_checkpoint(c: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::with_capacity(30 + 8 * c.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&c.seed.to_le_bytes());
    out.extend_from_slice(&c.fold.to_le_bytes());
    out.extend_from_slice(&c.epoch.to_le_bytes());
    out.extend_from_slice(&(c.params.len() as u64).to_le_bytes());
    for p in &c.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, LearnError> {
    let bad = |m: &str| LearnError::Checkpoint(m.to_string());
    if bytes.len() < 30 || &bytes[..4] != MAGIC {
        return Err(bad("not a checkpoint"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(bad(&format!("unknown version {version}")));
    }
    let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let n = u64_at(22) as usize;
    if bytes.len() != 30 + 8 * n {
        return Err(bad("length does not match parameter count"));
    }
    let params = bytes[30..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(Checkpoint { seed: u64_at(6), fold: u32_at(14), epoch: u32_at(18), params })
}
