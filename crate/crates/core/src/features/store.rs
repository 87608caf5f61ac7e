// SPDX-License-Identifier: Apache-2.0

//! `MEBF` feature files.
//!
//! ```text
//! "MEBF" | u16 version | u32 count
//! count x { u16 id_len | id | u8 layout | u8 ndim | ndim x u32 | u64 offset | u64 n_values }
//! payloads (f32, little-endian; offsets relative to the payload start)
//! 32-byte SHA-256 of everything before it
//! ```
//!
//! All integers are little-endian. Records are written sorted by sample id,
//! so the file bytes do not depend on the order records were supplied in.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::FeatureError;

pub const MAGIC: &[u8; 4] = b"MEBF";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureLayout {
    FlowUv,
    FlowUvs,
    RawGrayFrames,
    /// Any precomputed flat descriptor.
    Descriptor,
}

impl FeatureLayout {
    fn code(self) -> u8 {
        match self {
            FeatureLayout::FlowUv => 0,
            FeatureLayout::FlowUvs => 1,
            FeatureLayout::RawGrayFrames => 2,
            FeatureLayout::Descriptor => 3,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => FeatureLayout::FlowUv,
            1 => FeatureLayout::FlowUvs,
            2 => FeatureLayout::RawGrayFrames,
            3 => FeatureLayout::Descriptor,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub sample_id: String,
    pub layout: FeatureLayout,
    pub shape: Vec<u32>,
    pub payload: Vec<f32>,
}

impl FeatureRecord {
    pub fn new(
        sample_id: impl Into<String>,
        layout: FeatureLayout,
        shape: Vec<u32>,
        payload: Vec<f32>,
    ) -> Result<Self, FeatureError> {
        let expected: u64 = shape.iter().map(|&d| d as u64).product();
        if shape.is_empty() || expected != payload.len() as u64 {
            return Err(FeatureError::Shape(format!("shape {shape:?} for {} values", payload.len())));
        }
        Ok(FeatureRecord { sample_id: sample_id.into(), layout, shape, payload })
    }

    pub fn descriptor(sample_id: impl Into<String>, payload: Vec<f32>) -> Self {
        let n = payload.len() as u32;
        FeatureRecord { sample_id: sample_id.into(), layout: FeatureLayout::Descriptor, shape: vec![n], payload }
    }
}

pub fn encode_features(records: &[FeatureRecord]) -> Result<Vec<u8>, FeatureError> {
    let mut sorted: Vec<&FeatureRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].sample_id == w[1].sample_id) {
        return Err(FeatureError::Duplicate(w[0].sample_id.clone()));
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(sorted.len() as u32).to_le_bytes());
    let mut offset = 0u64;
    for r in &sorted {
        let id = r.sample_id.as_bytes();
        let id_len = u16::try_from(id.len()).map_err(|_| FeatureError::Shape("sample id too long".into()))?;
        let ndim = u8::try_from(r.shape.len()).map_err(|_| FeatureError::Shape("too many dimensions".into()))?;
        out.extend_from_slice(&id_len.to_le_bytes());
        out.extend_from_slice(id);
        out.push(r.layout.code());
        out.push(ndim);
        for d in &r.shape {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&offset.to_le_bytes());
        out.extend_from_slice(&(r.payload.len() as u64).to_le_bytes());
        offset += 4 * r.payload.len() as u64;
    }
    for r in &sorted {
        for x in &r.payload {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub fn write_features(path: impl AsRef<Path>, records: &[FeatureRecord]) -> Result<(), FeatureError> {
    std::fs::write(path, encode_features(records)?)?;
    Ok(())
}

#[derive(Debug, Clone)]
struct IndexEntry {
    layout: FeatureLayout,
    shape: Vec<u32>,
    offset: usize,
    n_values: usize,
}

/// A loaded feature file. Read-only after loading, so it can be shared
/// between threads.
#[derive(Debug, Clone)]
pub struct FeatureStore {
    payload: Vec<u8>,
    index: BTreeMap<String, IndexEntry>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FeatureError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| FeatureError::Format("index runs past end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FeatureError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, FeatureError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, FeatureError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, FeatureError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl FeatureStore {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FeatureError> {
        if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            return Err(FeatureError::Format("not a MEBF file".into()));
        }
        if bytes.len() < 4 + 2 + 4 + 32 {
            return Err(FeatureError::Checksum);
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != trailer {
            return Err(FeatureError::Checksum);
        }
        let mut c = Cursor { bytes: body, pos: 4 };
        let version = c.u16()?;
        if version != VERSION {
            return Err(FeatureError::UnknownVersion(version));
        }
        let count = c.u32()?;
        let mut index = BTreeMap::new();
        for _ in 0..count {
            let id_len = c.u16()? as usize;
            let id = String::from_utf8(c.take(id_len)?.to_vec())
                .map_err(|_| FeatureError::Format("sample id is not utf-8".into()))?;
            let layout = c.u8()?;
            let layout =
                FeatureLayout::from_code(layout).ok_or_else(|| FeatureError::Format(format!("layout code {layout}")))?;
            let ndim = c.u8()? as usize;
            let shape = (0..ndim).map(|_| c.u32()).collect::<Result<Vec<_>, _>>()?;
            let offset = c.u64()? as usize;
            let n_values = c.u64()? as usize;
            if index.insert(id.clone(), IndexEntry { layout, shape, offset, n_values }).is_some() {
                return Err(FeatureError::Duplicate(id));
            }
        }
        let payload = body[c.pos..].to_vec();
        for (id, e) in &index {
            if e.offset + 4 * e.n_values > payload.len() {
                return Err(FeatureError::Format(format!("payload of {id} out of range")));
            }
        }
        Ok(FeatureStore { payload, index })
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        FeatureStore::from_bytes(&std::fs::read(path)?)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    pub fn contains(&self, sample_id: &str) -> bool {
        self.index.contains_key(sample_id)
    }

    pub fn get(&self, sample_id: &str) -> Result<FeatureRecord, FeatureError> {
        let e = self.index.get(sample_id).ok_or_else(|| FeatureError::NotFound(sample_id.to_string()))?;
        let bytes = &self.payload[e.offset..e.offset + 4 * e.n_values];
        let payload = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        Ok(FeatureRecord { sample_id: sample_id.to_string(), layout: e.layout, shape: e.shape.clone(), payload })
    }

    pub fn records(&self) -> Result<Vec<FeatureRecord>, FeatureError> {
        self.ids().map(|id| self.get(id)).collect()
    }
}
