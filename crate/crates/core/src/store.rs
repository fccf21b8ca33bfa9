//! Binary model/corpus containers.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic[4] | version u32 | header_len u32 | header (UTF-8 JSON)
//! | record_count u64 | { record_len u64 | record bytes }*
//! ```
//!
//! The header always carries the effective configuration and seed of the
//! run that produced the artifact. Float payloads are 32-bit little-endian.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};

pub const CORPUS_MAGIC: [u8; 4] = *b"SCBD";
pub const EMBEDDING_MAGIC: [u8; 4] = *b"SCEM";
pub const LM_MAGIC: [u8; 4] = *b"SCLM";
pub const DETECTOR_MAGIC: [u8; 4] = *b"SCDT";

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub magic: [u8; 4],
    pub version: u32,
    pub header: Value,
    pub records: Vec<Vec<u8>>,
}

impl Container {
    pub fn new(magic: [u8; 4], version: u32, header: Value) -> Self {
        Container { magic, version, header, records: Vec::new() }
    }

    pub fn push(&mut self, record: Vec<u8>) {
        self.records.push(record);
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header)?;
        w.write_all(&self.magic)?;
        w.write_all(&self.version.to_le_bytes())?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        w.write_all(&(self.records.len() as u64).to_le_bytes())?;
        for r in &self.records {
            w.write_all(&(r.len() as u64).to_le_bytes())?;
            w.write_all(r)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.write_to(&mut out)?;
        Ok(out)
    }

    pub fn read_from<R: Read>(mut r: R, expected_magic: [u8; 4]) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != expected_magic {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&magic),
                String::from_utf8_lossy(&expected_magic)
            )));
        }
        let version = read_u32(&mut r)?;
        let header_len = read_u32(&mut r)? as usize;
        let mut header = vec![0u8; header_len];
        r.read_exact(&mut header)?;
        let header: Value = serde_json::from_slice(&header)?;
        let count = read_u64(&mut r)?;
        let mut records = Vec::new();
        for _ in 0..count {
            let len = read_u64(&mut r)? as usize;
            let mut rec = vec![0u8; len];
            r.read_exact(&mut rec)?;
            records.push(rec);
        }
        Ok(Container { magic, version, header, records })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path, expected_magic: [u8; 4]) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::read_from(bytes.as_slice(), expected_magic)
    }

    pub fn expect_version(&self, supported: u32) -> Result<()> {
        if self.version != supported {
            return Err(Error::Format(format!(
                "unsupported version {} (expected {supported})",
                self.version
            )));
        }
        Ok(())
    }

    pub fn record(&self, i: usize) -> Result<&[u8]> {
        self.records
            .get(i)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Format(format!("missing record {i}")))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Row-major f32 little-endian encoding.
pub fn encode_f32(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_f32(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(4) {
        return Err(Error::Format(format!("float blob length {} not a multiple of 4", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

/// Rounds every value through f32 so in-memory parameters equal what a
/// save/load cycle would produce.
pub fn round_f32(values: &mut [f64]) {
    for v in values {
        *v = *v as f32 as f64;
    }
}
