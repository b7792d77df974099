//! Binary and CSV dumps for path batches and matrix frames.
//!
//! Binary layout: a 32-byte header (4-byte magic, `u32` version, `u64` row
//! count, `u64` values per row, 8 reserved zero bytes) followed by
//! little-endian `f64` values, row-major.

use std::io::{self, Read, Write};

use crate::error::{Result, SpectralError};
use crate::fractional_noise::GaussianPathBatch;

pub const PATH_MAGIC: [u8; 4] = *b"FBMP";
pub const FRAME_MAGIC: [u8; 4] = *b"MATF";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DumpHeader {
    pub magic: [u8; 4],
    pub version: u32,
    pub count: u64,
    pub nodes: u64,
}

impl DumpHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&self.magic);
        out[4..8].copy_from_slice(&self.version.to_le_bytes());
        out[8..16].copy_from_slice(&self.count.to_le_bytes());
        out[16..24].copy_from_slice(&self.nodes.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8; HEADER_LEN]) -> Self {
        let mut magic = [0u8; 4];
        magic.copy_from_slice(&bytes[0..4]);
        Self {
            magic,
            version: u32::from_le_bytes(bytes[4..8].try_into().unwrap()),
            count: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
            nodes: u64::from_le_bytes(bytes[16..24].try_into().unwrap()),
        }
    }
}

pub fn write_binary<W: Write>(
    mut w: W,
    magic: [u8; 4],
    count: usize,
    nodes: usize,
    values: &[f64],
) -> io::Result<()> {
    assert_eq!(values.len(), count * nodes);
    let header = DumpHeader {
        magic,
        version: FORMAT_VERSION,
        count: count as u64,
        nodes: nodes as u64,
    };
    w.write_all(&header.to_bytes())?;
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_binary<R: Read>(mut r: R, expect: [u8; 4]) -> Result<(DumpHeader, Vec<f64>)> {
    let mut hb = [0u8; HEADER_LEN];
    r.read_exact(&mut hb)?;
    let header = DumpHeader::from_bytes(&hb);
    if header.magic != expect {
        return Err(SpectralError::Shape(format!(
            "bad magic {:?}, expected {:?}",
            header.magic, expect
        )));
    }
    if header.version != FORMAT_VERSION {
        return Err(SpectralError::Shape(format!(
            "unsupported dump version {}",
            header.version
        )));
    }
    let n = (header.count * header.nodes) as usize;
    let mut raw = vec![0u8; n * 8];
    r.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, values))
}

/// `FBMP` dump of a path batch.
pub fn write_paths_binary<W: Write>(w: W, batch: &GaussianPathBatch) -> io::Result<()> {
    write_binary(w, PATH_MAGIC, batch.count(), batch.width(), batch.values())
}

/// CSV with header `path_id,t,value`. Increment batches are keyed by the left node.
pub fn write_paths_csv<W: Write>(mut w: W, batch: &GaussianPathBatch) -> io::Result<()> {
    writeln!(w, "path_id,t,value")?;
    for (i, path) in batch.iter().enumerate() {
        for (k, v) in path.iter().enumerate() {
            writeln!(w, "{},{},{}", i, batch.grid.node(k), v)?;
        }
    }
    Ok(())
}
