//! Binary flow cache: `"HFLW"`, u32 width, u32 height (little-endian), then
//! `width·height` interleaved `(dx, dy)` f32 pairs, row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::FlowField;

pub const FLOW_MAGIC: &[u8; 4] = b"HFLW";

pub fn write_flow<W: Write>(field: &FlowField, mut out: W) -> std::io::Result<()> {
    out.write_all(FLOW_MAGIC)?;
    out.write_all(&(field.width() as u32).to_le_bytes())?;
    out.write_all(&(field.height() as u32).to_le_bytes())?;
    for (dx, dy) in field.dx().iter().zip(field.dy()) {
        out.write_all(&dx.to_le_bytes())?;
        out.write_all(&dy.to_le_bytes())?;
    }
    out.flush()
}

pub fn read_flow<R: Read>(mut input: R) -> Result<FlowField> {
    let mut header = [0u8; 12];
    input
        .read_exact(&mut header)
        .map_err(|e| Error::FlowCache(format!("truncated header: {e}")))?;
    if &header[..4] != FLOW_MAGIC {
        return Err(Error::FlowCache("bad magic".into()));
    }
    let width = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::FlowCache("dimensions overflow".into()))?;
    let mut body = Vec::new();
    input
        .read_to_end(&mut body)
        .map_err(|e| Error::FlowCache(e.to_string()))?;
    if body.len() != n * 8 {
        return Err(Error::FlowCache(format!(
            "expected {} payload bytes for {width}x{height}, found {}",
            n * 8,
            body.len()
        )));
    }
    let mut dx = Vec::with_capacity(n);
    let mut dy = Vec::with_capacity(n);
    for pair in body.chunks_exact(8) {
        dx.push(f32::from_le_bytes(pair[..4].try_into().unwrap()));
        dy.push(f32::from_le_bytes(pair[4..].try_into().unwrap()));
    }
    FlowField::new(width, height, dx, dy).map_err(|e| Error::FlowCache(e.to_string()))
}

pub fn write_flow_file(field: &FlowField, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_flow(field, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_flow_file(path: &Path) -> Result<FlowField> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_flow(BufReader::new(file))
}
