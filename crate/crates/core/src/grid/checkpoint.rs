//! Checkpoint format: one UTF-8 JSON header line, then the raw values as
//! little-endian f64 pairs (re, im) in row-major order. Round-trips
//! bit-exactly.

use super::{make_grid, Field, GridError, Space};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Read, Write};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub d: usize,
    pub n: usize,
    #[serde(rename = "L")]
    pub half_length: f64,
    pub nx: usize,
    pub ny: usize,
    pub space: String,
    pub time: f64,
}

pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(w: &mut W, field: &Field, time: f64) -> Result<(), GridError> {
    let grid = field.grid();
    let header = CheckpointHeader {
        version: CHECKPOINT_VERSION,
        d: grid.d(),
        n: grid.n(),
        half_length: grid.half_length(),
        nx: grid.nx(),
        ny: grid.ny(),
        space: match field.space() {
            Space::Physical => "physical".to_string(),
            Space::Spectral => "spectral".to_string(),
        },
        time,
    };
    let line = serde_json::to_string(&header)
        .map_err(|e| GridError::Checkpoint(format!("header encode: {e}")))?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(field.values().len() * 16);
    for v in field.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<(Field, CheckpointHeader), GridError> {
    let mut reader = std::io::BufReader::new(r);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: CheckpointHeader = serde_json::from_str(line.trim_end())
        .map_err(|e| GridError::Checkpoint(format!("header decode: {e}")))?;
    if header.version != CHECKPOINT_VERSION {
        return Err(GridError::Checkpoint(format!(
            "unsupported version {}",
            header.version
        )));
    }
    let space = match header.space.as_str() {
        "physical" => Space::Physical,
        "spectral" => Space::Spectral,
        other => {
            return Err(GridError::Checkpoint(format!("unknown space {other:?}")));
        }
    };
    let grid = make_grid(header.d, header.n, header.half_length, header.nx, header.ny)?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != grid.len() * 16 {
        return Err(GridError::Checkpoint(format!(
            "body has {} bytes, expected {}",
            bytes.len(),
            grid.len() * 16
        )));
    }
    let mut values = Vec::with_capacity(grid.len());
    for c in bytes.chunks_exact(16) {
        let re = f64::from_le_bytes(c[0..8].try_into().unwrap());
        let im = f64::from_le_bytes(c[8..16].try_into().unwrap());
        values.push(Complex64::new(re, im));
    }
    Ok((Field::from_values(&grid, space, values)?, header))
}
