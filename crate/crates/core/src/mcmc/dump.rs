//! Raw sample dumps for external diagnostics.
//!
//! Binary layout, all little-endian:
//!
//! | bytes | content                    |
//! |-------|----------------------------|
//! | 8     | magic `OPSMPL01`           |
//! | 4     | `u32` dimension (≥ 1)      |
//! | 8     | `u64` sample count         |
//! | 8·d·n | `f64` samples, row-major   |

use std::io::Write;

use super::SampleSet;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"OPSMPL01";
const HEADER_LEN: usize = 20;

pub fn encode_samples(samples: &SampleSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * samples.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(samples.dim as u32).to_le_bytes());
    out.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    for v in &samples.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_samples(bytes: &[u8]) -> Result<SampleSet> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Parse(format!("sample dump too short ({} bytes)", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Parse("bad sample dump magic".into()));
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    if dim == 0 {
        return Err(Error::Parse("sample dump dimension is zero".into()));
    }
    let expected = usize::try_from(count)
        .ok()
        .and_then(|c| c.checked_mul(dim))
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| Error::Parse("sample dump size overflows".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected {
        return Err(Error::Parse(format!(
            "sample dump body has {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(SampleSet { dim, data })
}

/// CSV with a `x0,...,x{d-1}` header.
pub fn write_samples_csv<W: Write>(samples: &SampleSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((0..samples.dim).map(|j| format!("x{j}")))?;
    for x in samples.iter() {
        w.write_record(x.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}
