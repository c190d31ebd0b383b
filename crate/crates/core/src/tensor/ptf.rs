//! Portable tensor file (PTF).
//!
//! ```text
//! PTF1 <f32|f64> <rank> <d1> ... <dk>\n
//! <row-major little-endian IEEE-754 payload>
//! ```
//!
//! Reading converts the stored dtype to the requested element type.

use std::fs;
use std::path::Path;

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

const MAGIC: &str = "PTF1";

pub fn to_bytes<T: Scalar>(t: &Tensor<T>) -> Vec<u8> {
    let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
    let header = format!("{MAGIC} {} {} {}\n", T::DTYPE, t.rank(), dims.join(" "));
    let mut out = Vec::with_capacity(header.len() + t.len() * T::BYTES);
    out.extend_from_slice(header.as_bytes());
    for &v in t.data() {
        v.write_le(&mut out);
    }
    out
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

pub fn from_bytes<T: Scalar>(bytes: &[u8]) -> Result<Tensor<T>> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| corrupt("PTF header has no terminating newline"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| corrupt("PTF header is not ASCII"))?;
    let mut fields = header.split(' ');
    if fields.next() != Some(MAGIC) {
        return Err(corrupt("missing PTF1 magic"));
    }
    let dtype = fields.next().ok_or_else(|| corrupt("PTF header lacks dtype"))?;
    let rank: usize = fields
        .next()
        .and_then(|r| r.parse().ok())
        .ok_or_else(|| corrupt("PTF header lacks a valid rank"))?;
    let shape: Vec<usize> = fields
        .map(|d| d.parse().map_err(|_| corrupt(format!("bad PTF extent `{d}`"))))
        .collect::<Result<_>>()?;
    if shape.len() != rank || rank == 0 {
        return Err(corrupt(format!(
            "PTF rank {rank} does not match {} listed extents",
            shape.len()
        )));
    }
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| corrupt("PTF shape overflows"))?;
    let payload = &bytes[nl + 1..];
    let values: Vec<T> = match dtype {
        "f32" => decode::<f32, T>(payload, count)?,
        "f64" => decode::<f64, T>(payload, count)?,
        other => return Err(corrupt(format!("unknown PTF dtype `{other}`"))),
    };
    Tensor::from_vec(&shape, values).map_err(|e| corrupt(e.to_string()))
}

fn decode<S: Scalar, T: Scalar>(payload: &[u8], count: usize) -> Result<Vec<T>> {
    let expected = count * S::BYTES;
    if payload.len() != expected {
        return Err(corrupt(format!(
            "PTF payload holds {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    Ok(payload
        .chunks_exact(S::BYTES)
        .map(|c| T::of(S::read_le(c).as_f64()))
        .collect())
}

pub fn write<T: Scalar>(path: &Path, t: &Tensor<T>) -> Result<()> {
    fs::write(path, to_bytes(t))?;
    Ok(())
}

pub fn read<T: Scalar>(path: &Path) -> Result<Tensor<T>> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    from_bytes(&bytes)
}
