//! `.grid` files: an ASCII header `GRID <ndims> <d1> ... <dn>\n` followed by
//! little-endian `f64` values in row-major order.

use std::fs;
use std::path::Path;

use super::Grid;
use crate::error::{Error, Result};

const MAGIC: &str = "GRID";
const MAX_HEADER: usize = 4096;

pub fn encode_grid(g: &Grid<f64>) -> Vec<u8> {
    let mut header = format!("{MAGIC} {}", g.ndims());
    for d in g.shape() {
        header.push_str(&format!(" {d}"));
    }
    header.push('\n');
    let mut out = header.into_bytes();
    out.reserve(g.len() * 8);
    for v in g.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_grid(bytes: &[u8]) -> Result<Grid<f64>> {
    let newline = bytes
        .iter()
        .take(MAX_HEADER)
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::MalformedHeader("header is not ASCII".into()))?;
    let mut tokens = header.split(' ');
    match tokens.next() {
        Some(MAGIC) => {}
        Some(t) if t.starts_with(MAGIC) => return Err(Error::UnsupportedVersion(t.to_string())),
        _ => return Err(Error::MalformedHeader(format!("bad magic in {header:?}"))),
    }
    let parse = |t: Option<&str>| -> Result<usize> {
        t.and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::MalformedHeader(format!("bad integer in {header:?}")))
    };
    let ndims = parse(tokens.next())?;
    if ndims == 0 {
        return Err(Error::MalformedHeader("zero dimensions".into()));
    }
    let mut shape = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        let d = parse(tokens.next())?;
        if d == 0 {
            return Err(Error::MalformedHeader("zero-sized dimension".into()));
        }
        shape.push(d);
    }
    if tokens.next().is_some() {
        return Err(Error::MalformedHeader(format!("trailing tokens in {header:?}")));
    }
    let len = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::MalformedHeader("shape overflows".into()))?;
    let payload = &bytes[newline + 1..];
    if payload.len() < len {
        return Err(Error::TruncatedPayload {
            expected: len,
            found: payload.len(),
        });
    }
    if payload.len() > len {
        return Err(Error::MalformedHeader(format!(
            "{} trailing bytes after payload",
            payload.len() - len
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Grid::new(shape, data)
}

pub fn write_grid(g: &Grid<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_grid(g)).map_err(|e| Error::io(path, e))
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<Grid<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_grid(&bytes)
}
