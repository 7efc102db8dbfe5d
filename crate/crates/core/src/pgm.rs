//! Binary greyscale PGM ("P5", maxval 255).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Encodes a `[h, w]` or `[1, h, w]` grid with values in `[0, 1]`.
pub fn encode_pgm(g: &Grid<f64>) -> Result<Vec<u8>> {
    if g.planes() != 1 || g.ndims() < 2 {
        return Err(Error::InvalidShape(g.shape().to_vec()));
    }
    let (h, w) = g.hw();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(g.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    Ok(out)
}

/// Decodes into a `[1, h, w]` grid scaled to `[0, 1]`.
pub fn decode_pgm(bytes: &[u8]) -> Result<Grid<f64>> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedHeader("incomplete PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(Error::MalformedHeader(format!("not a binary PGM: {}", fields[0])));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::MalformedHeader(format!("bad PGM field {s:?}")))
    };
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(Error::UnsupportedVersion(format!("PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    let raster = &bytes[(pos + 1).min(bytes.len())..];
    if raster.len() < w * h {
        return Err(Error::TruncatedPayload {
            expected: w * h,
            found: raster.len(),
        });
    }
    Grid::new(
        vec![1, h, w],
        raster[..w * h].iter().map(|&b| b as f64 / 255.0).collect(),
    )
}

pub fn write_pgm(g: &Grid<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(g)?).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Grid<f64>> {
    let path = path.as_ref();
    decode_pgm(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
