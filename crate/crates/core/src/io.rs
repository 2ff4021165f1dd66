//! Binary field files.
//!
//! A field file is a single text header line
//!
//! ```text
//! FRACFIELD v1 dim=<N> n=<n> L=<L with 17 significant digits>
//! ```
//!
//! terminated by `\n`, followed by `n^N` little-endian IEEE-754 doubles in
//! row-major order. Reading back a written file is bit-exact.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{FklError, Result};
use crate::grid::{Field, Grid};

const MAGIC: &str = "FRACFIELD";
const VERSION: &str = "v1";
const MAX_HEADER: usize = 512;

/// Formats a positive real as a plain decimal with 17 significant digits.
pub fn decimal_17(value: f64) -> String {
    if value == 0.0 {
        return format!("{:.16}", 0.0);
    }
    let magnitude = value.abs().log10().floor() as i32 + 1;
    let decimals = (17 - magnitude).max(0) as usize;
    format!("{value:.decimals$}")
}

/// The header line (without the trailing newline) for a grid.
pub fn header_line(grid: &Grid) -> String {
    format!(
        "{MAGIC} {VERSION} dim={} n={} L={}",
        grid.dim(),
        grid.points_per_axis(),
        decimal_17(grid.half_width())
    )
}

/// Serializes a field into bytes in the field file format.
pub fn encode_field(f: &Field) -> Vec<u8> {
    let header = header_line(f.grid());
    let mut out = Vec::with_capacity(header.len() + 1 + 8 * f.samples().len());
    out.extend_from_slice(header.as_bytes());
    out.push(b'\n');
    for v in f.samples() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses bytes in the field file format.
pub fn decode_field(bytes: &[u8]) -> Result<Field> {
    let newline = bytes
        .iter()
        .take(MAX_HEADER)
        .position(|&b| b == b'\n')
        .ok_or_else(|| FklError::MalformedHeader("no header line".into()))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| FklError::MalformedHeader("header is not UTF-8".into()))?;
    let grid = parse_header(header)?;
    let body = &bytes[newline + 1..];
    let expected = grid.total_points();
    if body.len() != 8 * expected {
        return Err(FklError::LengthMismatch {
            expected,
            found: body.len() / 8,
        });
    }
    let data: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8 bytes")))
        .collect();
    Field::new(grid, data)
}

fn parse_header(header: &str) -> Result<Grid> {
    let mut parts = header.split(' ');
    if parts.next() != Some(MAGIC) {
        return Err(FklError::MalformedHeader(format!("missing {MAGIC} tag")));
    }
    if parts.next() != Some(VERSION) {
        return Err(FklError::MalformedHeader("unsupported version".into()));
    }
    let mut dim = None;
    let mut n = None;
    let mut half_width = None;
    for part in parts {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| FklError::MalformedHeader(format!("bad token '{part}'")))?;
        let bad = || FklError::MalformedHeader(format!("bad value for {key}: '{value}'"));
        match key {
            "dim" => dim = Some(value.parse::<usize>().map_err(|_| bad())?),
            "n" => n = Some(value.parse::<usize>().map_err(|_| bad())?),
            "L" => half_width = Some(value.parse::<f64>().map_err(|_| bad())?),
            _ => return Err(FklError::MalformedHeader(format!("unknown key '{key}'"))),
        }
    }
    let missing = |k: &str| FklError::MalformedHeader(format!("missing {k}"));
    Grid::new(
        dim.ok_or_else(|| missing("dim"))?,
        half_width.ok_or_else(|| missing("L"))?,
        n.ok_or_else(|| missing("n"))?,
    )
}

/// Writes a field file.
pub fn write_field(f: &Field, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_field(f))?;
    w.flush()?;
    Ok(())
}

/// Reads a field file written by [`write_field`].
pub fn read_field(path: impl AsRef<Path>) -> Result<Field> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_field(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_formatting_has_17_digits() {
        assert_eq!(decimal_17(200.0), "200.00000000000000");
        assert_eq!(decimal_17(0.1), "0.10000000000000001");
        for v in [std::f64::consts::PI * 1e3, 1.0 / 3.0, 12345.678, 1e-3] {
            assert_eq!(decimal_17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn header_dim_three_rejected() {
        let mut bytes = b"FRACFIELD v1 dim=3 n=16 L=1.0000000000000000\n".to_vec();
        bytes.extend(std::iter::repeat(0u8).take(8 * 4096));
        assert!(matches!(
            decode_field(&bytes),
            Err(FklError::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn truncated_body_rejected() {
        let g = Grid::new(1, 2.0, 16).unwrap();
        let f = Field::from_fn(g, |[x, _]| x.sin());
        let mut bytes = encode_field(&f);
        bytes.truncate(bytes.len() - 8);
        assert!(matches!(
            decode_field(&bytes),
            Err(FklError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn non_finite_rejected() {
        let g = Grid::new(1, 2.0, 16).unwrap();
        let f = Field::zeros(g);
        let mut bytes = encode_field(&f);
        let n = bytes.len();
        bytes[n - 8..].copy_from_slice(&f64::INFINITY.to_le_bytes());
        assert!(matches!(decode_field(&bytes), Err(FklError::NonFinite(_))));
    }
}
