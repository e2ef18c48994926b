//! On-disk formats.
//!
//! * Field CSV: comma-separated, no header, one grid row per line, values
//!   written with 17 significant digits so a write/read round trip is exact.
//! * Mask PGM: binary P5, `P5\n<cols> <rows>\n255\n` followed by one byte per
//!   cell in row-major order, 0 = background, 255 = detected.
//! * PGM input: P5 or P2, maxval up to 65535 (16-bit samples big-endian);
//!   the raw sample values become the field values.

use std::fmt::Write as _;
use std::path::Path;

use scusum_core::{BinaryMask, DensityModel, SpatialField, WeightMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {msg}")]
    Csv {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: {msg}")]
    Pgm { path: String, msg: String },
    #[error("{path}: {source}")]
    Field {
        path: String,
        #[source]
        source: scusum_core::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> FormatError {
    FormatError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Format a value with 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn field_to_csv(field: &SpatialField) -> String {
    grid_to_csv(field.values(), field.cols())
}

fn grid_to_csv(values: &[f64], cols: usize) -> String {
    let mut out = String::with_capacity(values.len() * 24);
    for row in values.chunks(cols) {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format_value(*v));
        }
        out.push('\n');
    }
    out
}

pub fn parse_csv_field(text: &str, path: &str) -> Result<SpatialField, FormatError> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let csv_err = |msg: String| FormatError::Csv {
            path: path.to_string(),
            line: idx + 1,
            msg,
        };
        let before = values.len();
        for cell in line.split(',') {
            let cell = cell.trim();
            let v: f64 = cell
                .parse()
                .map_err(|_| csv_err(format!("cannot parse {cell:?} as a number")))?;
            values.push(v);
        }
        let width = values.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(csv_err(format!("expected {c} columns, found {width}")));
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| FormatError::Csv {
        path: path.to_string(),
        line: 0,
        msg: "no data".into(),
    })?;
    SpatialField::new(rows, cols, values).map_err(|source| FormatError::Field {
        path: path.to_string(),
        source,
    })
}

pub fn read_csv_field(path: &Path) -> Result<SpatialField, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_csv_field(&text, &path.display().to_string())
}

pub fn mask_to_pgm(mask: &BinaryMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.cols(), mask.rows()).into_bytes();
    out.extend(mask.cells().iter().map(|&c| if c { 255u8 } else { 0 }));
    out
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .filter(|t| !t.is_empty())
    }

    fn number(&mut self) -> Option<usize> {
        self.token()?.parse().ok()
    }
}

pub fn parse_pgm(bytes: &[u8], path: &str) -> Result<SpatialField, FormatError> {
    let err = |msg: &str| FormatError::Pgm {
        path: path.to_string(),
        msg: msg.to_string(),
    };
    let mut cur = PgmCursor { bytes, pos: 0 };
    let magic = cur
        .token()
        .ok_or_else(|| err("missing magic number"))?
        .to_string();
    let cols = cur.number().ok_or_else(|| err("bad width"))?;
    let rows = cur.number().ok_or_else(|| err("bad height"))?;
    let maxval = cur.number().ok_or_else(|| err("bad maxval"))?;
    if maxval == 0 || maxval > 65535 {
        return Err(err("maxval must lie in [1, 65535]"));
    }
    let n = rows * cols;
    let values: Vec<f64> = match magic.as_str() {
        "P5" => {
            // Exactly one whitespace byte separates the header from the raster.
            let start = cur.pos + 1;
            let width = if maxval < 256 { 1 } else { 2 };
            let raster = bytes
                .get(start..start + n * width)
                .ok_or_else(|| err("truncated raster"))?;
            if width == 1 {
                raster.iter().map(|&b| b as f64).collect()
            } else {
                raster
                    .chunks_exact(2)
                    .map(|p| u16::from_be_bytes([p[0], p[1]]) as f64)
                    .collect()
            }
        }
        "P2" => (0..n)
            .map(|_| {
                cur.number()
                    .map(|v| v as f64)
                    .ok_or_else(|| err("truncated raster"))
            })
            .collect::<Result<_, _>>()?,
        _ => return Err(err("expected P5 or P2")),
    };
    SpatialField::new(rows, cols, values).map_err(|source| FormatError::Field {
        path: path.to_string(),
        source,
    })
}

pub fn read_pgm(path: &Path) -> Result<SpatialField, FormatError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    parse_pgm(&bytes, &path.display().to_string())
}

pub fn weights_to_csv(weights: &WeightMap) -> String {
    grid_to_csv(&weights.weights, weights.cols)
}

/// `x,f,f_h0` table with a header; `f_h0` is blank when no null density was estimated.
pub fn density_to_csv(model: Option<&DensityModel>) -> String {
    let mut out = String::from("x,f,f_h0\n");
    if let Some(m) = model {
        for (i, (x, f)) in m.grid.iter().zip(&m.f).enumerate() {
            let h0 = m
                .f_h0
                .as_ref()
                .map(|h| format_value(h[i]))
                .unwrap_or_default();
            let _ = writeln!(out, "{},{},{}", format_value(*x), format_value(*f), h0);
        }
    }
    out
}
