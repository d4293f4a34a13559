use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ImageGrid;
use crate::error::{Error, Result};

/// On-disk image encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageFormat {
    /// UTF-8 text, one row per line, space-separated decimals.
    AsciiMatrix,
    /// Little-endian float64 payload with a `<path>.json` sidecar header.
    RawF64Le,
}

impl FromStr for ImageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ascii-matrix" | "ascii" => Ok(Self::AsciiMatrix),
            "raw-f64-le" | "raw" => Ok(Self::RawF64Le),
            other => Err(Error::Config(format!("unknown image format `{other}`"))),
        }
    }
}

/// Sidecar header for raw payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawHeader {
    pub rows: usize,
    pub cols: usize,
}

impl RawHeader {
    pub fn sidecar_path(payload: &Path) -> PathBuf {
        let mut name = payload.as_os_str().to_owned();
        name.push(".json");
        PathBuf::from(name)
    }
}

pub fn load_image(path: impl AsRef<Path>, format: ImageFormat) -> Result<ImageGrid<f64>> {
    let path = path.as_ref();
    match format {
        ImageFormat::AsciiMatrix => load_ascii(path),
        ImageFormat::RawF64Le => load_raw_f64_le(path, &RawHeader::sidecar_path(path)),
    }
}

pub fn save_image(img: &ImageGrid<f64>, path: impl AsRef<Path>, format: ImageFormat) -> Result<()> {
    let path = path.as_ref();
    match format {
        ImageFormat::AsciiMatrix => {
            let mut out = String::with_capacity(img.len() * 12);
            for r in 0..img.rows() {
                for c in 0..img.cols() {
                    if c > 0 {
                        out.push(' ');
                    }
                    // `{}` on f64 prints the shortest round-tripping form.
                    out.push_str(&format!("{}", img.get(r, c)));
                }
                out.push('\n');
            }
            fs::write(path, out)?;
        }
        ImageFormat::RawF64Le => {
            let mut file = fs::File::create(path)?;
            let mut buf = Vec::with_capacity(img.len() * 8);
            for v in img.values() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            file.write_all(&buf)?;
            let header = RawHeader { rows: img.rows(), cols: img.cols() };
            fs::write(RawHeader::sidecar_path(path), serde_json::to_string(&header)?)?;
        }
    }
    Ok(())
}

fn load_ascii(path: &Path) -> Result<ImageGrid<f64>> {
    let text = fs::read_to_string(path)?;
    parse_ascii(&text, path)
}

pub(crate) fn parse_ascii(text: &str, path: &Path) -> Result<ImageGrid<f64>> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut n = 0;
        for (tok_idx, tok) in line.split_whitespace().enumerate() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                location: format!("line {}, column {}", lineno + 1, tok_idx + 1),
                message: format!("`{tok}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    location: format!("line {}, column {}", lineno + 1, tok_idx + 1),
                    message: format!("`{tok}` is not finite"),
                });
            }
            values.push(v);
            n += 1;
        }
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => {
                return Err(Error::structural(format!("line {} has {n} values, expected {c}", lineno + 1)))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::structural(format!("{} contains no rows", path.display())))?;
    ImageGrid::new(rows, cols, values)
}

pub fn load_raw_f64_le(payload: &Path, header: &Path) -> Result<ImageGrid<f64>> {
    let header_text = fs::read_to_string(header)?;
    let header: RawHeader = serde_json::from_str(&header_text).map_err(|e| Error::Parse {
        path: header.to_path_buf(),
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let bytes = fs::read(payload)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse {
            path: payload.to_path_buf(),
            location: format!("byte offset {}", bytes.len() - bytes.len() % 8),
            message: "payload length is not a multiple of 8 bytes".into(),
        });
    }
    let n = bytes.len() / 8;
    if n != header.rows * header.cols {
        return Err(Error::structural(format!(
            "header declares {}x{} = {} values but payload holds {n}",
            header.rows,
            header.cols,
            header.rows * header.cols
        )));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    ImageGrid::new(header.rows, header.cols, values)
}
