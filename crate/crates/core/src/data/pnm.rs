//! Binary portable pixmap / graymap (P6 / P5) codec.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug)]
pub struct RawImage {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// Interleaved samples, row-major, `channels * height * width` bytes.
    pub samples: Vec<u8>,
}

fn image_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Read one whitespace-delimited header token, skipping `#` comments.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
    while *pos < bytes.len() {
        let b = bytes[*pos];
        if b == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else if b.is_ascii_whitespace() {
            *pos += 1;
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if *pos > start {
        Some(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    } else {
        None
    }
}

pub fn decode_pnm(bytes: &[u8], path: &Path) -> Result<RawImage> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos)
        .ok_or_else(|| image_err(path, "empty file, expected P5 or P6 header"))?;
    let channels: usize = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => {
            return Err(image_err(
                path,
                format!("unsupported magic '{other}', expected P5 or P6"),
            ))
        }
    };
    let mut dim = |label: &str| -> Result<usize> {
        next_token(bytes, &mut pos)
            .ok_or_else(|| image_err(path, format!("missing {label}")))?
            .parse::<usize>()
            .map_err(|_| image_err(path, format!("non-numeric {label}")))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let maxval = dim("maxval")?;
    if width == 0 || height == 0 {
        return Err(image_err(path, "zero image dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(image_err(
            path,
            format!("maxval {maxval} unsupported (expected 1..=255)"),
        ));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let expected = channels
        .checked_mul(width)
        .and_then(|v| v.checked_mul(height))
        .filter(|&v| v <= bytes.len())
        .ok_or_else(|| {
            image_err(
                path,
                format!("raster of {width}x{height}x{channels} exceeds the file size"),
            )
        })?;
    let raster = bytes
        .get(pos..pos + expected)
        .ok_or_else(|| image_err(path, format!("truncated raster, expected {expected} bytes")))?;

    // Rescale to full 0..255 when maxval is smaller.
    let samples = if maxval == 255 {
        raster.to_vec()
    } else {
        raster
            .iter()
            .map(|&v| ((v as usize * 255) / maxval).min(255) as u8)
            .collect()
    };
    Ok(RawImage {
        channels,
        height,
        width,
        samples,
    })
}

pub fn read_pnm(path: &Path) -> Result<RawImage> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes, path)
}

/// Write an 8-bit P5 graymap (used for co-occurrence heatmaps).
pub fn write_pgm(path: &Path, width: usize, height: usize, samples: &[u8]) -> Result<()> {
    if samples.len() != width * height {
        return Err(Error::ShapeMismatch(format!(
            "pgm: {} samples for {}x{}",
            samples.len(),
            width,
            height
        )));
    }
    let mut out = Vec::with_capacity(samples.len() + 32);
    write!(out, "P5\n{width} {height}\n255\n").expect("vec write");
    out.extend_from_slice(samples);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Write an 8-bit interleaved-RGB P6 pixmap.
pub fn write_ppm(path: &Path, width: usize, height: usize, samples: &[u8]) -> Result<()> {
    if samples.len() != 3 * width * height {
        return Err(Error::ShapeMismatch(format!(
            "ppm: {} samples for {}x{}x3",
            samples.len(),
            width,
            height
        )));
    }
    let mut out = Vec::with_capacity(samples.len() + 32);
    write!(out, "P6\n{width} {height}\n255\n").expect("vec write");
    out.extend_from_slice(samples);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
