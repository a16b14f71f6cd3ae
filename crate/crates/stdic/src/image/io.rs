//! Image file formats: binary PGM (P5) and a raw float64 grid.
//!
//! PGM covers 8-bit and 16-bit interchange (maxval 255 or 65535, 16-bit
//! samples big-endian per the format). The raw format, magic `STDICF64`,
//! stores the internal double-precision intensities losslessly: a 16-byte
//! header (magic, u32 width, u32 height, both little-endian) followed by
//! `width * height` little-endian f64 values in row-major order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::GrayImage;
use crate::error::{Error, Result};

const RAW_MAGIC: &[u8; 8] = b"STDICF64";

fn bad_file(path: &Path, reason: impl Into<String>) -> Error {
    Error::BadImageFile {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Writes an 8-bit binary PGM, rounding and clamping intensities to 0..=255.
pub fn write_pgm8(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::with_capacity(32 + image.pixels().len());
    write!(out, "P5\n{} {}\n255\n", image.width(), image.height())?;
    out.extend(
        image
            .pixels()
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8),
    );
    fs::write(path, out)?;
    Ok(())
}

/// Writes a 16-bit binary PGM (big-endian samples, maxval 65535).
pub fn write_pgm16(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::with_capacity(32 + 2 * image.pixels().len());
    write!(out, "P5\n{} {}\n65535\n", image.width(), image.height())?;
    for v in image.pixels() {
        let q = v.round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a binary PGM (P5), widening samples to f64.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let data = fs::read(path)?;
    parse_pgm(&data).map_err(|reason| bad_file(path, reason))
}

fn parse_pgm(data: &[u8]) -> std::result::Result<GrayImage, String> {
    if !data.starts_with(b"P5") {
        return Err("missing P5 magic".into());
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and '#' comment lines between header tokens
        loop {
            match data.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < data.len() && data[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while pos < data.len() && data[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err("malformed header token".into());
        }
        *field = std::str::from_utf8(&data[start..pos])
            .unwrap()
            .parse()
            .map_err(|e| format!("bad header number: {e}"))?;
    }
    let [width, height, maxval] = fields;
    match data.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err("missing whitespace after maxval".into()),
    }

    let count = width * height;
    let pixels: Vec<f64> = match maxval {
        1..=255 => {
            let raster = data
                .get(pos..pos + count)
                .ok_or_else(|| "truncated raster".to_string())?;
            raster.iter().map(|&b| b as f64).collect()
        }
        256..=65535 => {
            let raster = data
                .get(pos..pos + 2 * count)
                .ok_or_else(|| "truncated raster".to_string())?;
            raster
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
                .collect()
        }
        _ => return Err(format!("unsupported maxval {maxval}")),
    };
    GrayImage::from_pixels(width, height, pixels).map_err(|e| e.to_string())
}

/// Writes the lossless raw float64 format.
pub fn write_f64_raw(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::with_capacity(16 + 8 * image.pixels().len());
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&(image.width() as u32).to_le_bytes());
    out.extend_from_slice(&(image.height() as u32).to_le_bytes());
    for v in image.pixels() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads the raw float64 format.
pub fn read_f64_raw(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let mut file = fs::File::open(path)?;
    let mut header = [0u8; 16];
    file.read_exact(&mut header)
        .map_err(|_| bad_file(path, "truncated header"))?;
    if &header[..8] != RAW_MAGIC {
        return Err(bad_file(path, "missing STDICF64 magic"));
    }
    let width = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let mut raw = vec![0u8; width * height * 8];
    file.read_exact(&mut raw)
        .map_err(|_| bad_file(path, "truncated pixel data"))?;
    let pixels = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GrayImage::from_pixels(width, height, pixels)
}

/// Loads either format, sniffing the leading magic bytes.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let mut file = fs::File::open(path)?;
    let mut magic = [0u8; 8];
    let n = file.read(&mut magic)?;
    drop(file);
    if n >= 8 && &magic == RAW_MAGIC {
        read_f64_raw(path)
    } else if n >= 2 && &magic[..2] == b"P5" {
        read_pgm(path)
    } else {
        Err(bad_file(path, "unrecognized image format"))
    }
}
