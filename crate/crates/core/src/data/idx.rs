//! IDX containers (the MNIST file format), optionally gzip-compressed.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(bytes.len() as u64, "truncated IDX header"))
}

fn header(bytes: &[u8], magic: u32, ndim: usize) -> Result<Vec<usize>> {
    let found = be_u32(bytes, 0)?;
    if found != magic {
        return Err(Error::format(0, format!("bad IDX magic 0x{found:08x}, expected 0x{magic:08x}")));
    }
    (0..ndim).map(|d| be_u32(bytes, 4 + 4 * d).map(|v| v as usize)).collect()
}

fn payload<'a>(bytes: &'a [u8], start: usize, len: usize) -> Result<&'a [u8]> {
    if bytes.len() < start + len {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated IDX payload: need {} bytes, file has {}", start + len, bytes.len()),
        ));
    }
    if bytes.len() > start + len {
        return Err(Error::format((start + len) as u64, "trailing bytes after IDX payload"));
    }
    Ok(&bytes[start..])
}

/// Decodes an IDX3 image buffer into `[n, 1, rows, cols]` pixels scaled to `[0, 1]`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Tensor> {
    let dims = header(bytes, IDX_IMAGES_MAGIC, 3)?;
    let (n, rows, cols) = (dims[0], dims[1], dims[2]);
    if n == 0 || rows == 0 || cols == 0 {
        return Err(Error::format(4, "IDX image file with a zero extent"));
    }
    let pixels = payload(bytes, 16, n * rows * cols)?;
    Tensor::new(vec![n, 1, rows, cols], pixels.iter().map(|&p| p as f64 / 255.0).collect())
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let dims = header(bytes, IDX_LABELS_MAGIC, 1)?;
    Ok(payload(bytes, 8, dims[0])?.iter().map(|&b| b as usize).collect())
}

/// Loads an IDX image/label file pair. The class count is `max(label) + 1`
/// (at least 2).
pub fn load_idx(images: &Path, labels: &Path, split: Split) -> Result<Dataset> {
    let samples = parse_idx_images(&read_file(images)?)?;
    let labels = parse_idx_labels(&read_file(labels)?)?;
    if samples.rows() != labels.len() {
        return Err(Error::format(
            4,
            format!("{} images but {} labels", samples.rows(), labels.len()),
        ));
    }
    let classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    Dataset::new(samples, labels, classes, split, format!("idx({})", images.display()))
}
