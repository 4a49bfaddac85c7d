//! IDX files as used by MNIST and Fashion-MNIST.
//!
//! All header integers are big-endian `u32`:
//!
//! * images: magic `0x00000803`, count, rows, cols, then `count*rows*cols` bytes
//! * labels: magic `0x00000801`, count, then `count` bytes

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Dataset;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_u32(bytes: &[u8], offset: usize, field: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Parse {
            offset: bytes.len(),
            message: format!("truncated header: missing {field} at offset {offset}"),
        })
}

fn expect_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = read_u32(bytes, 0, "magic number")?;
    if magic != expected {
        return Err(Error::Parse {
            offset: 0,
            message: format!("wrong magic 0x{magic:08x}, expected 0x{expected:08x}"),
        });
    }
    Ok(())
}

fn payload(bytes: &[u8], start: usize, len: usize) -> Result<&[u8]> {
    let end = start + len;
    if bytes.len() < end {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!("truncated data: expected {len} bytes from offset {start}"),
        });
    }
    Ok(&bytes[start..end])
}

pub fn parse_images(bytes: &[u8]) -> Result<IdxImages> {
    expect_magic(bytes, IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4, "image count")? as usize;
    let rows = read_u32(bytes, 8, "row count")? as usize;
    let cols = read_u32(bytes, 12, "column count")? as usize;
    let pixels = payload(bytes, 16, count * rows * cols)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    expect_magic(bytes, LABELS_MAGIC)?;
    let count = read_u32(bytes, 4, "label count")? as usize;
    Ok(payload(bytes, 8, count)?.to_vec())
}

/// Builds a dataset from raw IDX bytes; pixels are scaled to `[0, 1]` and
/// `n_classes` is one more than the largest label.
pub fn dataset_from_bytes(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let images = parse_images(images)?;
    let labels = parse_labels(labels)?;
    if images.count != labels.len() {
        return Err(Error::Parse {
            offset: 4,
            message: format!(
                "count mismatch: {} images but {} labels",
                images.count,
                labels.len()
            ),
        });
    }
    let width = images.rows * images.cols;
    if width == 0 {
        return Err(Error::Parse {
            offset: 8,
            message: "images have zero pixels".into(),
        });
    }
    let features = images.pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let n_classes = labels.iter().copied().max().map_or(1, |m| m as usize + 1);
    Dataset::new(
        features,
        width,
        labels.into_iter().map(usize::from).collect(),
        n_classes,
    )
}

/// Loads an image/label file pair. With `normalize`, every pixel is
/// standardized by the mean and standard deviation of the whole file.
pub fn load_idx(images_path: &Path, labels_path: &Path, normalize: bool) -> Result<Dataset> {
    let read = |p: &Path| {
        std::fs::read(p).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    let mut data = dataset_from_bytes(&read(images_path)?, &read(labels_path)?)?;
    if normalize {
        let (mean, std) = data.value_stats();
        data.standardize(mean, std);
    }
    Ok(data)
}

/// Serializes images in IDX form. Used to build fixtures.
pub fn encode_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let count = pixels.len().checked_div(rows * cols).unwrap_or(0);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
