//! IDX binary format (MNIST family): big-endian headers, raw pixel bytes.
//!
//! Image files carry magic 0x00000803 and labels 0x00000801. Parsing is
//! byte-deterministic and rejects truncation, bad magic, and trailing bytes
//! with the offending byte offset.

use std::path::Path;

use super::DataError;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw decoded IDX image file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` bytes, row-major per image.
    pub pixels: Vec<u8>,
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32, DataError> {
    if bytes.len() < offset + 4 {
        return Err(DataError::Truncated {
            offset,
            needed: offset + 4 - bytes.len(),
            have: bytes.len().saturating_sub(offset),
        });
    }
    Ok(u32::from_be_bytes(bytes[offset..offset + 4].try_into().unwrap()))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages, DataError> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(DataError::BadMagic {
            offset: 0,
            expected: IDX_IMAGES_MAGIC,
            actual: magic,
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    if rows == 0 || cols == 0 {
        return Err(DataError::Malformed {
            offset: 8,
            reason: format!("image dimensions must be positive, got {rows}x{cols}"),
        });
    }
    let pixel_count = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or(DataError::Malformed {
            offset: 4,
            reason: "pixel count overflows".into(),
        })?;
    let have = bytes.len() - 16;
    if have < pixel_count {
        return Err(DataError::Truncated {
            offset: 16 + have,
            needed: pixel_count - have,
            have,
        });
    }
    if have > pixel_count {
        return Err(DataError::TrailingBytes {
            offset: 16 + pixel_count,
            extra: have - pixel_count,
        });
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DataError> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(DataError::BadMagic {
            offset: 0,
            expected: IDX_LABELS_MAGIC,
            actual: magic,
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let have = bytes.len() - 8;
    if have < count {
        return Err(DataError::Truncated {
            offset: 8 + have,
            needed: count - have,
            have,
        });
    }
    if have > count {
        return Err(DataError::TrailingBytes {
            offset: 8 + count,
            extra: have - count,
        });
    }
    Ok(bytes[8..].to_vec())
}

/// Encodes pixels (`count * rows * cols` bytes) as an IDX image file.
pub fn write_idx_images(count: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), count * rows * cols, "pixel byte count");
    let mut out = Vec::with_capacity(16 + pixels.len());
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(count as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    out.extend_from_slice(pixels);
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    std::fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads an IDX image/label file pair into pixels scaled to [0, 1] as an
/// `[N, rows, cols, 1]` tensor plus integer labels. The two files must agree
/// on the record count.
pub fn load_idx(
    images_path: &Path,
    labels_path: &Path,
) -> Result<(crate::tensor::Tensor, Vec<usize>), DataError> {
    let images = parse_idx_images(&read_file(images_path)?).map_err(|e| e.with_path(images_path))?;
    let labels = parse_idx_labels(&read_file(labels_path)?).map_err(|e| e.with_path(labels_path))?;
    if images.count != labels.len() {
        return Err(DataError::CountMismatch {
            images: images.count,
            labels: labels.len(),
        });
    }
    let tensor = crate::tensor::Tensor::new(
        [images.count, images.rows, images.cols, 1],
        images.pixels.iter().map(|&b| b as f64 / 255.0).collect(),
    )?;
    Ok((tensor, labels.iter().map(|&b| b as usize).collect()))
}
