//! CIFAR binary record format.
//!
//! CIFAR-10 records are 1 label byte + 3072 pixel bytes; CIFAR-100 records
//! carry a coarse and a fine label byte before the pixels. Pixels are
//! channel-planar (1024 red, 1024 green, 1024 blue), row-major within each
//! plane. The fine label is kept for CIFAR-100; the coarse label is
//! validated and discarded.

use std::path::Path;

use super::DataError;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CifarVariant {
    Cifar10,
    Cifar100,
}

impl CifarVariant {
    pub fn record_len(self) -> usize {
        match self {
            CifarVariant::Cifar10 => 1 + 3072,
            CifarVariant::Cifar100 => 2 + 3072,
        }
    }

    pub fn class_count(self) -> usize {
        match self {
            CifarVariant::Cifar10 => 10,
            CifarVariant::Cifar100 => 100,
        }
    }
}

/// Decoded records: labels plus NHWC pixel bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CifarRecords {
    pub labels: Vec<usize>,
    /// `n * 32 * 32 * 3` bytes in NHWC order.
    pub pixels: Vec<u8>,
}

pub fn parse_cifar(bytes: &[u8], variant: CifarVariant) -> Result<CifarRecords, DataError> {
    let record = variant.record_len();
    if !bytes.len().is_multiple_of(record) {
        return Err(DataError::RecordSize {
            len: bytes.len(),
            record,
        });
    }
    let n = bytes.len() / record;
    let mut labels = Vec::with_capacity(n);
    let mut pixels = vec![0u8; n * 3072];
    for (i, rec) in bytes.chunks_exact(record).enumerate() {
        let offset = i * record;
        let (label, planes) = match variant {
            CifarVariant::Cifar10 => {
                let label = rec[0] as usize;
                if label >= 10 {
                    return Err(DataError::LabelRange {
                        offset,
                        label,
                        classes: 10,
                    });
                }
                (label, &rec[1..])
            }
            CifarVariant::Cifar100 => {
                let coarse = rec[0] as usize;
                if coarse >= 20 {
                    return Err(DataError::LabelRange {
                        offset,
                        label: coarse,
                        classes: 20,
                    });
                }
                let fine = rec[1] as usize;
                if fine >= 100 {
                    return Err(DataError::LabelRange {
                        offset: offset + 1,
                        label: fine,
                        classes: 100,
                    });
                }
                (fine, &rec[2..])
            }
        };
        labels.push(label);
        // Planar RGB -> interleaved NHWC.
        let out = &mut pixels[i * 3072..(i + 1) * 3072];
        for p in 0..1024 {
            out[p * 3] = planes[p];
            out[p * 3 + 1] = planes[1024 + p];
            out[p * 3 + 2] = planes[2048 + p];
        }
    }
    Ok(CifarRecords { labels, pixels })
}

/// Encodes one file of records from NHWC pixel bytes. For CIFAR-100 the
/// coarse label is written as `fine / 5`.
pub fn write_cifar(labels: &[usize], pixels_nhwc: &[u8], variant: CifarVariant) -> Vec<u8> {
    assert_eq!(pixels_nhwc.len(), labels.len() * 3072, "pixel byte count");
    let record = variant.record_len();
    let mut out = Vec::with_capacity(labels.len() * record);
    for (i, &label) in labels.iter().enumerate() {
        match variant {
            CifarVariant::Cifar10 => out.push(label as u8),
            CifarVariant::Cifar100 => {
                out.push((label / 5) as u8);
                out.push(label as u8);
            }
        }
        let img = &pixels_nhwc[i * 3072..(i + 1) * 3072];
        for c in 0..3 {
            for p in 0..1024 {
                out.push(img[p * 3 + c]);
            }
        }
    }
    out
}

/// Loads and concatenates CIFAR files in order into `[N, 32, 32, 3]` pixels
/// scaled to [0, 1] plus labels.
pub fn load_cifar(paths: &[std::path::PathBuf], variant: CifarVariant) -> Result<(Tensor, Vec<usize>), DataError> {
    let mut labels = Vec::new();
    let mut pixels: Vec<u8> = Vec::new();
    for path in paths {
        let bytes = read_file(path)?;
        let records = parse_cifar(&bytes, variant).map_err(|e| e.with_path(path))?;
        labels.extend(records.labels);
        pixels.extend(records.pixels);
    }
    let n = labels.len();
    let tensor = Tensor::new(
        [n, 32, 32, 3],
        pixels.iter().map(|&b| b as f64 / 255.0).collect(),
    )?;
    Ok((tensor, labels))
}

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    std::fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_record_decodes_to_exact_pixels() {
        // Known bytes: red plane 10s, green 20s, blue 30s.
        let mut rec = vec![3u8];
        rec.extend(std::iter::repeat_n(10u8, 1024));
        rec.extend(std::iter::repeat_n(20u8, 1024));
        rec.extend(std::iter::repeat_n(30u8, 1024));
        let parsed = parse_cifar(&rec, CifarVariant::Cifar10).unwrap();
        assert_eq!(parsed.labels, vec![3]);
        assert_eq!(&parsed.pixels[..3], &[10, 20, 30]);
        assert_eq!(parsed.pixels.len(), 3072);
    }

    #[test]
    fn cifar100_keeps_fine_label_and_discards_coarse() {
        let mut rec = vec![4u8, 23u8];
        rec.extend(std::iter::repeat_n(0u8, 3072));
        let parsed = parse_cifar(&rec, CifarVariant::Cifar100).unwrap();
        assert_eq!(parsed.labels, vec![23]);
    }

    #[test]
    fn wrong_record_size_is_rejected() {
        let bytes = vec![0u8; 3073 + 5];
        assert!(matches!(
            parse_cifar(&bytes, CifarVariant::Cifar10),
            Err(DataError::RecordSize { len: 3078, record: 3073 })
        ));
    }

    #[test]
    fn out_of_range_labels_are_rejected_with_offsets() {
        let mut bytes = vec![11u8];
        bytes.extend(std::iter::repeat_n(0u8, 3072));
        assert!(matches!(
            parse_cifar(&bytes, CifarVariant::Cifar10),
            Err(DataError::LabelRange { offset: 0, label: 11, classes: 10 })
        ));

        let mut c100 = vec![0u8; 3074];
        c100[1] = 100;
        assert!(matches!(
            parse_cifar(&c100, CifarVariant::Cifar100),
            Err(DataError::LabelRange { offset: 1, label: 100, classes: 100 })
        ));
    }

    #[test]
    fn write_parse_roundtrip() {
        let labels = vec![0usize, 7, 9];
        let pixels: Vec<u8> = (0..3 * 3072).map(|i| (i % 251) as u8).collect();
        let bytes = write_cifar(&labels, &pixels, CifarVariant::Cifar10);
        let parsed = parse_cifar(&bytes, CifarVariant::Cifar10).unwrap();
        assert_eq!(parsed.labels, labels);
        assert_eq!(parsed.pixels, pixels);
    }
}
