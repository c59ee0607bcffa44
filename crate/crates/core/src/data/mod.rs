//! Dataset loading, preprocessing, and the train/validation split protocol.
//!
//! Loaders return raw pixel tensors; [`preprocess`] brings everything to the
//! canonical `[N, 32, 32, 3]` layout (grayscale replicated across channels,
//! 28x28 inputs resized to 32x32). All randomness is seeded.

pub mod cifar;
pub mod idx;
pub mod synth;

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use thiserror::Error;

use crate::tensor::{Shape4, Tensor, TensorError};
use crate::SeededRng;

pub use cifar::{load_cifar, parse_cifar, write_cifar, CifarRecords, CifarVariant};
pub use idx::{
    load_idx, parse_idx_images, parse_idx_labels, write_idx_images, write_idx_labels, IdxImages,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        source: Box<DataError>,
    },
    #[error("bad magic at offset {offset}: expected {expected:#010x}, got {actual:#010x}")]
    BadMagic {
        offset: usize,
        expected: u32,
        actual: u32,
    },
    #[error("truncated at offset {offset}: need {needed} more byte(s), have {have}")]
    Truncated {
        offset: usize,
        needed: usize,
        have: usize,
    },
    #[error("{extra} trailing byte(s) at offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("malformed data at offset {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("file length {len} is not a multiple of the record size {record}")]
    RecordSize { len: usize, record: usize },
    #[error("label {label} at byte offset {offset} outside [0, {classes})")]
    LabelRange {
        offset: usize,
        label: usize,
        classes: usize,
    },
    #[error("label {label} at index {index} outside [0, {classes})")]
    DatasetLabelRange {
        index: usize,
        label: usize,
        classes: usize,
    },
    #[error("pixel {value} at index {index} outside [0, 1]")]
    PixelRange { index: usize, value: f64 },
    #[error("unsupported channel count {channels} (expected 1 or 3)")]
    UnsupportedChannels { channels: usize },
    #[error("padding resize supports 28x28 or 32x32 inputs, got {h}x{w}")]
    UnsupportedSize { h: usize, w: usize },
    #[error("validation fraction {fraction} outside (0, 1)")]
    BadFraction { fraction: f64 },
    #[error("split would leave the {side} subset empty (n = {n}, fraction = {fraction})")]
    EmptySplit {
        side: &'static str,
        n: usize,
        fraction: f64,
    },
    #[error("requested subset of {requested} from {available} sample(s)")]
    SubsetTooLarge { requested: usize, available: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl DataError {
    pub(crate) fn with_path(self, path: &Path) -> DataError {
        DataError::InFile {
            path: path.to_path_buf(),
            source: Box::new(self),
        }
    }
}

/// Which partition a dataset represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Validation,
    Test,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Validation => "validation",
            SplitTag::Test => "test",
        }
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    pub records: usize,
}

/// Images in the canonical `[N, 32, 32, 3]` layout with values in [0, 1],
/// plus integer labels in `[0, class_count)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub split: SplitTag,
    pub provenance: Provenance,
}

/// How non-32x32 inputs are brought to 32x32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResizeMethod {
    /// Zero padding, 2 pixels per border (28x28 only). Deterministic and
    /// preserves the source pixels exactly.
    #[default]
    Pad,
    /// Bilinear interpolation from any input size.
    Bilinear,
}

impl LabeledDataset {
    /// Validates invariants and preprocesses raw images into the canonical
    /// layout.
    pub fn from_raw(
        images: Tensor,
        labels: Vec<usize>,
        class_count: usize,
        split: SplitTag,
        source: String,
        resize: ResizeMethod,
    ) -> Result<Self, DataError> {
        let n = images.shape()[0];
        if n != labels.len() {
            return Err(DataError::CountMismatch {
                images: n,
                labels: labels.len(),
            });
        }
        for (index, &label) in labels.iter().enumerate() {
            if label >= class_count {
                return Err(DataError::DatasetLabelRange {
                    index,
                    label,
                    classes: class_count,
                });
            }
        }
        let images = preprocess(&images, resize)?;
        if let Some((index, &value)) = images
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(DataError::PixelRange { index, value });
        }
        let records = labels.len();
        Ok(Self {
            images,
            labels,
            class_count,
            split,
            provenance: Provenance { source, records },
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Samples per class.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize; self.class_count];
        for &label in &self.labels {
            hist[label] += 1;
        }
        hist
    }

    /// Copies the rows at `indices` (in the given order) into a new dataset.
    pub fn gather(&self, indices: &[usize], split: SplitTag) -> LabeledDataset {
        let row = self.images.len() / self.len().max(1);
        let mut data = Vec::with_capacity(indices.len() * row);
        for &i in indices {
            data.extend_from_slice(&self.images.data()[i * row..(i + 1) * row]);
        }
        let mut shape = self.images.shape().to_vec();
        shape[0] = indices.len();
        LabeledDataset {
            images: Tensor::new(shape, data).expect("gather preserves row size"),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
            split,
            provenance: Provenance {
                source: self.provenance.source.clone(),
                records: indices.len(),
            },
        }
    }

    /// Deterministic random subset of `n` samples (order-stable by index).
    pub fn subset_seeded(&self, n: usize, seed: u64) -> Result<LabeledDataset, DataError> {
        if n == 0 || n > self.len() {
            return Err(DataError::SubsetTooLarge {
                requested: n,
                available: self.len(),
            });
        }
        let mut indices: Vec<usize> = (0..self.len()).collect();
        let mut rng = SeededRng::seed_from_u64(seed);
        indices.shuffle(&mut rng);
        let mut chosen = indices[..n].to_vec();
        chosen.sort_unstable();
        Ok(self.gather(&chosen, self.split))
    }
}

/// Brings raw images to `[N, 32, 32, 3]`: grayscale is replicated across
/// three channels bit-identically, 28x28 inputs are resized (zero padding by
/// default), 32x32 RGB passes through unchanged.
pub fn preprocess(images: &Tensor, resize: ResizeMethod) -> Result<Tensor, DataError> {
    let s = Shape4::from_shape(images.shape())?;
    if s.c != 1 && s.c != 3 {
        return Err(DataError::UnsupportedChannels { channels: s.c });
    }
    let resized = if s.h == 32 && s.w == 32 {
        images.clone()
    } else {
        match resize {
            ResizeMethod::Pad => {
                if s.h != 28 || s.w != 28 {
                    return Err(DataError::UnsupportedSize { h: s.h, w: s.w });
                }
                pad_28_to_32(images, s)
            }
            ResizeMethod::Bilinear => bilinear_to_32(images, s),
        }
    };
    if s.c == 3 {
        return Ok(resized);
    }
    // Stack the grayscale plane three times; channels stay bit-identical.
    let n = resized.shape()[0];
    let plane = 32 * 32;
    let mut data = Vec::with_capacity(n * plane * 3);
    for &v in resized.data() {
        data.extend_from_slice(&[v, v, v]);
    }
    Ok(Tensor::new([n, 32, 32, 3], data).expect("replication preserves counts"))
}

fn pad_28_to_32(images: &Tensor, s: Shape4) -> Tensor {
    let mut out = Tensor::zeros([s.n, 32, 32, s.c]).expect("valid shape");
    let src = images.data();
    let dst = out.data_mut();
    for n in 0..s.n {
        for y in 0..28 {
            let src_base = ((n * 28 + y) * 28) * s.c;
            let dst_base = ((n * 32 + y + 2) * 32 + 2) * s.c;
            dst[dst_base..dst_base + 28 * s.c]
                .copy_from_slice(&src[src_base..src_base + 28 * s.c]);
        }
    }
    out
}

fn bilinear_to_32(images: &Tensor, s: Shape4) -> Tensor {
    let mut out = Tensor::zeros([s.n, 32, 32, s.c]).expect("valid shape");
    let src = images.data();
    let scale_y = s.h as f64 / 32.0;
    let scale_x = s.w as f64 / 32.0;
    for n in 0..s.n {
        for oy in 0..32usize {
            // Align sample centers.
            let fy = ((oy as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (s.h - 1) as f64);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(s.h - 1);
            let wy = fy - y0 as f64;
            for ox in 0..32usize {
                let fx = ((ox as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (s.w - 1) as f64);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(s.w - 1);
                let wx = fx - x0 as f64;
                for c in 0..s.c {
                    let at = |y: usize, x: usize| src[((n * s.h + y) * s.w + x) * s.c + c];
                    let top = at(y0, x0) * (1.0 - wx) + at(y0, x1) * wx;
                    let bottom = at(y1, x0) * (1.0 - wx) + at(y1, x1) * wx;
                    out.data_mut()[((n * 32 + oy) * 32 + ox) * s.c + c] =
                        top * (1.0 - wy) + bottom * wy;
                }
            }
        }
    }
    out
}

/// Partitions a training set by a seeded random permutation. The validation
/// subset holds `round(fraction * N)` samples; the two subsets are disjoint
/// and their union is the input.
pub fn split_validation(
    dataset: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset), DataError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::BadFraction { fraction });
    }
    let n = dataset.len();
    let n_val = (fraction * n as f64).round() as usize;
    if n_val == 0 {
        return Err(DataError::EmptySplit {
            side: "validation",
            n,
            fraction,
        });
    }
    if n_val >= n {
        return Err(DataError::EmptySplit {
            side: "train",
            n,
            fraction,
        });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = SeededRng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut val: Vec<usize> = indices[..n_val].to_vec();
    let mut train: Vec<usize> = indices[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((
        dataset.gather(&train, SplitTag::Train),
        dataset.gather(&val, SplitTag::Validation),
    ))
}

/// Mini-batch iterator over a seeded shuffle of the dataset. One pass
/// visits every index exactly once; the last batch may be short.
pub struct BatchIterator<'a> {
    dataset: &'a LabeledDataset,
    batch_size: usize,
    perm: Vec<usize>,
    cursor: usize,
}

impl<'a> BatchIterator<'a> {
    /// Shuffled iteration; identical seeds yield identical batch sequences.
    pub fn shuffled(dataset: &'a LabeledDataset, batch_size: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..dataset.len()).collect();
        let mut rng = SeededRng::seed_from_u64(seed);
        perm.shuffle(&mut rng);
        Self {
            dataset,
            batch_size: batch_size.max(1),
            perm,
            cursor: 0,
        }
    }

    /// In-order iteration (evaluation).
    pub fn sequential(dataset: &'a LabeledDataset, batch_size: usize) -> Self {
        Self {
            dataset,
            batch_size: batch_size.max(1),
            perm: (0..dataset.len()).collect(),
            cursor: 0,
        }
    }
}

impl Iterator for BatchIterator<'_> {
    type Item = (Tensor, Vec<usize>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.cursor >= self.perm.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.perm.len());
        let indices = &self.perm[self.cursor..end];
        self.cursor = end;
        let batch = self.dataset.gather(indices, self.dataset.split);
        Some((batch.images, batch.labels))
    }
}

/// Raw loader output: images plus integer labels.
pub type RawSet = (Tensor, Vec<usize>);

/// Standard file names for an MNIST-layout directory (also used by
/// Fashion-MNIST and the synthetic corpus).
pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

/// Loads the four-file MNIST layout from a directory. Returns raw
/// `(train, test)` pairs of `[N, 28, 28, 1]` images and labels.
pub fn load_mnist_dir(dir: &Path) -> Result<(RawSet, RawSet), DataError> {
    let train = load_idx(&dir.join(MNIST_FILES[0]), &dir.join(MNIST_FILES[1]))?;
    let test = load_idx(&dir.join(MNIST_FILES[2]), &dir.join(MNIST_FILES[3]))?;
    Ok((train, test))
}

/// CIFAR-10 directory layout: five training batches plus a test batch.
pub fn cifar10_train_files(dir: &Path) -> Vec<PathBuf> {
    (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect()
}

pub fn load_cifar10_dir(dir: &Path) -> Result<(RawSet, RawSet), DataError> {
    let train = load_cifar(&cifar10_train_files(dir), CifarVariant::Cifar10)?;
    let test = load_cifar(&[dir.join("test_batch.bin")], CifarVariant::Cifar10)?;
    Ok((train, test))
}

pub fn load_cifar100_dir(dir: &Path) -> Result<(RawSet, RawSet), DataError> {
    let train = load_cifar(&[dir.join("train.bin")], CifarVariant::Cifar100)?;
    let test = load_cifar(&[dir.join("test.bin")], CifarVariant::Cifar100)?;
    Ok((train, test))
}
