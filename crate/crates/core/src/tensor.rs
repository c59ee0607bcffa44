//! Dense f64 tensors in row-major order, plus the arithmetic everything
//! else is built from.
//!
//! Shapes are lists of positive dimension sizes (rank >= 1). Image tensors
//! use the fixed N-H-W-C layout described by [`Shape4`]. There is no
//! broadcasting beyond scalar-tensor ops; shape adaptation is explicit.

use rayon::prelude::*;
use thiserror::Error;

/// Errors from tensor construction and arithmetic.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },
    #[error("shape {shape:?} implies {expected} elements, got {actual}")]
    ElementCount {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("matmul inner dimensions disagree: [{m}, {k_left}] x [{k_right}, {n}]")]
    InnerDim {
        m: usize,
        k_left: usize,
        k_right: usize,
        n: usize,
    },
    #[error("expected rank {expected}, got shape {shape:?}")]
    RankMismatch { expected: usize, shape: Vec<usize> },
    #[error("axis {axis} out of range for rank {rank}")]
    InvalidAxis { axis: usize, rank: usize },
    #[error("division by zero at element {index}")]
    DivisionByZero { index: usize },
    #[error("slice [{start}, {start}+{len}) out of range for axis {axis} of size {size}")]
    SliceRange {
        axis: usize,
        start: usize,
        len: usize,
        size: usize,
    },
    #[error("{context}: non-finite value at element {index}")]
    NonFinite { context: String, index: usize },
    #[error("truncated tensor bytes at offset {offset}: need {needed} more byte(s), have {have}")]
    Truncated {
        offset: usize,
        needed: usize,
        have: usize,
    },
    #[error("malformed tensor bytes at offset {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
}

/// Elementwise binary operation selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Reduction selector for [`Tensor::reduce`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Max,
    Mean,
}

/// Canonical batch-height-width-channels shape for image tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape4 {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Shape4 {
    pub fn new(n: usize, h: usize, w: usize, c: usize) -> Self {
        Self { n, h, w, c }
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n, self.h, self.w, self.c]
    }

    pub fn len(&self) -> usize {
        self.n * self.h * self.w * self.c
    }

    pub fn is_empty(&self) -> bool {
        // Dimensions are positive by construction.
        false
    }

    pub fn from_shape(shape: &[usize]) -> Result<Self, TensorError> {
        match shape {
            [n, h, w, c] => Ok(Self::new(*n, *h, *w, *c)),
            _ => Err(TensorError::RankMismatch {
                expected: 4,
                shape: shape.to_vec(),
            }),
        }
    }
}

/// Dense N-dimensional array of f64 values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn validate_shape(shape: &[usize]) -> Result<usize, TensorError> {
    if shape.is_empty() {
        return Err(TensorError::InvalidShape {
            shape: shape.to_vec(),
            reason: "rank must be >= 1".into(),
        });
    }
    let mut count: usize = 1;
    for &d in shape {
        if d == 0 {
            return Err(TensorError::InvalidShape {
                shape: shape.to_vec(),
                reason: "dimension sizes must be >= 1".into(),
            });
        }
        count = count
            .checked_mul(d)
            .ok_or_else(|| TensorError::InvalidShape {
                shape: shape.to_vec(),
                reason: "element count overflows usize".into(),
            })?;
    }
    Ok(count)
}

impl Tensor {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self, TensorError> {
        let shape = shape.into();
        let expected = validate_shape(&shape)?;
        if expected != data.len() {
            return Err(TensorError::ElementCount {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Result<Self, TensorError> {
        let shape = shape.into();
        let count = validate_shape(&shape)?;
        Ok(Self {
            shape,
            data: vec![0.0; count],
        })
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: f64) -> Result<Self, TensorError> {
        let shape = shape.into();
        let count = validate_shape(&shape)?;
        Ok(Self {
            shape,
            data: vec![value; count],
        })
    }

    pub fn ones(shape: impl Into<Vec<usize>>) -> Result<Self, TensorError> {
        Self::full(shape, 1.0)
    }

    pub fn from_fn(
        shape: impl Into<Vec<usize>>,
        mut f: impl FnMut(usize) -> f64,
    ) -> Result<Self, TensorError> {
        let shape = shape.into();
        let count = validate_shape(&shape)?;
        Ok(Self {
            shape,
            data: (0..count).map(&mut f).collect(),
        })
    }

    /// Rank-2 identity matrix.
    pub fn identity(n: usize) -> Result<Self, TensorError> {
        let mut t = Self::zeros([n, n])?;
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        Ok(t)
    }

    pub fn zeros_like(other: &Tensor) -> Self {
        Self {
            shape: other.shape.clone(),
            data: vec![0.0; other.data.len()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        // Shapes have no zero dims, so a constructed tensor is never empty.
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Errors with `context` if any element is NaN or infinite.
    pub fn check_finite(&self, context: &str) -> Result<(), TensorError> {
        for (i, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(TensorError::NonFinite {
                    context: context.to_string(),
                    index: i,
                });
            }
        }
        Ok(())
    }

    pub fn elementwise(&self, other: &Tensor, op: BinaryOp) -> Result<Tensor, TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                op: match op {
                    BinaryOp::Add => "add",
                    BinaryOp::Sub => "sub",
                    BinaryOp::Mul => "mul",
                    BinaryOp::Div => "div",
                },
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        if op == BinaryOp::Div {
            if let Some(i) = other.data.iter().position(|&b| b == 0.0) {
                return Err(TensorError::DivisionByZero { index: i });
            }
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => a / b,
            })
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.elementwise(other, BinaryOp::Add)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.elementwise(other, BinaryOp::Sub)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.elementwise(other, BinaryOp::Mul)
    }

    pub fn div(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.elementwise(other, BinaryOp::Div)
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Adds `other * s` into `self` in place; shapes must match.
    pub fn axpy(&mut self, s: f64, other: &Tensor) -> Result<(), TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                op: "axpy",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    /// Standard rank-2 matrix product `[m,k] x [k,n] -> [m,n]`.
    ///
    /// Rows of the output are computed independently (and in parallel), each
    /// with a fixed sequential accumulation order, so results are
    /// bit-identical across runs and thread counts.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let (m, k_left) = match self.shape[..] {
            [m, k] => (m, k),
            _ => {
                return Err(TensorError::RankMismatch {
                    expected: 2,
                    shape: self.shape.clone(),
                })
            }
        };
        let (k_right, n) = match other.shape[..] {
            [k, n] => (k, n),
            _ => {
                return Err(TensorError::RankMismatch {
                    expected: 2,
                    shape: other.shape.clone(),
                })
            }
        };
        if k_left != k_right {
            return Err(TensorError::InnerDim {
                m,
                k_left,
                k_right,
                n,
            });
        }
        let mut out = vec![0.0f64; m * n];
        let a = &self.data;
        let b = &other.data;
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for l in 0..k_left {
                let av = a[i * k_left + l];
                let brow = &b[l * n..(l + 1) * n];
                for (r, &bv) in row.iter_mut().zip(brow) {
                    *r += av * bv;
                }
            }
        });
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    /// Rank-2 transpose.
    pub fn transpose(&self) -> Result<Tensor, TensorError> {
        let (m, n) = match self.shape[..] {
            [m, n] => (m, n),
            _ => {
                return Err(TensorError::RankMismatch {
                    expected: 2,
                    shape: self.shape.clone(),
                })
            }
        };
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Tensor {
            shape: vec![n, m],
            data,
        })
    }

    /// Reinterprets the element sequence under a new shape with the same
    /// element count.
    pub fn reshape(&self, shape: impl Into<Vec<usize>>) -> Result<Tensor, TensorError> {
        let shape = shape.into();
        let expected = validate_shape(&shape)?;
        if expected != self.data.len() {
            return Err(TensorError::ElementCount {
                shape,
                expected,
                actual: self.data.len(),
            });
        }
        Ok(Tensor {
            shape,
            data: self.data.clone(),
        })
    }

    /// Concatenates tensors along `axis`. Inputs must agree on every other
    /// dimension; element order within each input is preserved.
    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor, TensorError> {
        let first = parts.first().ok_or_else(|| TensorError::InvalidShape {
            shape: vec![],
            reason: "concat of zero tensors".into(),
        })?;
        let rank = first.rank();
        if axis >= rank {
            return Err(TensorError::InvalidAxis { axis, rank });
        }
        let mut axis_total = 0usize;
        for p in parts {
            if p.rank() != rank {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    left: first.shape.clone(),
                    right: p.shape.clone(),
                });
            }
            for (d, (&a, &b)) in first.shape.iter().zip(&p.shape).enumerate() {
                if d != axis && a != b {
                    return Err(TensorError::ShapeMismatch {
                        op: "concat",
                        left: first.shape.clone(),
                        right: p.shape.clone(),
                    });
                }
            }
            axis_total += p.shape[axis];
        }
        let mut out_shape = first.shape.clone();
        out_shape[axis] = axis_total;
        let inner: usize = first.shape[axis + 1..].iter().product();
        let outer: usize = first.shape[..axis].iter().product();
        let mut data = Vec::with_capacity(outer * axis_total * inner);
        for o in 0..outer {
            for p in parts {
                let block = p.shape[axis] * inner;
                let start = o * block;
                data.extend_from_slice(&p.data[start..start + block]);
            }
        }
        Tensor::new(out_shape, data)
    }

    /// Takes the `[start, start+len)` range of `axis`.
    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Tensor, TensorError> {
        let rank = self.rank();
        if axis >= rank {
            return Err(TensorError::InvalidAxis { axis, rank });
        }
        let size = self.shape[axis];
        if len == 0 || start + len > size {
            return Err(TensorError::SliceRange {
                axis,
                start,
                len,
                size,
            });
        }
        let inner: usize = self.shape[axis + 1..].iter().product();
        let outer: usize = self.shape[..axis].iter().product();
        let mut out_shape = self.shape.clone();
        out_shape[axis] = len;
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * size + start) * inner;
            data.extend_from_slice(&self.data[base..base + len * inner]);
        }
        Tensor::new(out_shape, data)
    }

    /// Reduces over `axes` with `op`. Reduced axes are removed unless
    /// `keep_dims` keeps them as size 1. Reducing every axis yields a
    /// rank-1 tensor of one element.
    pub fn reduce(
        &self,
        axes: &[usize],
        op: ReduceOp,
        keep_dims: bool,
    ) -> Result<Tensor, TensorError> {
        let rank = self.rank();
        let mut reduce_mask = vec![false; rank];
        for &a in axes {
            if a >= rank {
                return Err(TensorError::InvalidAxis { axis: a, rank });
            }
            reduce_mask[a] = true;
        }
        let out_shape_full: Vec<usize> = self
            .shape
            .iter()
            .enumerate()
            .map(|(d, &s)| if reduce_mask[d] { 1 } else { s })
            .collect();
        let out_count: usize = out_shape_full.iter().product();
        let reduced_count: usize = self
            .shape
            .iter()
            .enumerate()
            .filter(|(d, _)| reduce_mask[*d])
            .map(|(_, &s)| s)
            .product();

        let init = match op {
            ReduceOp::Sum | ReduceOp::Mean => 0.0,
            ReduceOp::Max => f64::NEG_INFINITY,
        };
        let mut out = vec![init; out_count];

        // Strides of the full-rank output (reduced axes pinned to size 1).
        let mut out_strides = vec![0usize; rank];
        let mut acc = 1usize;
        for d in (0..rank).rev() {
            out_strides[d] = if reduce_mask[d] { 0 } else { acc };
            if !reduce_mask[d] {
                acc *= self.shape[d];
            }
        }

        let mut idx = vec![0usize; rank];
        for &v in &self.data {
            let oi: usize = idx
                .iter()
                .zip(&out_strides)
                .map(|(&i, &s)| i * s)
                .sum::<usize>();
            match op {
                ReduceOp::Sum | ReduceOp::Mean => out[oi] += v,
                ReduceOp::Max => {
                    if v > out[oi] {
                        out[oi] = v;
                    }
                }
            }
            // Row-major index increment.
            for d in (0..rank).rev() {
                idx[d] += 1;
                if idx[d] < self.shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        if op == ReduceOp::Mean {
            for v in &mut out {
                *v /= reduced_count as f64;
            }
        }

        let out_shape: Vec<usize> = if keep_dims {
            out_shape_full
        } else {
            let kept: Vec<usize> = out_shape_full
                .iter()
                .enumerate()
                .filter(|(d, _)| !reduce_mask[*d])
                .map(|(_, &s)| s)
                .collect();
            if kept.is_empty() {
                vec![1]
            } else {
                kept
            }
        };
        Tensor::new(out_shape, out)
    }

    pub fn sum_all(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_all(&self) -> f64 {
        self.data.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }

    pub fn mean_all(&self) -> f64 {
        self.sum_all() / self.data.len() as f64
    }
}

// ---------------------------------------------------------------------------
// Flat binary serialization: 1 byte rank, then rank x 8-byte little-endian
// dims, then elements as little-endian IEEE-754 f64. Used for checkpoints
// and golden-file tests.
// ---------------------------------------------------------------------------

/// Largest rank accepted when decoding untrusted bytes.
pub const MAX_SERIALIZED_RANK: usize = 8;

impl Tensor {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + self.rank() * 8 + self.data.len() * 8);
        out.push(self.rank() as u8);
        for &d in &self.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Decodes one tensor starting at `bytes[0]`, returning it with the
    /// number of bytes consumed. Rejects rank 0, rank > [`MAX_SERIALIZED_RANK`],
    /// zero dims, truncation, and non-finite elements.
    pub fn from_bytes_prefix(bytes: &[u8]) -> Result<(Tensor, usize), TensorError> {
        let need = |offset: usize, needed: usize, have: usize| TensorError::Truncated {
            offset,
            needed,
            have,
        };
        if bytes.is_empty() {
            return Err(need(0, 1, 0));
        }
        let rank = bytes[0] as usize;
        if rank == 0 || rank > MAX_SERIALIZED_RANK {
            return Err(TensorError::Malformed {
                offset: 0,
                reason: format!("rank {rank} outside 1..={MAX_SERIALIZED_RANK}"),
            });
        }
        let mut offset = 1usize;
        let mut shape = Vec::with_capacity(rank);
        let mut count: usize = 1;
        for _ in 0..rank {
            if bytes.len() < offset + 8 {
                return Err(need(offset, offset + 8 - bytes.len(), bytes.len() - offset));
            }
            let dim = u64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
            if dim == 0 {
                return Err(TensorError::Malformed {
                    offset,
                    reason: "zero dimension".into(),
                });
            }
            let dim = usize::try_from(dim).map_err(|_| TensorError::Malformed {
                offset,
                reason: "dimension exceeds usize".into(),
            })?;
            count = count.checked_mul(dim).ok_or_else(|| TensorError::Malformed {
                offset,
                reason: "element count overflows usize".into(),
            })?;
            shape.push(dim);
            offset += 8;
        }
        let data_bytes = count.checked_mul(8).ok_or_else(|| TensorError::Malformed {
            offset,
            reason: "payload size overflows usize".into(),
        })?;
        if bytes.len() < offset + data_bytes {
            return Err(need(
                offset,
                offset + data_bytes - bytes.len(),
                bytes.len() - offset,
            ));
        }
        let mut data = Vec::with_capacity(count);
        for i in 0..count {
            let at = offset + i * 8;
            let v = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
            if !v.is_finite() {
                return Err(TensorError::Malformed {
                    offset: at,
                    reason: "non-finite element".into(),
                });
            }
            data.push(v);
        }
        Ok((Tensor { shape, data }, offset + data_bytes))
    }

    /// Decodes a buffer holding exactly one tensor.
    pub fn from_bytes(bytes: &[u8]) -> Result<Tensor, TensorError> {
        let (t, used) = Self::from_bytes_prefix(bytes)?;
        if used != bytes.len() {
            return Err(TensorError::Malformed {
                offset: used,
                reason: format!("{} trailing byte(s)", bytes.len() - used),
            });
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementwise_add_and_identities() {
        let a = Tensor::new([2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::new([2], vec![3.0, 4.0]).unwrap();
        assert_eq!(a.add(&b).unwrap().data(), &[4.0, 6.0]);

        let x = Tensor::new([2, 2], vec![1.0, -2.0, 3.5, 0.25]).unwrap();
        let ones = Tensor::ones([2, 2]).unwrap();
        assert_eq!(x.mul(&ones).unwrap(), x);
        assert_eq!(x.sub(&x).unwrap(), Tensor::zeros_like(&x));
    }

    #[test]
    fn elementwise_errors() {
        let a = Tensor::zeros([2]).unwrap();
        let b = Tensor::zeros([3]).unwrap();
        assert!(matches!(
            a.add(&b),
            Err(TensorError::ShapeMismatch { op: "add", .. })
        ));
        let z = Tensor::new([2], vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            a.div(&z),
            Err(TensorError::DivisionByZero { index: 1 })
        ));
    }

    #[test]
    fn matmul_hand_cases() {
        let i2 = Tensor::identity(2).unwrap();
        let m = Tensor::new([2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(i2.matmul(&m).unwrap(), m);

        let a = Tensor::new([1, 2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::new([2, 1], vec![3.0, 4.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[11.0]);
    }

    // Naive triple-loop oracle, kept independent of Tensor::matmul.
    fn matmul_oracle(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..k {
                    s += a[i * k + l] * b[l * n + j];
                }
                out[i * n + j] = s;
            }
        }
        out
    }

    #[test]
    fn matmul_matches_naive_oracle() {
        let (m, k, n) = (5, 7, 3);
        // Deterministic pseudo-random fill.
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a: Vec<f64> = (0..m * k).map(|_| next()).collect();
        let b: Vec<f64> = (0..k * n).map(|_| next()).collect();
        let want = matmul_oracle(&a, &b, m, k, n);
        let got = Tensor::new([m, k], a)
            .unwrap()
            .matmul(&Tensor::new([k, n], b).unwrap())
            .unwrap();
        for (g, w) in got.data().iter().zip(&want) {
            let rel = (g - w).abs() / w.abs().max(1e-12);
            assert!(rel <= 1e-12, "rel error {rel}");
        }
    }

    #[test]
    fn matmul_inner_dim_error() {
        let a = Tensor::zeros([2, 3]).unwrap();
        let b = Tensor::zeros([4, 2]).unwrap();
        assert!(matches!(a.matmul(&b), Err(TensorError::InnerDim { .. })));
    }

    #[test]
    fn reduce_basics() {
        let t = Tensor::new([3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.reduce(&[0], ReduceOp::Sum, false).unwrap().data(), &[6.0]);

        let onehot = Tensor::new([2, 2], vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(
            onehot.reduce(&[0, 1], ReduceOp::Max, false).unwrap().data(),
            &[1.0]
        );

        let t = Tensor::new([2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let rows = t.reduce(&[1], ReduceOp::Sum, false).unwrap();
        assert_eq!(rows.shape(), &[2]);
        assert_eq!(rows.data(), &[6.0, 15.0]);
        let keep = t.reduce(&[0], ReduceOp::Max, true).unwrap();
        assert_eq!(keep.shape(), &[1, 3]);
        assert_eq!(keep.data(), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn reduce_mean_matches_naive_accumulation() {
        let mut state = 99u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let vals: Vec<f64> = (0..2 * 4 * 5).map(|_| next()).collect();
        let t = Tensor::new([2, 4, 5], vals.clone()).unwrap();
        let got = t.reduce(&[0, 1, 2], ReduceOp::Mean, false).unwrap().data()[0];
        let mut acc = 0.0;
        for v in &vals {
            acc += v;
        }
        let want = acc / vals.len() as f64;
        assert!((got - want).abs() <= 1e-12);
    }

    #[test]
    fn reduce_invalid_axis() {
        let t = Tensor::zeros([2, 2]).unwrap();
        assert!(matches!(
            t.reduce(&[2], ReduceOp::Sum, false),
            Err(TensorError::InvalidAxis { axis: 2, rank: 2 })
        ));
    }

    #[test]
    fn reshape_preserves_row_major_sequence() {
        let t = Tensor::new([2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let r = t.reshape([3, 2]).unwrap();
        assert_eq!(r.data(), t.data());
        assert!(t.reshape([4, 2]).is_err());
    }

    #[test]
    fn concat_channel_arithmetic() {
        let a = Tensor::zeros([2, 8, 8, 16]).unwrap();
        let b = Tensor::zeros([2, 8, 8, 16]).unwrap();
        let c = Tensor::concat(&[&a, &b], 3).unwrap();
        assert_eq!(c.shape(), &[2, 8, 8, 32]);

        let single = Tensor::new([1, 2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(Tensor::concat(&[&single], 3).unwrap(), single);

        let bad = Tensor::zeros([2, 4, 8, 16]).unwrap();
        assert!(Tensor::concat(&[&a, &bad], 3).is_err());
    }

    #[test]
    fn concat_then_slice_roundtrip() {
        let a = Tensor::from_fn([2, 2, 3], |i| i as f64).unwrap();
        let b = Tensor::from_fn([2, 2, 2], |i| 100.0 + i as f64).unwrap();
        let cat = Tensor::concat(&[&a, &b], 2).unwrap();
        assert_eq!(cat.slice(2, 0, 3).unwrap(), a);
        assert_eq!(cat.slice(2, 3, 2).unwrap(), b);
    }

    #[test]
    fn serialization_golden_bytes() {
        // Pins the wire format: 1 byte rank, little-endian u64 dims,
        // little-endian IEEE-754 f64 elements.
        let t = Tensor::new([2], vec![1.0, -2.5]).unwrap();
        let expected = [
            0x01, // rank
            0x02, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, // dim 2
            0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xf0, 0x3f, // 1.0
            0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x04, 0xc0, // -2.5
        ];
        assert_eq!(t.to_bytes(), expected);
        assert_eq!(Tensor::from_bytes(&expected).unwrap(), t);
    }

    #[test]
    fn serialization_roundtrip_and_rejects() {
        let t = Tensor::from_fn([2, 3], |i| i as f64 * 0.5 - 1.0).unwrap();
        let bytes = t.to_bytes();
        assert_eq!(Tensor::from_bytes(&bytes).unwrap(), t);

        // Truncation.
        assert!(Tensor::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        // Rank 0.
        assert!(Tensor::from_bytes(&[0u8]).is_err());
        // Non-finite payload.
        let mut bad = Tensor::new([1], vec![1.0]).unwrap().to_bytes();
        let nan = f64::NAN.to_le_bytes();
        let n = bad.len();
        bad[n - 8..].copy_from_slice(&nan);
        assert!(Tensor::from_bytes(&bad).is_err());
    }

    #[test]
    fn shape4_conversion() {
        let s = Shape4::from_shape(&[2, 32, 32, 3]).unwrap();
        assert_eq!(s.dims(), [2, 32, 32, 3]);
        assert_eq!(s.len(), 2 * 32 * 32 * 3);
        assert!(Shape4::from_shape(&[2, 3]).is_err());
    }
}
