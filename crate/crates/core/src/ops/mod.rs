//! Forward and backward passes for every layer kind used by the bundled
//! architectures.
//!
//! Each `*_forward` returns the output together with a context capturing the
//! activations the matching `*_backward` needs. A context must only be used
//! with the forward call that produced it.

mod conv;
mod dense;
mod dropout;
mod loss;
mod norm;
mod pool;
mod relu;

pub use conv::{
    conv2d_backward, conv2d_forward, conv2d_output_dims, depthwise_conv2d_backward,
    depthwise_conv2d_forward, pointwise_conv2d_backward, pointwise_conv2d_forward, Conv2dCtx,
    ConvGrads, DepthwiseCtx, PointwiseCtx,
};
pub use dense::{dense_backward, dense_forward, DenseCtx, DenseGrads};
pub use dropout::{dropout_backward, dropout_forward, DropoutCtx};
pub use loss::{softmax_cross_entropy, SoftmaxXent};
pub use norm::{batchnorm_backward, batchnorm_forward, BatchNormCtx, BatchNormGrads};
pub use pool::{maxpool2d_backward, maxpool2d_forward, MaxPoolCtx};
pub use relu::{relu_backward, relu_forward, ReluCtx};

use crate::tensor::TensorError;
use thiserror::Error;

/// Spatial padding scheme for convolution and pooling.
///
/// `Same` pads with zeros so that stride-1 output keeps the input height and
/// width; odd padding puts the extra row/column at the bottom/right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Same,
    Valid,
}

/// Whether a forward pass runs in training or inference mode. Controls
/// batch-norm statistics and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Error)]
pub enum OpsError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("channel mismatch: kernel expects {expected} input channel(s), tensor has {actual}")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error("bad kernel shape {shape:?}: {reason}")]
    KernelShape { shape: Vec<usize>, reason: String },
    #[error("stride must be >= 1")]
    ZeroStride,
    #[error("{what} output dimension collapses below 1 (input {input}, kernel {kernel}, stride {stride})")]
    OutputTooSmall {
        what: &'static str,
        input: usize,
        kernel: usize,
        stride: usize,
    },
    #[error("pool window {k}x{k} larger than input {h}x{w}")]
    WindowTooLarge { k: usize, h: usize, w: usize },
    #[error("batch normalization in train mode needs batch size >= 2, got {n}")]
    BatchTooSmall { n: usize },
    #[error("dropout rate must lie in [0, 1), got {rate}")]
    InvalidRate { rate: f64 },
    #[error("label {label} at position {index} outside [0, {classes})")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        classes: usize,
    },
    #[error("{what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
}

/// Output extent of a convolution/pool along one spatial dimension, plus the
/// leading (top/left) zero padding.
pub(crate) fn out_extent(
    input: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
    what: &'static str,
) -> Result<(usize, usize), OpsError> {
    if stride == 0 {
        return Err(OpsError::ZeroStride);
    }
    match padding {
        Padding::Same => {
            let out = input.div_ceil(stride);
            let span = (out - 1) * stride + kernel;
            let total = span.saturating_sub(input);
            Ok((out, total / 2))
        }
        Padding::Valid => {
            if kernel > input {
                return Err(OpsError::OutputTooSmall {
                    what,
                    input,
                    kernel,
                    stride,
                });
            }
            Ok(((input - kernel) / stride + 1, 0))
        }
    }
}
