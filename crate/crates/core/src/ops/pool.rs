//! 2D max pooling over NHWC tensors.
//!
//! Ties inside a window break to the first element in row-major window
//! order, which makes the backward routing deterministic. With `Same`
//! padding the window is clipped to the input, so padded cells never win
//! and the window may exceed the input extent; with `Valid` padding the
//! window must fit at least once.

use super::{out_extent, OpsError, Padding};
use crate::tensor::{Shape4, Tensor};

#[derive(Debug)]
pub struct MaxPoolCtx {
    input_shape: Shape4,
    /// Flat input index of the window maximum, per output element.
    argmax: Vec<usize>,
    out: Shape4,
}

pub fn maxpool2d_forward(
    x: &Tensor,
    k: usize,
    stride: usize,
    padding: Padding,
) -> Result<(Tensor, MaxPoolCtx), OpsError> {
    let s = Shape4::from_shape(x.shape())?;
    if k == 0 {
        return Err(OpsError::KernelShape {
            shape: vec![k, k],
            reason: "pool window must be >= 1".into(),
        });
    }
    if padding == Padding::Valid && (k > s.h || k > s.w) {
        return Err(OpsError::WindowTooLarge { k, h: s.h, w: s.w });
    }
    let (oh, pad_top) = out_extent(s.h, k, stride, padding, "height")?;
    let (ow, pad_left) = out_extent(s.w, k, stride, padding, "width")?;
    let out_shape = Shape4::new(s.n, oh, ow, s.c);
    let mut out = vec![0.0f64; out_shape.len()];
    let mut argmax = vec![0usize; out_shape.len()];
    let xd = x.data();
    for n in 0..s.n {
        let base = n * s.h * s.w * s.c;
        for oy in 0..oh {
            for ox in 0..ow {
                let dst = ((n * oh + oy) * ow + ox) * s.c;
                for c in 0..s.c {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = usize::MAX;
                    for ky in 0..k {
                        let iy = (oy * stride + ky) as isize - pad_top as isize;
                        if iy < 0 || iy >= s.h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * stride + kx) as isize - pad_left as isize;
                            if ix < 0 || ix >= s.w as isize {
                                continue;
                            }
                            let xi = base + (iy as usize * s.w + ix as usize) * s.c + c;
                            // Strict > keeps the first row-major maximum.
                            if xd[xi] > best {
                                best = xd[xi];
                                best_idx = xi;
                            }
                        }
                    }
                    debug_assert!(best_idx != usize::MAX, "window with no in-bounds cell");
                    out[dst + c] = best;
                    argmax[dst + c] = best_idx;
                }
            }
        }
    }
    Ok((
        Tensor::new(out_shape.dims(), out)?,
        MaxPoolCtx {
            input_shape: s,
            argmax,
            out: out_shape,
        },
    ))
}

/// Routes each output gradient to the position that produced the window
/// maximum. Overlapping windows accumulate.
pub fn maxpool2d_backward(ctx: &MaxPoolCtx, grad_out: &Tensor) -> Result<Tensor, OpsError> {
    if grad_out.shape() != ctx.out.dims() {
        return Err(OpsError::LengthMismatch {
            what: "maxpool grad_out elements",
            expected: ctx.out.len(),
            actual: grad_out.len(),
        });
    }
    let mut grad = vec![0.0f64; ctx.input_shape.len()];
    for (&idx, &g) in ctx.argmax.iter().zip(grad_out.data()) {
        grad[idx] += g;
    }
    Ok(Tensor::new(ctx.input_shape.dims(), grad)?)
}
