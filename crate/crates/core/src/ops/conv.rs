//! 2D convolution (standard, depthwise, pointwise) over NHWC tensors.
//!
//! The standard convolution lowers each input window to a row of a patch
//! matrix (im2col) and multiplies by the kernel viewed as a
//! `[kh*kw*c_in, c_out]` matrix. Depthwise and pointwise convolutions are
//! separate direct implementations: depthwise filters each channel
//! independently, pointwise mixes channels per pixel and doubles as a second
//! algebraic route for 1x1 convolution in tests.

use rayon::prelude::*;

use super::{out_extent, OpsError, Padding};
use crate::tensor::{Shape4, Tensor};

/// Output `(oh, ow)` for a convolution of the given geometry.
pub fn conv2d_output_dims(
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: Padding,
) -> Result<(usize, usize), OpsError> {
    let (oh, _) = out_extent(h, kh, stride, padding, "height")?;
    let (ow, _) = out_extent(w, kw, stride, padding, "width")?;
    Ok((oh, ow))
}

/// Context captured by [`conv2d_forward`] for the backward pass.
#[derive(Debug)]
pub struct Conv2dCtx {
    input_shape: Shape4,
    cols: Tensor,
    kernel: Tensor,
    stride: usize,
    pad_top: usize,
    pad_left: usize,
    out: Shape4,
}

/// Gradients of a convolution with respect to its input, kernel, and bias.
#[derive(Debug)]
pub struct ConvGrads {
    pub x: Tensor,
    pub kernel: Tensor,
    pub bias: Tensor,
}

fn kernel_dims(kernel: &Tensor) -> Result<(usize, usize, usize, usize), OpsError> {
    match kernel.shape()[..] {
        [kh, kw, c_in, c_out] => Ok((kh, kw, c_in, c_out)),
        _ => Err(OpsError::KernelShape {
            shape: kernel.shape().to_vec(),
            reason: "expected [kh, kw, c_in, c_out]".into(),
        }),
    }
}

/// Builds the `[n*oh*ow, kh*kw*c]` patch matrix, zero-filling padded cells.
#[allow(clippy::too_many_arguments)]
fn im2col(
    x: &Tensor,
    s: Shape4,
    kh: usize,
    kw: usize,
    stride: usize,
    pad_top: usize,
    pad_left: usize,
    oh: usize,
    ow: usize,
) -> Tensor {
    let k = kh * kw * s.c;
    let rows_per_image = oh * ow;
    let mut cols = vec![0.0f64; s.n * rows_per_image * k];
    let data = x.data();
    let image = s.h * s.w * s.c;
    cols.par_chunks_mut(rows_per_image * k)
        .enumerate()
        .for_each(|(n, chunk)| {
            let base = n * image;
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = &mut chunk[(oy * ow + ox) * k..(oy * ow + ox + 1) * k];
                    for ky in 0..kh {
                        let iy = (oy * stride + ky) as isize - pad_top as isize;
                        if iy < 0 || iy >= s.h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * stride + kx) as isize - pad_left as isize;
                            if ix < 0 || ix >= s.w as isize {
                                continue;
                            }
                            let src = base + (iy as usize * s.w + ix as usize) * s.c;
                            let dst = (ky * kw + kx) * s.c;
                            row[dst..dst + s.c].copy_from_slice(&data[src..src + s.c]);
                        }
                    }
                }
            }
        });
    Tensor::new([s.n * rows_per_image, k], cols).expect("im2col shape is consistent")
}

/// Scatter-adds patch-matrix gradients back onto the input layout.
#[allow(clippy::too_many_arguments)]
fn col2im(
    grad_cols: &Tensor,
    s: Shape4,
    kh: usize,
    kw: usize,
    stride: usize,
    pad_top: usize,
    pad_left: usize,
    oh: usize,
    ow: usize,
) -> Tensor {
    let k = kh * kw * s.c;
    let rows_per_image = oh * ow;
    let mut grad = vec![0.0f64; s.len()];
    let image = s.h * s.w * s.c;
    let cols = grad_cols.data();
    grad.par_chunks_mut(image).enumerate().for_each(|(n, out)| {
        let chunk = &cols[n * rows_per_image * k..(n + 1) * rows_per_image * k];
        for oy in 0..oh {
            for ox in 0..ow {
                let row = &chunk[(oy * ow + ox) * k..(oy * ow + ox + 1) * k];
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - pad_top as isize;
                    if iy < 0 || iy >= s.h as isize {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad_left as isize;
                        if ix < 0 || ix >= s.w as isize {
                            continue;
                        }
                        let dst = (iy as usize * s.w + ix as usize) * s.c;
                        let src = (ky * kw + kx) * s.c;
                        for c in 0..s.c {
                            out[dst + c] += row[src + c];
                        }
                    }
                }
            }
        }
    });
    Tensor::new(s.dims(), grad).expect("col2im shape is consistent")
}

/// `a^T * b` for `a: [m, k]`, `b: [m, n]` without materializing the transpose.
pub(super) fn gemm_tn(a: &Tensor, b: &Tensor, m: usize, k: usize, n: usize) -> Tensor {
    let mut out = vec![0.0f64; k * n];
    let ad = a.data();
    let bd = b.data();
    out.par_chunks_mut(n).enumerate().for_each(|(kk, row)| {
        for mm in 0..m {
            let av = ad[mm * k + kk];
            let brow = &bd[mm * n..(mm + 1) * n];
            for (r, &bv) in row.iter_mut().zip(brow) {
                *r += av * bv;
            }
        }
    });
    Tensor::new([k, n], out).expect("gemm_tn shape is consistent")
}

/// `a * b^T` for `a: [m, k]`, `b: [n, k]`.
pub(super) fn gemm_nt(a: &Tensor, b: &Tensor, m: usize, k: usize, n: usize) -> Tensor {
    let mut out = vec![0.0f64; m * n];
    let ad = a.data();
    let bd = b.data();
    out.par_chunks_mut(n).enumerate().for_each(|(mm, row)| {
        let arow = &ad[mm * k..(mm + 1) * k];
        for (nn, r) in row.iter_mut().enumerate() {
            let brow = &bd[nn * k..(nn + 1) * k];
            let mut acc = 0.0;
            for (&av, &bv) in arow.iter().zip(brow) {
                acc += av * bv;
            }
            *r = acc;
        }
    });
    Tensor::new([m, n], out).expect("gemm_nt shape is consistent")
}

/// Standard 2D convolution: each output element is the dot product of the
/// kernel with the corresponding input window, plus the output channel bias.
pub fn conv2d_forward(
    x: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: Padding,
) -> Result<(Tensor, Conv2dCtx), OpsError> {
    let s = Shape4::from_shape(x.shape())?;
    let (kh, kw, c_in, c_out) = kernel_dims(kernel)?;
    if c_in != s.c {
        return Err(OpsError::ChannelMismatch {
            expected: c_in,
            actual: s.c,
        });
    }
    if bias.shape() != [c_out] {
        return Err(OpsError::KernelShape {
            shape: bias.shape().to_vec(),
            reason: format!("bias must be [{c_out}]"),
        });
    }
    let (oh, pad_top) = out_extent(s.h, kh, stride, padding, "height")?;
    let (ow, pad_left) = out_extent(s.w, kw, stride, padding, "width")?;

    let cols = im2col(x, s, kh, kw, stride, pad_top, pad_left, oh, ow);
    let weights = kernel.reshape([kh * kw * c_in, c_out])?;
    let mut out = cols.matmul(&weights)?;
    let bd = bias.data();
    for row in out.data_mut().chunks_exact_mut(c_out) {
        for (v, &b) in row.iter_mut().zip(bd) {
            *v += b;
        }
    }
    let out_shape = Shape4::new(s.n, oh, ow, c_out);
    let out = out.reshape(out_shape.dims())?;
    Ok((
        out,
        Conv2dCtx {
            input_shape: s,
            cols,
            kernel: kernel.clone(),
            stride,
            pad_top,
            pad_left,
            out: out_shape,
        },
    ))
}

pub fn conv2d_backward(ctx: &Conv2dCtx, grad_out: &Tensor) -> Result<ConvGrads, OpsError> {
    if grad_out.shape() != ctx.out.dims() {
        return Err(OpsError::LengthMismatch {
            what: "conv2d grad_out elements",
            expected: ctx.out.len(),
            actual: grad_out.len(),
        });
    }
    let (kh, kw, c_in, c_out) = kernel_dims(&ctx.kernel)?;
    let m = ctx.out.n * ctx.out.h * ctx.out.w;
    let k = kh * kw * c_in;
    let g = grad_out.reshape([m, c_out])?;

    let mut grad_bias = vec![0.0f64; c_out];
    for row in g.data().chunks_exact(c_out) {
        for (b, &v) in grad_bias.iter_mut().zip(row) {
            *b += v;
        }
    }

    let grad_kernel = gemm_tn(&ctx.cols, &g, m, k, c_out).reshape([kh, kw, c_in, c_out])?;
    let weights = ctx.kernel.reshape([k, c_out])?;
    let grad_cols = gemm_nt(&g, &weights, m, c_out, k);
    let grad_x = col2im(
        &grad_cols,
        ctx.input_shape,
        kh,
        kw,
        ctx.stride,
        ctx.pad_top,
        ctx.pad_left,
        ctx.out.h,
        ctx.out.w,
    );
    Ok(ConvGrads {
        x: grad_x,
        kernel: grad_kernel,
        bias: Tensor::new([c_out], grad_bias)?,
    })
}

/// Context captured by [`depthwise_conv2d_forward`].
#[derive(Debug)]
pub struct DepthwiseCtx {
    input: Tensor,
    kernel: Tensor,
    stride: usize,
    pad_top: usize,
    pad_left: usize,
    out: Shape4,
}

/// Depthwise convolution: one `[kh, kw]` filter per input channel, no
/// cross-channel mixing. Kernel shape is `[kh, kw, c, 1]`.
pub fn depthwise_conv2d_forward(
    x: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: Padding,
) -> Result<(Tensor, DepthwiseCtx), OpsError> {
    let s = Shape4::from_shape(x.shape())?;
    let (kh, kw, c, mult) = kernel_dims(kernel)?;
    if mult != 1 {
        return Err(OpsError::KernelShape {
            shape: kernel.shape().to_vec(),
            reason: "depthwise kernel must be [kh, kw, c, 1]".into(),
        });
    }
    if c != s.c {
        return Err(OpsError::ChannelMismatch {
            expected: c,
            actual: s.c,
        });
    }
    if bias.shape() != [c] {
        return Err(OpsError::KernelShape {
            shape: bias.shape().to_vec(),
            reason: format!("bias must be [{c}]"),
        });
    }
    let (oh, pad_top) = out_extent(s.h, kh, stride, padding, "height")?;
    let (ow, pad_left) = out_extent(s.w, kw, stride, padding, "width")?;
    let out_shape = Shape4::new(s.n, oh, ow, c);
    let mut out = vec![0.0f64; out_shape.len()];
    let kd = kernel.data();
    let bd = bias.data();
    let xd = x.data();
    let image = s.h * s.w * s.c;
    out.par_chunks_mut(oh * ow * c).enumerate().for_each(|(n, chunk)| {
        let base = n * image;
        for oy in 0..oh {
            for ox in 0..ow {
                let dst = (oy * ow + ox) * c;
                for ch in 0..c {
                    let mut acc = bd[ch];
                    for ky in 0..kh {
                        let iy = (oy * stride + ky) as isize - pad_top as isize;
                        if iy < 0 || iy >= s.h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * stride + kx) as isize - pad_left as isize;
                            if ix < 0 || ix >= s.w as isize {
                                continue;
                            }
                            let xi = base + (iy as usize * s.w + ix as usize) * s.c + ch;
                            acc += xd[xi] * kd[(ky * kw + kx) * c + ch];
                        }
                    }
                    chunk[dst + ch] = acc;
                }
            }
        }
    });
    Ok((
        Tensor::new(out_shape.dims(), out)?,
        DepthwiseCtx {
            input: x.clone(),
            kernel: kernel.clone(),
            stride,
            pad_top,
            pad_left,
            out: out_shape,
        },
    ))
}

pub fn depthwise_conv2d_backward(
    ctx: &DepthwiseCtx,
    grad_out: &Tensor,
) -> Result<ConvGrads, OpsError> {
    if grad_out.shape() != ctx.out.dims() {
        return Err(OpsError::LengthMismatch {
            what: "depthwise grad_out elements",
            expected: ctx.out.len(),
            actual: grad_out.len(),
        });
    }
    let s = Shape4::from_shape(ctx.input.shape())?;
    let (kh, kw, c, _) = kernel_dims(&ctx.kernel)?;
    let (oh, ow) = (ctx.out.h, ctx.out.w);
    let mut grad_x = vec![0.0f64; s.len()];
    let mut grad_k = vec![0.0f64; ctx.kernel.len()];
    let mut grad_b = vec![0.0f64; c];
    let xd = ctx.input.data();
    let kd = ctx.kernel.data();
    let gd = grad_out.data();
    for n in 0..s.n {
        let base = n * s.h * s.w * s.c;
        let gbase = n * oh * ow * c;
        for oy in 0..oh {
            for ox in 0..ow {
                let gidx = gbase + (oy * ow + ox) * c;
                for ch in 0..c {
                    let g = gd[gidx + ch];
                    grad_b[ch] += g;
                    for ky in 0..kh {
                        let iy = (oy * ctx.stride + ky) as isize - ctx.pad_top as isize;
                        if iy < 0 || iy >= s.h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * ctx.stride + kx) as isize - ctx.pad_left as isize;
                            if ix < 0 || ix >= s.w as isize {
                                continue;
                            }
                            let xi = base + (iy as usize * s.w + ix as usize) * s.c + ch;
                            let ki = (ky * kw + kx) * c + ch;
                            grad_k[ki] += xd[xi] * g;
                            grad_x[xi] += kd[ki] * g;
                        }
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        x: Tensor::new(s.dims(), grad_x)?,
        kernel: Tensor::new([kh, kw, c, 1], grad_k)?,
        bias: Tensor::new([c], grad_b)?,
    })
}

/// Context captured by [`pointwise_conv2d_forward`].
#[derive(Debug)]
pub struct PointwiseCtx {
    flat_input: Tensor,
    kernel: Tensor,
    out: Shape4,
}

/// Bundled gradients for a pointwise convolution.
pub type PointwiseGrads = ConvGrads;

/// 1x1 convolution implemented as a per-pixel dense layer over channels.
/// Kernel shape is `[1, 1, c_in, c_out]`.
pub fn pointwise_conv2d_forward(
    x: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
) -> Result<(Tensor, PointwiseCtx), OpsError> {
    let s = Shape4::from_shape(x.shape())?;
    let (kh, kw, c_in, c_out) = kernel_dims(kernel)?;
    if kh != 1 || kw != 1 {
        return Err(OpsError::KernelShape {
            shape: kernel.shape().to_vec(),
            reason: "pointwise kernel must be [1, 1, c_in, c_out]".into(),
        });
    }
    if c_in != s.c {
        return Err(OpsError::ChannelMismatch {
            expected: c_in,
            actual: s.c,
        });
    }
    if bias.shape() != [c_out] {
        return Err(OpsError::KernelShape {
            shape: bias.shape().to_vec(),
            reason: format!("bias must be [{c_out}]"),
        });
    }
    let pixels = s.n * s.h * s.w;
    let flat = x.reshape([pixels, s.c])?;
    let weights = kernel.reshape([c_in, c_out])?;
    let mut out = flat.matmul(&weights)?;
    for row in out.data_mut().chunks_exact_mut(c_out) {
        for (v, &b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
    let out_shape = Shape4::new(s.n, s.h, s.w, c_out);
    Ok((
        out.reshape(out_shape.dims())?,
        PointwiseCtx {
            flat_input: flat,
            kernel: kernel.clone(),
            out: out_shape,
        },
    ))
}

pub fn pointwise_conv2d_backward(
    ctx: &PointwiseCtx,
    grad_out: &Tensor,
) -> Result<PointwiseGrads, OpsError> {
    if grad_out.shape() != ctx.out.dims() {
        return Err(OpsError::LengthMismatch {
            what: "pointwise grad_out elements",
            expected: ctx.out.len(),
            actual: grad_out.len(),
        });
    }
    let (_, _, c_in, c_out) = kernel_dims(&ctx.kernel)?;
    let pixels = ctx.out.n * ctx.out.h * ctx.out.w;
    let g = grad_out.reshape([pixels, c_out])?;
    let mut grad_bias = vec![0.0f64; c_out];
    for row in g.data().chunks_exact(c_out) {
        for (b, &v) in grad_bias.iter_mut().zip(row) {
            *b += v;
        }
    }
    let grad_kernel = gemm_tn(&ctx.flat_input, &g, pixels, c_in, c_out)
        .reshape([1, 1, c_in, c_out])?;
    let weights = ctx.kernel.reshape([c_in, c_out])?;
    let grad_flat = gemm_nt(&g, &weights, pixels, c_out, c_in);
    let grad_x = grad_flat.reshape([ctx.out.n, ctx.out.h, ctx.out.w, c_in])?;
    Ok(ConvGrads {
        x: grad_x,
        kernel: grad_kernel,
        bias: Tensor::new([c_out], grad_bias)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fill(shape: &[usize], seed: u64) -> Tensor {
        let mut state = seed | 1;
        Tensor::from_fn(shape.to_vec(), move |_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .unwrap()
    }

    /// Direct 7-loop convolution oracle, independent of im2col.
    #[allow(clippy::too_many_arguments)]
    fn conv_oracle(
        x: &Tensor,
        kernel: &Tensor,
        bias: &Tensor,
        stride: usize,
        pad_top: usize,
        pad_left: usize,
        oh: usize,
        ow: usize,
    ) -> Tensor {
        let s = Shape4::from_shape(x.shape()).unwrap();
        let [kh, kw, c_in, c_out]: [usize; 4] = kernel.shape().try_into().unwrap();
        let mut out = Tensor::zeros([s.n, oh, ow, c_out]).unwrap();
        for n in 0..s.n {
            for oy in 0..oh {
                for ox in 0..ow {
                    for co in 0..c_out {
                        let mut acc = bias.data()[co];
                        for ky in 0..kh {
                            for kx in 0..kw {
                                for ci in 0..c_in {
                                    let iy = (oy * stride + ky) as isize - pad_top as isize;
                                    let ix = (ox * stride + kx) as isize - pad_left as isize;
                                    if iy < 0
                                        || iy >= s.h as isize
                                        || ix < 0
                                        || ix >= s.w as isize
                                    {
                                        continue;
                                    }
                                    let xi = ((n * s.h + iy as usize) * s.w + ix as usize)
                                        * s.c
                                        + ci;
                                    let ki = ((ky * kw + kx) * c_in + ci) * c_out + co;
                                    acc += x.data()[xi] * kernel.data()[ki];
                                }
                            }
                        }
                        let oi = ((n * oh + oy) * ow + ox) * c_out + co;
                        out.data_mut()[oi] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn identity_1x1_kernel() {
        let x = fill(&[1, 4, 4, 1], 7);
        let kernel = Tensor::new([1, 1, 1, 1], vec![1.0]).unwrap();
        let bias = Tensor::zeros([1]).unwrap();
        let (y, _) = conv2d_forward(&x, &kernel, &bias, 1, Padding::Same).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn all_ones_kernel_counts_window() {
        let x = Tensor::ones([1, 5, 5, 1]).unwrap();
        let kernel = Tensor::ones([3, 3, 1, 1]).unwrap();
        let bias = Tensor::zeros([1]).unwrap();
        let (y, _) = conv2d_forward(&x, &kernel, &bias, 1, Padding::Valid).unwrap();
        assert_eq!(y.shape(), &[1, 3, 3, 1]);
        assert!(y.data().iter().all(|&v| v == 9.0));
    }

    #[test]
    fn conv_matches_direct_oracle() {
        for (stride, padding) in [(1, Padding::Same), (1, Padding::Valid), (2, Padding::Same)] {
            let x = fill(&[1, 8, 8, 2], 11);
            let kernel = fill(&[3, 3, 2, 4], 13);
            let bias = fill(&[4], 17);
            let (y, _) = conv2d_forward(&x, &kernel, &bias, stride, padding).unwrap();
            let (oh, pad_top) = out_extent(8, 3, stride, padding, "height").unwrap();
            let (ow, pad_left) = out_extent(8, 3, stride, padding, "width").unwrap();
            let want = conv_oracle(&x, &kernel, &bias, stride, pad_top, pad_left, oh, ow);
            assert_eq!(y.shape(), want.shape());
            for (a, b) in y.data().iter().zip(want.data()) {
                assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn same_padding_preserves_spatial_dims_at_stride_1() {
        let x = fill(&[2, 7, 5, 3], 3);
        let kernel = fill(&[3, 3, 3, 2], 5);
        let bias = Tensor::zeros([2]).unwrap();
        let (y, _) = conv2d_forward(&x, &kernel, &bias, 1, Padding::Same).unwrap();
        assert_eq!(y.shape(), &[2, 7, 5, 2]);
    }

    #[test]
    fn channel_mismatch_and_collapsed_output_errors() {
        let x = fill(&[1, 4, 4, 2], 23);
        let kernel = fill(&[3, 3, 3, 4], 29);
        let bias = Tensor::zeros([4]).unwrap();
        assert!(matches!(
            conv2d_forward(&x, &kernel, &bias, 1, Padding::Same),
            Err(OpsError::ChannelMismatch { expected: 3, actual: 2 })
        ));

        let kernel = fill(&[5, 5, 2, 1], 31);
        let bias = Tensor::zeros([1]).unwrap();
        assert!(matches!(
            conv2d_forward(&x, &kernel, &bias, 1, Padding::Valid),
            Err(OpsError::OutputTooSmall { .. })
        ));
    }

    #[test]
    fn zero_grad_out_gives_zero_gradients() {
        let x = fill(&[1, 4, 4, 2], 41);
        let kernel = fill(&[3, 3, 2, 3], 43);
        let bias = fill(&[3], 47);
        let (y, ctx) = conv2d_forward(&x, &kernel, &bias, 1, Padding::Same).unwrap();
        let grads = conv2d_backward(&ctx, &Tensor::zeros_like(&y)).unwrap();
        assert!(grads.x.data().iter().all(|&v| v == 0.0));
        assert!(grads.kernel.data().iter().all(|&v| v == 0.0));
        assert!(grads.bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grad_bias_is_per_channel_sum() {
        let x = fill(&[2, 4, 4, 1], 53);
        let kernel = fill(&[3, 3, 1, 2], 59);
        let bias = Tensor::zeros([2]).unwrap();
        let (y, ctx) = conv2d_forward(&x, &kernel, &bias, 1, Padding::Same).unwrap();
        let g = fill(y.shape(), 61);
        let grads = conv2d_backward(&ctx, &g).unwrap();
        for co in 0..2 {
            let want: f64 = g.data().iter().skip(co).step_by(2).sum();
            assert!((grads.bias.data()[co] - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn depthwise_identity_kernels_pass_input_through() {
        let x = fill(&[1, 4, 4, 3], 67);
        // 1x1 depthwise kernel of ones = per-channel identity.
        let kernel = Tensor::ones([1, 1, 3, 1]).unwrap();
        let bias = Tensor::zeros([3]).unwrap();
        let (y, _) = depthwise_conv2d_forward(&x, &kernel, &bias, 1, Padding::Same).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn depthwise_has_no_cross_channel_mixing() {
        // Channel 1 carries signal; channel 0 of the output must ignore it.
        let mut x = Tensor::zeros([1, 3, 3, 2]).unwrap();
        for i in 0..9 {
            x.data_mut()[i * 2 + 1] = (i + 1) as f64;
        }
        let kernel = Tensor::ones([3, 3, 2, 1]).unwrap();
        let bias = Tensor::zeros([2]).unwrap();
        let (y, _) = depthwise_conv2d_forward(&x, &kernel, &bias, 1, Padding::Valid).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 2]);
        assert_eq!(y.data()[0], 0.0);
        assert_eq!(y.data()[1], 45.0);
    }

    #[test]
    fn separable_pair_matches_two_stage_oracle() {
        let x = fill(&[1, 6, 6, 3], 71);
        let dw_kernel = fill(&[3, 3, 3, 1], 73);
        let dw_bias = fill(&[3], 79);
        let pw_kernel = fill(&[1, 1, 3, 5], 83);
        let pw_bias = fill(&[5], 89);

        let (mid, _) = depthwise_conv2d_forward(&x, &dw_kernel, &dw_bias, 1, Padding::Same).unwrap();
        let (y, _) = pointwise_conv2d_forward(&mid, &pw_kernel, &pw_bias).unwrap();

        // Oracle stage 1: per-channel direct convolution.
        let s = Shape4::from_shape(x.shape()).unwrap();
        let mut mid_want = Tensor::zeros([1, 6, 6, 3]).unwrap();
        for oy in 0..6usize {
            for ox in 0..6usize {
                for c in 0..3usize {
                    let mut acc = dw_bias.data()[c];
                    for ky in 0..3usize {
                        for kx in 0..3usize {
                            let iy = (oy + ky) as isize - 1;
                            let ix = (ox + kx) as isize - 1;
                            if !(0..6).contains(&iy) || !(0..6).contains(&ix) {
                                continue;
                            }
                            let xi = ((iy as usize) * s.w + ix as usize) * s.c + c;
                            acc += x.data()[xi] * dw_kernel.data()[(ky * 3 + kx) * 3 + c];
                        }
                    }
                    mid_want.data_mut()[(oy * 6 + ox) * 3 + c] = acc;
                }
            }
        }
        // Oracle stage 2: 1x1 mixing.
        let mut want = Tensor::zeros([1, 6, 6, 5]).unwrap();
        for p in 0..36usize {
            for co in 0..5usize {
                let mut acc = pw_bias.data()[co];
                for ci in 0..3usize {
                    acc += mid_want.data()[p * 3 + ci] * pw_kernel.data()[ci * 5 + co];
                }
                want.data_mut()[p * 5 + co] = acc;
            }
        }
        for (a, b) in y.data().iter().zip(want.data()) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn separable_parameter_count_beats_standard_conv() {
        // kh*kw*c + c*c_out < kh*kw*c*c_out whenever c_out > 1 and kh*kw > 1.
        for (kh_kw, c, c_out) in [(9usize, 3usize, 2usize), (9, 16, 32), (25, 8, 8)] {
            assert!(kh_kw * c + c * c_out < kh_kw * c * c_out);
        }
    }

    #[test]
    fn pointwise_equals_conv2d_1x1_equals_per_pixel_dense() {
        let x = fill(&[2, 5, 5, 3], 97);
        let kernel = fill(&[1, 1, 3, 4], 101);
        let bias = fill(&[4], 103);
        let (a, _) = conv2d_forward(&x, &kernel, &bias, 1, Padding::Same).unwrap();
        let (b, _) = pointwise_conv2d_forward(&x, &kernel, &bias).unwrap();
        // Third route: every pixel through one dense layer over channels.
        let flat = x.reshape([2 * 5 * 5, 3]).unwrap();
        let weights = kernel.reshape([3, 4]).unwrap();
        let (dense_out, _) = crate::ops::dense_forward(&flat, &weights, &bias).unwrap();
        let c = dense_out.reshape([2, 5, 5, 4]).unwrap();
        assert_eq!(a.shape(), b.shape());
        for ((u, v), w) in a.data().iter().zip(b.data()).zip(c.data()) {
            assert!((u - v).abs() <= 1e-12);
            assert!((v - w).abs() <= 1e-12);
        }
    }
}
