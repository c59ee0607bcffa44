//! Per-layer gradient checks: every backward must match central finite
//! differences of a scalar loss through the forward pass.
//!
//! The loss is a fixed random weighting of the layer output, so the full
//! Jacobian action is exercised. f64 with h = 1e-5 keeps the finite
//! difference noise orders of magnitude below the 1e-4 gate.

use mbinception::graph::gradcheck::{finite_diff_grad, max_rel_err};
use mbinception::ops::{
    batchnorm_forward, conv2d_backward, conv2d_forward, dense_backward, dense_forward,
    depthwise_conv2d_backward, depthwise_conv2d_forward, maxpool2d_backward, maxpool2d_forward,
    pointwise_conv2d_backward, pointwise_conv2d_forward, relu_backward, relu_forward,
    softmax_cross_entropy, Mode, Padding,
};
use mbinception::ops::batchnorm_backward;
use mbinception::tensor::Tensor;

const TOL: f64 = 1e-4;
const H: f64 = 1e-5;

fn fill(shape: &[usize], seed: u64) -> Tensor {
    let mut state = seed | 1;
    Tensor::from_fn(shape.to_vec(), move |_| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    })
    .unwrap()
}

/// dL/dy for L = sum(w .* y); doubles as the gradient seed.
fn loss_weights(shape: &[usize], seed: u64) -> Tensor {
    fill(shape, seed.wrapping_mul(2654435761).wrapping_add(7))
}

fn weighted(y: &Tensor, w: &Tensor) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

#[test]
fn conv2d_gradients_match_finite_differences() {
    for (stride, padding) in [(1, Padding::Same), (2, Padding::Same), (1, Padding::Valid)] {
        let x = fill(&[2, 6, 6, 2], 11);
        let kernel = fill(&[3, 3, 2, 3], 13);
        let bias = fill(&[3], 17);
        let (y, ctx) = conv2d_forward(&x, &kernel, &bias, stride, padding).unwrap();
        let w = loss_weights(y.shape(), 19);
        let grads = conv2d_backward(&ctx, &w).unwrap();

        let fd_x = finite_diff_grad(&x, H, |x| {
            weighted(&conv2d_forward(x, &kernel, &bias, stride, padding).unwrap().0, &w)
        });
        assert!(max_rel_err(&grads.x, &fd_x) <= TOL);

        let fd_k = finite_diff_grad(&kernel, H, |k| {
            weighted(&conv2d_forward(&x, k, &bias, stride, padding).unwrap().0, &w)
        });
        assert!(max_rel_err(&grads.kernel, &fd_k) <= TOL);

        let fd_b = finite_diff_grad(&bias, H, |b| {
            weighted(&conv2d_forward(&x, &kernel, b, stride, padding).unwrap().0, &w)
        });
        assert!(max_rel_err(&grads.bias, &fd_b) <= TOL);
    }
}

#[test]
fn depthwise_gradients_match_finite_differences() {
    let x = fill(&[2, 5, 5, 3], 23);
    let kernel = fill(&[3, 3, 3, 1], 29);
    let bias = fill(&[3], 31);
    for stride in [1usize, 2] {
        let (y, ctx) = depthwise_conv2d_forward(&x, &kernel, &bias, stride, Padding::Same).unwrap();
        let w = loss_weights(y.shape(), 37);
        let grads = depthwise_conv2d_backward(&ctx, &w).unwrap();

        let fd_x = finite_diff_grad(&x, H, |x| {
            weighted(
                &depthwise_conv2d_forward(x, &kernel, &bias, stride, Padding::Same).unwrap().0,
                &w,
            )
        });
        assert!(max_rel_err(&grads.x, &fd_x) <= TOL);

        let fd_k = finite_diff_grad(&kernel, H, |k| {
            weighted(
                &depthwise_conv2d_forward(&x, k, &bias, stride, Padding::Same).unwrap().0,
                &w,
            )
        });
        assert!(max_rel_err(&grads.kernel, &fd_k) <= TOL);
    }
}

#[test]
fn pointwise_gradients_match_finite_differences() {
    let x = fill(&[2, 4, 4, 3], 41);
    let kernel = fill(&[1, 1, 3, 5], 43);
    let bias = fill(&[5], 47);
    let (y, ctx) = pointwise_conv2d_forward(&x, &kernel, &bias).unwrap();
    let w = loss_weights(y.shape(), 53);
    let grads = pointwise_conv2d_backward(&ctx, &w).unwrap();

    let fd_x = finite_diff_grad(&x, H, |x| {
        weighted(&pointwise_conv2d_forward(x, &kernel, &bias).unwrap().0, &w)
    });
    assert!(max_rel_err(&grads.x, &fd_x) <= TOL);
    let fd_k = finite_diff_grad(&kernel, H, |k| {
        weighted(&pointwise_conv2d_forward(&x, k, &bias).unwrap().0, &w)
    });
    assert!(max_rel_err(&grads.kernel, &fd_k) <= TOL);
    let fd_b = finite_diff_grad(&bias, H, |b| {
        weighted(&pointwise_conv2d_forward(&x, &kernel, b).unwrap().0, &w)
    });
    assert!(max_rel_err(&grads.bias, &fd_b) <= TOL);
}

#[test]
fn batchnorm_train_gradients_match_finite_differences() {
    let x = fill(&[4, 3, 3, 2], 59);
    let gamma = fill(&[2], 61).map(|v| v + 1.5);
    let beta = fill(&[2], 67);
    let run = |x: &Tensor, gamma: &Tensor, beta: &Tensor| {
        let mut rm = Tensor::zeros([2]).unwrap();
        let mut rv = Tensor::ones([2]).unwrap();
        batchnorm_forward(x, gamma, beta, &mut rm, &mut rv, Mode::Train, 0.9, 1e-5).unwrap()
    };
    let (y, ctx) = run(&x, &gamma, &beta);
    let w = loss_weights(y.shape(), 71);
    let grads = batchnorm_backward(&ctx, &w).unwrap();

    let fd_x = finite_diff_grad(&x, H, |x| weighted(&run(x, &gamma, &beta).0, &w));
    assert!(max_rel_err(&grads.x, &fd_x) <= TOL, "grad_x err {}", max_rel_err(&grads.x, &fd_x));
    let fd_g = finite_diff_grad(&gamma, H, |g| weighted(&run(&x, g, &beta).0, &w));
    assert!(max_rel_err(&grads.gamma, &fd_g) <= TOL);
    let fd_b = finite_diff_grad(&beta, H, |b| weighted(&run(&x, &gamma, b).0, &w));
    assert!(max_rel_err(&grads.beta, &fd_b) <= TOL);
}

#[test]
fn constant_channel_shift_has_zero_gradient_through_mean_cancellation() {
    // Batch normalization is invariant to adding a constant to a channel:
    // the batch mean absorbs it. So for a channel held constant over the
    // batch, the gradient along the uniform-shift direction cancels to zero.
    let mut x = fill(&[3, 2, 2, 2], 73);
    for i in (0..x.len()).step_by(2) {
        x.data_mut()[i] = 0.8; // channel 0 constant
    }
    let gamma = Tensor::ones([2]).unwrap();
    let beta = Tensor::zeros([2]).unwrap();
    let run = |x: &Tensor| {
        let mut rm = Tensor::zeros([2]).unwrap();
        let mut rv = Tensor::ones([2]).unwrap();
        batchnorm_forward(x, &gamma, &beta, &mut rm, &mut rv, Mode::Train, 0.9, 1e-5).unwrap()
    };
    let (y, ctx) = run(&x);
    let w = loss_weights(y.shape(), 79);
    let grads = batchnorm_backward(&ctx, &w).unwrap();
    let channel_sum: f64 = grads.x.data().iter().step_by(2).sum();
    assert!(channel_sum.abs() <= 1e-9, "analytic shift gradient {channel_sum}");

    // Numeric confirmation: centered difference along the shift direction.
    let shift = |t: f64| {
        let mut xs = x.clone();
        for i in (0..xs.len()).step_by(2) {
            xs.data_mut()[i] += t;
        }
        weighted(&run(&xs).0, &w)
    };
    let numeric = (shift(H) - shift(-H)) / (2.0 * H);
    assert!(numeric.abs() <= 1e-6, "numeric shift gradient {numeric}");
}

#[test]
fn batchnorm_infer_gradients_match_finite_differences() {
    let x = fill(&[2, 3, 3, 2], 83);
    let gamma = fill(&[2], 89).map(|v| v + 1.2);
    let beta = fill(&[2], 97);
    let rm0 = fill(&[2], 101).scale(0.1);
    let rv0 = fill(&[2], 103).map(|v| v.abs() + 0.5);
    let run = |x: &Tensor| {
        let mut rm = rm0.clone();
        let mut rv = rv0.clone();
        batchnorm_forward(x, &gamma, &beta, &mut rm, &mut rv, Mode::Infer, 0.9, 1e-5).unwrap()
    };
    let (y, ctx) = run(&x);
    let w = loss_weights(y.shape(), 107);
    let grads = batchnorm_backward(&ctx, &w).unwrap();
    let fd_x = finite_diff_grad(&x, H, |x| weighted(&run(x).0, &w));
    assert!(max_rel_err(&grads.x, &fd_x) <= TOL);
}

#[test]
fn relu_gradient_matches_finite_differences_off_the_kink() {
    // Push inputs away from 0 so the finite difference never crosses it.
    let x = fill(&[40], 109).map(|v| if v.abs() < 0.1 { v + 0.2 } else { v });
    let (y, ctx) = relu_forward(&x);
    let w = loss_weights(y.shape(), 113);
    let g = relu_backward(&ctx, &w).unwrap();
    let fd = finite_diff_grad(&x, H, |x| weighted(&relu_forward(x).0, &w));
    assert!(max_rel_err(&g, &fd) <= TOL);
}

#[test]
fn maxpool_gradient_matches_finite_differences() {
    let x = fill(&[1, 6, 6, 2], 127);
    for (k, stride, padding) in [(2, 2, Padding::Valid), (3, 1, Padding::Same)] {
        let (y, ctx) = maxpool2d_forward(&x, k, stride, padding).unwrap();
        let w = loss_weights(y.shape(), 131);
        let g = maxpool2d_backward(&ctx, &w).unwrap();
        let fd = finite_diff_grad(&x, H, |x| {
            weighted(&maxpool2d_forward(x, k, stride, padding).unwrap().0, &w)
        });
        assert!(max_rel_err(&g, &fd) <= TOL);
    }
}

#[test]
fn dense_gradients_match_finite_differences() {
    let x = fill(&[4, 6], 137);
    let weights = fill(&[6, 3], 139);
    let bias = fill(&[3], 149);
    let (y, ctx) = dense_forward(&x, &weights, &bias).unwrap();
    let w = loss_weights(y.shape(), 151);
    let grads = dense_backward(&ctx, &w).unwrap();

    let fd_x = finite_diff_grad(&x, H, |x| {
        weighted(&dense_forward(x, &weights, &bias).unwrap().0, &w)
    });
    assert!(max_rel_err(&grads.x, &fd_x) <= TOL);
    let fd_w = finite_diff_grad(&weights, H, |wt| {
        weighted(&dense_forward(&x, wt, &bias).unwrap().0, &w)
    });
    assert!(max_rel_err(&grads.weights, &fd_w) <= TOL);
    let fd_b = finite_diff_grad(&bias, H, |b| {
        weighted(&dense_forward(&x, &weights, b).unwrap().0, &w)
    });
    assert!(max_rel_err(&grads.bias, &fd_b) <= TOL);
}

#[test]
fn softmax_cross_entropy_gradient_matches_finite_differences() {
    let logits = fill(&[5, 7], 157).scale(2.0);
    let labels = vec![0usize, 3, 6, 2, 5];
    let out = softmax_cross_entropy(&logits, &labels).unwrap();
    let fd = finite_diff_grad(&logits, H, |l| {
        softmax_cross_entropy(l, &labels).unwrap().loss
    });
    // Tighter gate here: the loss path is smooth everywhere.
    assert!(max_rel_err(&out.grad_logits, &fd) <= 1e-5);
}
