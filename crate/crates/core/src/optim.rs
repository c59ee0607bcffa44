//! Parameter-update rules: NADAM and plain SGD.
//!
//! The NADAM step keeps decaying first/second moment averages with bias
//! correction and applies a Nesterov-style lookahead on the first moment:
//!
//! ```text
//! m_t = b1*m_{t-1} + (1-b1)*g_t
//! v_t = b2*v_{t-1} + (1-b2)*g_t^2
//! m^ = m_t / (1 - b1^t)        v^ = v_t / (1 - b2^t)
//! theta -= eta / sqrt(v^ + eps) * (b1*m^ + (1-b1)/(1-b1^t) * g_t)
//! ```
//!
//! Note the placement of `eps` inside the square root; the more common Adam
//! variant uses `sqrt(v^) + eps` instead. For default eps = 1e-6 the two
//! denominators differ by at most ~1e-3 near v^ = 0 and the difference decays
//! as v^ grows (`optimizer_tests` pins this down numerically).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{GradientStore, ParameterStore};
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error)]
pub enum OptimError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("gradient shape {grad:?} does not match parameter shape {param:?}")]
    ShapeMismatch { param: Vec<usize>, grad: Vec<usize> },
    #[error("non-finite gradient for parameter '{name}'")]
    NonFiniteGradient { name: String },
    #[error("gradients missing for parameter(s): {names:?}")]
    MissingGradients { names: Vec<String> },
    #[error("gradients supplied for unknown parameter(s): {names:?}")]
    UnknownGradients { names: Vec<String> },
}

/// NADAM hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NadamHyper {
    /// Step size (eta).
    pub eta: f64,
    /// First-moment decay (beta1).
    pub beta1: f64,
    /// Second-moment decay (beta2).
    pub beta2: f64,
    /// Smoothing constant (epsilon), default 1e-6.
    pub eps: f64,
}

impl Default for NadamHyper {
    fn default() -> Self {
        Self {
            eta: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-6,
        }
    }
}

/// Per-parameter NADAM state: moment estimates and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct NadamState {
    pub m: Tensor,
    pub v: Tensor,
    pub t: u64,
}

impl NadamState {
    pub fn new(shape: &[usize]) -> Self {
        Self {
            m: Tensor::zeros(shape.to_vec()).expect("parameter shapes are valid"),
            v: Tensor::zeros(shape.to_vec()).expect("parameter shapes are valid"),
            t: 0,
        }
    }
}

/// One NADAM update. Increments `state.t` by exactly one.
pub fn nadam_step(
    theta: &mut Tensor,
    grad: &Tensor,
    state: &mut NadamState,
    hp: &NadamHyper,
) -> Result<(), OptimError> {
    if grad.shape() != theta.shape() {
        return Err(OptimError::ShapeMismatch {
            param: theta.shape().to_vec(),
            grad: grad.shape().to_vec(),
        });
    }
    let t = state.t + 1;
    let bc1 = 1.0 - hp.beta1.powi(t as i32);
    let bc2 = 1.0 - hp.beta2.powi(t as i32);
    let md = state.m.data_mut();
    let vd = state.v.data_mut();
    let td = theta.data_mut();
    for ((m, v), (th, &g)) in md
        .iter_mut()
        .zip(vd.iter_mut())
        .zip(td.iter_mut().zip(grad.data()))
    {
        *m = hp.beta1 * *m + (1.0 - hp.beta1) * g;
        *v = hp.beta2 * *v + (1.0 - hp.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *th -= hp.eta / (v_hat + hp.eps).sqrt() * (hp.beta1 * m_hat + (1.0 - hp.beta1) / bc1 * g);
    }
    state.t = t;
    Ok(())
}

/// Plain gradient descent: `theta -= lr * grad`. Stateless.
pub fn sgd_step(theta: &mut Tensor, grad: &Tensor, lr: f64) -> Result<(), OptimError> {
    if grad.shape() != theta.shape() {
        return Err(OptimError::ShapeMismatch {
            param: theta.shape().to_vec(),
            grad: grad.shape().to_vec(),
        });
    }
    for (th, &g) in theta.data_mut().iter_mut().zip(grad.data()) {
        *th -= lr * g;
    }
    Ok(())
}

/// Optimizer selection plus hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Nadam(NadamHyper),
}

impl Optimizer {
    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Sgd { .. } => "sgd",
            Optimizer::Nadam(_) => "nadam",
        }
    }
}

/// Per-parameter optimizer state, keyed by parameter name. Empty for SGD.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerState {
    pub per_param: BTreeMap<String, NadamState>,
}

/// Applies one optimizer step to every trainable parameter in the store.
///
/// The gradient key set must equal the trainable-parameter key set; silent
/// skips are forbidden in both directions.
pub fn apply_updates(
    store: &mut ParameterStore,
    grads: &GradientStore,
    optimizer: &Optimizer,
    state: &mut OptimizerState,
) -> Result<(), OptimError> {
    let missing: Vec<String> = store
        .trainable_names()
        .filter(|name| !grads.contains(name))
        .map(|s| s.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(OptimError::MissingGradients { names: missing });
    }
    let unknown: Vec<String> = grads
        .names()
        .filter(|name| !store.is_trainable(name))
        .map(|s| s.to_string())
        .collect();
    if !unknown.is_empty() {
        return Err(OptimError::UnknownGradients { names: unknown });
    }
    let names: Vec<String> = store.trainable_names().map(|s| s.to_string()).collect();
    for name in names {
        let grad = grads.get(&name).expect("checked above");
        grad.check_finite(&name)
            .map_err(|_| OptimError::NonFiniteGradient { name: name.clone() })?;
        let theta = store.tensor_mut(&name).expect("name came from the store");
        match optimizer {
            Optimizer::Sgd { lr } => sgd_step(theta, grad, *lr)?,
            Optimizer::Nadam(hp) => {
                let st = state
                    .per_param
                    .entry(name.clone())
                    .or_insert_with(|| NadamState::new(grad.shape()));
                nadam_step(theta, grad, st, hp)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Standalone scalar transcription of the update rule, written against
    /// the update formulas one scalar at a time, independent of the vector
    /// implementation.
    #[derive(Clone, Copy)]
    pub struct ScalarNadamOracle {
        pub m: f64,
        pub v: f64,
        pub t: u64,
    }

    impl ScalarNadamOracle {
        pub fn new() -> Self {
            Self { m: 0.0, v: 0.0, t: 0 }
        }

        pub fn step(&mut self, theta: f64, g: f64, eta: f64, b1: f64, b2: f64, eps: f64) -> f64 {
            let t = (self.t + 1) as i32;
            self.m = b1 * self.m + g * (1.0 - b1);
            self.v = b2 * self.v + g * g * (1.0 - b2);
            let m_hat = self.m / (1.0 - b1.powi(t));
            let v_hat = self.v / (1.0 - b2.powi(t));
            let update = eta / (v_hat + eps).sqrt()
                * (m_hat * b1 + g * (1.0 - b1) / (1.0 - b1.powi(t)));
            self.t += 1;
            theta - update
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point_from_zero_state() {
        let mut theta = Tensor::new([3], vec![1.0, -2.0, 0.5]).unwrap();
        let before = theta.clone();
        let grad = Tensor::zeros([3]).unwrap();
        let mut state = NadamState::new(&[3]);
        nadam_step(&mut theta, &grad, &mut state, &NadamHyper::default()).unwrap();
        assert_eq!(theta, before);
        assert!(state.m.data().iter().all(|&v| v == 0.0));
        assert!(state.v.data().iter().all(|&v| v == 0.0));
        assert_eq!(state.t, 1);
    }

    #[test]
    fn default_eps_is_1e_minus_6() {
        assert_eq!(NadamHyper::default().eps, 1e-6);
    }

    #[test]
    fn scalar_step_matches_transcription_oracle() {
        let (eta, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-6);
        let mut theta = Tensor::new([1], vec![1.0]).unwrap();
        let grad = Tensor::new([1], vec![1.0]).unwrap();
        let mut state = NadamState::new(&[1]);
        nadam_step(
            &mut theta,
            &grad,
            &mut state,
            &NadamHyper { eta, beta1: b1, beta2: b2, eps },
        )
        .unwrap();
        let mut oracle = ScalarNadamOracle::new();
        let want = oracle.step(1.0, 1.0, eta, b1, b2, eps);
        assert!((theta.data()[0] - want).abs() <= 1e-12);
    }

    #[test]
    fn bias_correction_is_exact_at_t_1() {
        let hp = NadamHyper::default();
        let g = 0.37;
        let mut theta = Tensor::new([1], vec![0.0]).unwrap();
        let grad = Tensor::new([1], vec![g]).unwrap();
        let mut state = NadamState::new(&[1]);
        nadam_step(&mut theta, &grad, &mut state, &hp).unwrap();
        let m_hat = state.m.data()[0] / (1.0 - hp.beta1);
        let v_hat = state.v.data()[0] / (1.0 - hp.beta2);
        assert_eq!(m_hat, g);
        assert!((v_hat - g * g).abs() <= f64::EPSILON * g * g);
    }

    #[test]
    fn constant_positive_gradient_strictly_decreases_theta() {
        let mut theta = Tensor::new([1], vec![5.0]).unwrap();
        let grad = Tensor::new([1], vec![0.3]).unwrap();
        let mut state = NadamState::new(&[1]);
        let mut prev = 5.0;
        for _ in 0..50 {
            nadam_step(&mut theta, &grad, &mut state, &NadamHyper::default()).unwrap();
            assert!(theta.data()[0] < prev);
            prev = theta.data()[0];
        }
    }

    #[test]
    fn elementwise_rule_is_concat_invariant() {
        let hp = NadamHyper::default();
        let a0 = Tensor::new([2], vec![0.4, -0.7]).unwrap();
        let b0 = Tensor::new([3], vec![1.0, 2.0, -3.0]).unwrap();
        let ga = Tensor::new([2], vec![0.1, 0.2]).unwrap();
        let gb = Tensor::new([3], vec![-0.3, 0.4, 0.5]).unwrap();

        let mut joint = Tensor::concat(&[&a0, &b0], 0).unwrap();
        let gj = Tensor::concat(&[&ga, &gb], 0).unwrap();
        let mut js = NadamState::new(&[5]);

        let (mut a, mut b) = (a0.clone(), b0.clone());
        let mut sa = NadamState::new(&[2]);
        let mut sb = NadamState::new(&[3]);
        for _ in 0..10 {
            nadam_step(&mut joint, &gj, &mut js, &hp).unwrap();
            nadam_step(&mut a, &ga, &mut sa, &hp).unwrap();
            nadam_step(&mut b, &gb, &mut sb, &hp).unwrap();
        }
        let split_a = joint.slice(0, 0, 2).unwrap();
        let split_b = joint.slice(0, 2, 3).unwrap();
        for (x, y) in split_a.data().iter().zip(a.data()) {
            assert!((x - y).abs() <= 1e-15);
        }
        for (x, y) in split_b.data().iter().zip(b.data()) {
            assert!((x - y).abs() <= 1e-15);
        }
    }

    #[test]
    fn v_stays_nonnegative() {
        let mut theta = Tensor::new([2], vec![0.0, 1.0]).unwrap();
        let mut state = NadamState::new(&[2]);
        let mut seed = 11u64;
        for _ in 0..200 {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            let g0 = (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            let grad = Tensor::new([2], vec![g0, -g0 * 2.0]).unwrap();
            nadam_step(&mut theta, &grad, &mut state, &NadamHyper::default()).unwrap();
            assert!(state.v.data().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn nadam_converges_on_quadratic_bowl() {
        // f(theta) = 0.5 * ||theta||^2, gradient = theta, start on the unit sphere.
        let d = 4;
        let mut theta =
            Tensor::new([d], vec![0.5, -0.5, 0.5, -0.5]).unwrap();
        let mut state = NadamState::new(&[d]);
        let hp = NadamHyper::default();
        let mut steps = 0;
        for i in 0..2000 {
            let grad = theta.clone();
            nadam_step(&mut theta, &grad, &mut state, &hp).unwrap();
            let norm = theta.data().iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-3 {
                steps = i + 1;
                break;
            }
        }
        assert!(steps > 0 && steps <= 2000, "did not reach 1e-3 in 2000 steps");
    }

    #[test]
    fn sgd_identities_and_contraction() {
        let mut theta = Tensor::new([1], vec![2.0]).unwrap();
        let grad = Tensor::new([1], vec![1.0]).unwrap();
        sgd_step(&mut theta, &grad, 0.0).unwrap();
        assert_eq!(theta.data()[0], 2.0);
        sgd_step(&mut theta, &grad, 0.5).unwrap();
        assert_eq!(theta.data()[0], 1.5);

        // On f(theta) = theta^2 with lr 0.1: theta_{n+1} = 0.8 * theta_n.
        let mut th = Tensor::new([1], vec![1.0]).unwrap();
        for _ in 0..25 {
            let g = th.scale(2.0);
            sgd_step(&mut th, &g, 0.1).unwrap();
        }
        let want = 0.8f64.powi(25);
        assert!((th.data()[0] - want).abs() <= 1e-12);
    }

    #[test]
    fn shape_mismatch_errors() {
        let mut theta = Tensor::zeros([2]).unwrap();
        let grad = Tensor::zeros([3]).unwrap();
        let mut state = NadamState::new(&[2]);
        assert!(matches!(
            nadam_step(&mut theta, &grad, &mut state, &NadamHyper::default()),
            Err(OptimError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            sgd_step(&mut theta, &grad, 0.1),
            Err(OptimError::ShapeMismatch { .. })
        ));
    }
}
