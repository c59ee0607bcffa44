//! Finite-difference verification of the backward pass.
//!
//! The model-level check perturbs every trainable parameter element of a toy
//! model, recomputes the loss with central differences, and compares against
//! the analytic gradients. Dropout masks are replayed identically for every
//! evaluation by reseeding the RNG, so the loss is a deterministic function
//! of the parameters.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};

use super::{
    graph_backward, graph_forward, init_params, GraphError, ModelGraph, ParameterStore,
};
use crate::ops::Mode;
use crate::tensor::Tensor;
use crate::SeededRng;

/// Central-difference gradient of `f` at `x`, one element at a time.
pub fn finite_diff_grad(x: &Tensor, h: f64, mut f: impl FnMut(&Tensor) -> f64) -> Tensor {
    let mut grad = Tensor::zeros_like(x);
    for i in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += h;
        let mut xm = x.clone();
        xm.data_mut()[i] -= h;
        grad.data_mut()[i] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    grad
}

/// Relative error `|a - b| / max(|a| + |b|, 1e-5)`; the floor turns the
/// comparison absolute for near-zero gradients, where finite differences
/// bottom out at roundoff noise.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-5)
}

/// Worst relative error between two gradient tensors.
pub fn max_rel_err(analytic: &Tensor, numeric: &Tensor) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &b)| rel_err(a, b))
        .fold(0.0, f64::max)
}

/// Gradient-check settings.
#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub seed: u64,
    /// Worst acceptable relative error across the whole graph.
    pub tolerance: f64,
    /// Central-difference step.
    pub h: f64,
    /// Refuse models with more trainable elements than this.
    pub max_params: u64,
    /// Batch size of the probe input.
    pub batch: usize,
    /// Test fixture: corrupt the analytic gradients of the named node so the
    /// check must fail and name it.
    pub fault_node: Option<String>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            seed: 17,
            tolerance: 1e-3,
            h: 1e-5,
            max_params: 5000,
            batch: 3,
            fault_node: None,
        }
    }
}

/// Outcome of a model gradient check, grouped per layer kind.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub model: String,
    /// Worst relative error and the parameter that produced it, per kind.
    pub per_kind: BTreeMap<String, (f64, String)>,
    pub worst: f64,
    pub worst_param: String,
    pub checked_params: u64,
    pub tolerance: f64,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "gradcheck {}: {} ({} parameter elements, tolerance {:e})\n",
            self.model,
            if self.pass { "PASS" } else { "FAIL" },
            self.checked_params,
            self.tolerance
        );
        for (kind, (err, param)) in &self.per_kind {
            out.push_str(&format!("  {kind:<10} worst {err:.3e}  ({param})\n"));
        }
        out.push_str(&format!(
            "  worst overall {:.3e} ({})\n",
            self.worst, self.worst_param
        ));
        out
    }
}

/// Parameters for checking: the training init plus noise on biases, beta,
/// and gamma. The training init zeroes those exactly, which can park
/// activations precisely on ReLU kinks (e.g. a dead branch feeding a
/// zero-variance batch-norm channel); a generic point keeps every kink at a
/// safe distance so finite differences measure the same function the
/// backward pass differentiates.
fn gradcheck_init(graph: &ModelGraph, seed: u64) -> ParameterStore {
    let mut params = init_params(graph, seed);
    let mut rng = SeededRng::seed_from_u64(seed ^ 0xc2b2_ae3d_27d4_eb4f);
    let names: Vec<String> = params.trainable_names().map(|s| s.to_string()).collect();
    for name in names {
        if name.ends_with(".bias") || name.ends_with(".beta") || name.ends_with(".gamma") {
            let tensor = params.tensor_mut(&name).expect("listed name");
            for v in tensor.data_mut() {
                *v += 0.2 * (rng.gen::<f64>() - 0.5);
            }
        }
    }
    params
}

/// Runs the whole-graph finite-difference suite on a freshly initialized
/// model.
pub fn gradcheck_model(
    model_name: &str,
    graph: &ModelGraph,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, GraphError> {
    let params = gradcheck_init(graph, cfg.seed);
    let total: u64 = params
        .iter()
        .filter(|(_, p)| p.trainable)
        .map(|(_, p)| p.tensor.len() as u64)
        .sum();
    if total > cfg.max_params {
        return Err(GraphError::TooManyParams {
            params: total,
            max: cfg.max_params,
        });
    }

    let (h, w, c) = graph.input_hwc();
    let mut data_rng = SeededRng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let batch = Tensor::from_fn([cfg.batch.max(2), h, w, c], |_| data_rng.gen::<f64>() * 2.0 - 1.0)
        .expect("valid batch shape");
    let classes = graph.num_classes();
    let labels: Vec<usize> = (0..cfg.batch.max(2))
        .map(|_| data_rng.gen_range(0..classes))
        .collect();

    // Deterministic loss: identical dropout masks on every evaluation.
    let forward_seed = cfg.seed ^ 0x5851_f42d_4c95_7f2d;
    let loss_of = |store: &ParameterStore| -> Result<f64, GraphError> {
        let mut store = store.clone();
        let mut rng = SeededRng::seed_from_u64(forward_seed);
        let fwd = graph_forward(graph, &mut store, &batch, Mode::Train, &mut rng)?;
        let bwd = graph_backward(graph, &fwd, &labels)?;
        Ok(bwd.loss)
    };

    let analytic = {
        let mut store = params.clone();
        let mut rng = SeededRng::seed_from_u64(forward_seed);
        let fwd = graph_forward(graph, &mut store, &batch, Mode::Train, &mut rng)?;
        let bwd = graph_backward(graph, &fwd, &labels)?;
        bwd.grads
    };

    let kind_of_param = |param_name: &str| -> String {
        let node_name = param_name
            .rsplit_once('.')
            .map(|(n, _)| n)
            .unwrap_or(param_name);
        graph
            .find(node_name)
            .map(|n| n.kind.label().to_string())
            .unwrap_or_else(|| "unknown".into())
    };

    let mut per_kind: BTreeMap<String, (f64, String)> = BTreeMap::new();
    let mut worst = 0.0f64;
    let mut worst_param = String::new();
    let names: Vec<String> = params.trainable_names().map(|s| s.to_string()).collect();
    for name in &names {
        let base = params.tensor(name)?.clone();
        let mut analytic_grad = analytic
            .get(name)
            .ok_or_else(|| GraphError::MissingParameter(name.clone()))?
            .clone();
        if let Some(fault) = &cfg.fault_node {
            let node_name = name.rsplit_once('.').map(|(n, _)| n).unwrap_or(name);
            if node_name == fault {
                analytic_grad = analytic_grad.map(|g| g + 0.5);
            }
        }
        for i in 0..base.len() {
            let probe = |delta: f64| -> Result<f64, GraphError> {
                let mut store = params.clone();
                store.tensor_mut(name)?.data_mut()[i] = base.data()[i] + delta;
                loss_of(&store)
            };
            let numeric = (probe(cfg.h)? - probe(-cfg.h)?) / (2.0 * cfg.h);
            let err = rel_err(analytic_grad.data()[i], numeric);
            let kind = kind_of_param(name);
            let entry = per_kind.entry(kind).or_insert((0.0, name.clone()));
            if err > entry.0 {
                *entry = (err, name.clone());
            }
            if err > worst {
                worst = err;
                worst_param = name.clone();
            }
        }
    }

    Ok(GradCheckReport {
        model: model_name.to_string(),
        per_kind,
        worst,
        worst_param,
        checked_params: total,
        tolerance: cfg.tolerance,
        pass: worst <= cfg.tolerance,
    })
}
