//! Topological-order execution of a model graph: forward with per-node
//! contexts, backward accumulating one gradient per trainable parameter.

use super::{GradientStore, GraphError, LayerKind, ModelGraph, ParameterStore};
use crate::ops::{self, Mode, OpsError};
use crate::tensor::Tensor;
use crate::SeededRng;

/// Per-node backward context.
#[derive(Debug)]
enum NodeCtx {
    None,
    Conv(ops::Conv2dCtx),
    Depthwise(ops::DepthwiseCtx),
    Pointwise(ops::PointwiseCtx),
    BatchNorm(ops::BatchNormCtx),
    Relu(ops::ReluCtx),
    MaxPool(ops::MaxPoolCtx),
    Dropout(ops::DropoutCtx),
    Dense(ops::DenseCtx),
    Flatten { input_shape: Vec<usize> },
    Concat { channels: Vec<usize> },
    Add,
}

/// Every node's output plus the contexts the backward pass needs. Valid for
/// exactly one matching backward call.
#[derive(Debug)]
pub struct ForwardPass {
    outputs: Vec<Tensor>,
    ctxs: Vec<NodeCtx>,
    output_id: usize,
}

impl ForwardPass {
    pub fn logits(&self) -> &Tensor {
        &self.outputs[self.output_id]
    }

    pub fn output(&self, id: usize) -> &Tensor {
        &self.outputs[id]
    }
}

fn node_err(node_id: usize, name: &str) -> impl FnOnce(OpsError) -> GraphError + '_ {
    move |source| GraphError::Node {
        id: node_id,
        name: name.to_string(),
        source,
    }
}

/// Evaluates the graph on a batch in topological order.
///
/// Train mode updates batch-norm running statistics in `params` and consumes
/// `rng` for dropout masks (in node order, which keeps runs reproducible).
/// Infer mode leaves `params` untouched.
pub fn graph_forward(
    graph: &ModelGraph,
    params: &mut ParameterStore,
    batch: &Tensor,
    mode: Mode,
    rng: &mut SeededRng,
) -> Result<ForwardPass, GraphError> {
    let (h, w, c) = graph.input_hwc();
    let expected = vec![batch.shape().first().copied().unwrap_or(0), h, w, c];
    if batch.rank() != 4 || batch.shape()[1..] != expected[1..] {
        return Err(GraphError::BatchShape {
            batch: batch.shape().to_vec(),
            expected,
        });
    }

    let mut outputs: Vec<Tensor> = Vec::with_capacity(graph.nodes().len());
    let mut ctxs: Vec<NodeCtx> = Vec::with_capacity(graph.nodes().len());
    for node in graph.nodes() {
        let wrap = node_err(node.id, &node.name);
        let (out, ctx) = match &node.kind {
            LayerKind::Input => (batch.clone(), NodeCtx::None),
            LayerKind::Conv { stride, padding, .. } => {
                let x = &outputs[node.inputs[0]];
                let weight = params.tensor(&format!("{}.weight", node.name))?;
                let bias = params.tensor(&format!("{}.bias", node.name))?;
                let (y, ctx) =
                    ops::conv2d_forward(x, weight, bias, *stride, *padding).map_err(wrap)?;
                (y, NodeCtx::Conv(ctx))
            }
            LayerKind::DepthwiseConv { stride, padding, .. } => {
                let x = &outputs[node.inputs[0]];
                let weight = params.tensor(&format!("{}.weight", node.name))?;
                let bias = params.tensor(&format!("{}.bias", node.name))?;
                let (y, ctx) = ops::depthwise_conv2d_forward(x, weight, bias, *stride, *padding)
                    .map_err(wrap)?;
                (y, NodeCtx::Depthwise(ctx))
            }
            LayerKind::Pointwise { .. } => {
                let x = &outputs[node.inputs[0]];
                let weight = params.tensor(&format!("{}.weight", node.name))?;
                let bias = params.tensor(&format!("{}.bias", node.name))?;
                let (y, ctx) = ops::pointwise_conv2d_forward(x, weight, bias).map_err(wrap)?;
                (y, NodeCtx::Pointwise(ctx))
            }
            LayerKind::BatchNorm { momentum, eps } => {
                let x = &outputs[node.inputs[0]];
                let gamma = params.tensor(&format!("{}.gamma", node.name))?.clone();
                let beta = params.tensor(&format!("{}.beta", node.name))?.clone();
                let rm_name = format!("{}.running_mean", node.name);
                let rv_name = format!("{}.running_var", node.name);
                let mut rm = params.tensor(&rm_name)?.clone();
                let mut rv = params.tensor(&rv_name)?.clone();
                let (y, ctx) = ops::batchnorm_forward(
                    x, &gamma, &beta, &mut rm, &mut rv, mode, *momentum, *eps,
                )
                .map_err(wrap)?;
                if mode == Mode::Train {
                    *params.tensor_mut(&rm_name)? = rm;
                    *params.tensor_mut(&rv_name)? = rv;
                }
                (y, NodeCtx::BatchNorm(ctx))
            }
            LayerKind::Relu => {
                let (y, ctx) = ops::relu_forward(&outputs[node.inputs[0]]);
                (y, NodeCtx::Relu(ctx))
            }
            LayerKind::MaxPool { k, stride, padding } => {
                let (y, ctx) =
                    ops::maxpool2d_forward(&outputs[node.inputs[0]], *k, *stride, *padding)
                        .map_err(wrap)?;
                (y, NodeCtx::MaxPool(ctx))
            }
            LayerKind::Dropout { rate } => {
                let (y, ctx) = ops::dropout_forward(&outputs[node.inputs[0]], *rate, mode, rng)
                    .map_err(wrap)?;
                (y, NodeCtx::Dropout(ctx))
            }
            LayerKind::Dense { .. } => {
                let x = &outputs[node.inputs[0]];
                let weight = params.tensor(&format!("{}.weight", node.name))?;
                let bias = params.tensor(&format!("{}.bias", node.name))?;
                let (y, ctx) = ops::dense_forward(x, weight, bias).map_err(wrap)?;
                (y, NodeCtx::Dense(ctx))
            }
            LayerKind::Flatten => {
                let x = &outputs[node.inputs[0]];
                let n = x.shape()[0];
                let d: usize = x.shape()[1..].iter().product();
                let y = x.reshape([n, d])?;
                (
                    y,
                    NodeCtx::Flatten {
                        input_shape: x.shape().to_vec(),
                    },
                )
            }
            LayerKind::Concat => {
                let parts: Vec<&Tensor> = node.inputs.iter().map(|&i| &outputs[i]).collect();
                let channels = parts
                    .iter()
                    .map(|t| *t.shape().last().expect("rank >= 1"))
                    .collect();
                let y = Tensor::concat(&parts, 3)?;
                (y, NodeCtx::Concat { channels })
            }
            LayerKind::Add => {
                let mut acc = outputs[node.inputs[0]].clone();
                for &i in &node.inputs[1..] {
                    acc = acc.add(&outputs[i])?;
                }
                (acc, NodeCtx::Add)
            }
        };
        outputs.push(out);
        ctxs.push(ctx);
    }
    Ok(ForwardPass {
        outputs,
        ctxs,
        output_id: graph.output(),
    })
}

/// Result of a backward pass: the loss, softmax probabilities, and one
/// gradient per trainable parameter.
#[derive(Debug)]
pub struct BackwardPass {
    pub loss: f64,
    pub probs: Tensor,
    pub grads: GradientStore,
}

/// Applies softmax cross-entropy to the logits and backpropagates.
pub fn graph_backward(
    graph: &ModelGraph,
    fwd: &ForwardPass,
    labels: &[usize],
) -> Result<BackwardPass, GraphError> {
    let out_id = graph.output();
    let xent = ops::softmax_cross_entropy(fwd.logits(), labels)
        .map_err(node_err(out_id, &graph.node(out_id).name))?;
    let grads = graph_backward_from(graph, fwd, &xent.grad_logits)?;
    Ok(BackwardPass {
        loss: xent.loss,
        probs: xent.probs,
        grads,
    })
}

/// Backpropagates an arbitrary gradient seeded at the output node. Nodes
/// feeding multiple consumers receive the sum of their consumers'
/// contributions.
pub fn graph_backward_from(
    graph: &ModelGraph,
    fwd: &ForwardPass,
    grad_logits: &Tensor,
) -> Result<GradientStore, GraphError> {
    let n_nodes = graph.nodes().len();
    let mut node_grads: Vec<Option<Tensor>> = (0..n_nodes).map(|_| None).collect();
    node_grads[graph.output()] = Some(grad_logits.clone());
    let mut grads = GradientStore::new();

    let add_into = |slot: &mut Option<Tensor>, grad: Tensor| -> Result<(), GraphError> {
        match slot {
            Some(existing) => existing.axpy(1.0, &grad)?,
            None => *slot = Some(grad),
        }
        Ok(())
    };

    for id in (0..n_nodes).rev() {
        let Some(grad_out) = node_grads[id].take() else {
            continue;
        };
        let node = graph.node(id);
        let wrap = node_err(id, &node.name);
        match (&node.kind, &fwd.ctxs[id]) {
            (LayerKind::Input, _) => {}
            (LayerKind::Conv { .. }, NodeCtx::Conv(ctx)) => {
                let g = ops::conv2d_backward(ctx, &grad_out).map_err(wrap)?;
                grads.accumulate(&format!("{}.weight", node.name), g.kernel)?;
                grads.accumulate(&format!("{}.bias", node.name), g.bias)?;
                add_into(&mut node_grads[node.inputs[0]], g.x)?;
            }
            (LayerKind::DepthwiseConv { .. }, NodeCtx::Depthwise(ctx)) => {
                let g = ops::depthwise_conv2d_backward(ctx, &grad_out).map_err(wrap)?;
                grads.accumulate(&format!("{}.weight", node.name), g.kernel)?;
                grads.accumulate(&format!("{}.bias", node.name), g.bias)?;
                add_into(&mut node_grads[node.inputs[0]], g.x)?;
            }
            (LayerKind::Pointwise { .. }, NodeCtx::Pointwise(ctx)) => {
                let g = ops::pointwise_conv2d_backward(ctx, &grad_out).map_err(wrap)?;
                grads.accumulate(&format!("{}.weight", node.name), g.kernel)?;
                grads.accumulate(&format!("{}.bias", node.name), g.bias)?;
                add_into(&mut node_grads[node.inputs[0]], g.x)?;
            }
            (LayerKind::BatchNorm { .. }, NodeCtx::BatchNorm(ctx)) => {
                let g = ops::batchnorm_backward(ctx, &grad_out).map_err(wrap)?;
                grads.accumulate(&format!("{}.gamma", node.name), g.gamma)?;
                grads.accumulate(&format!("{}.beta", node.name), g.beta)?;
                add_into(&mut node_grads[node.inputs[0]], g.x)?;
            }
            (LayerKind::Relu, NodeCtx::Relu(ctx)) => {
                let g = ops::relu_backward(ctx, &grad_out).map_err(wrap)?;
                add_into(&mut node_grads[node.inputs[0]], g)?;
            }
            (LayerKind::MaxPool { .. }, NodeCtx::MaxPool(ctx)) => {
                let g = ops::maxpool2d_backward(ctx, &grad_out).map_err(wrap)?;
                add_into(&mut node_grads[node.inputs[0]], g)?;
            }
            (LayerKind::Dropout { .. }, NodeCtx::Dropout(ctx)) => {
                let g = ops::dropout_backward(ctx, &grad_out).map_err(wrap)?;
                add_into(&mut node_grads[node.inputs[0]], g)?;
            }
            (LayerKind::Dense { .. }, NodeCtx::Dense(ctx)) => {
                let g = ops::dense_backward(ctx, &grad_out).map_err(wrap)?;
                grads.accumulate(&format!("{}.weight", node.name), g.weights)?;
                grads.accumulate(&format!("{}.bias", node.name), g.bias)?;
                add_into(&mut node_grads[node.inputs[0]], g.x)?;
            }
            (LayerKind::Flatten, NodeCtx::Flatten { input_shape }) => {
                let g = grad_out.reshape(input_shape.clone())?;
                add_into(&mut node_grads[node.inputs[0]], g)?;
            }
            (LayerKind::Concat, NodeCtx::Concat { channels }) => {
                let mut offset = 0usize;
                for (&input, &c) in node.inputs.iter().zip(channels) {
                    let g = grad_out.slice(3, offset, c)?;
                    add_into(&mut node_grads[input], g)?;
                    offset += c;
                }
            }
            (LayerKind::Add, NodeCtx::Add) => {
                for &input in &node.inputs {
                    add_into(&mut node_grads[input], grad_out.clone())?;
                }
            }
            (kind, _) => {
                return Err(GraphError::Shape {
                    id,
                    name: node.name.clone(),
                    reason: format!("context does not match node kind {}", kind.label()),
                })
            }
        }
    }
    Ok(grads)
}
