//! Architecture graphs: layer nodes, shape inference, parameter storage,
//! DAG execution, builders for the bundled architectures, and model /
//! checkpoint serialization.

mod builders;
mod exec;
pub mod gradcheck;
mod serial;

pub use builders::{
    build_dense_probe, build_mbinception, build_mobilenet_style, build_resnet_style,
    build_vgg_style, mbinception_toy, mobilenet_toy, resnet_toy, vgg_toy, DenseProbeConfig,
    MbInceptionConfig, MobileNetStyleConfig, ResNetStyleConfig, VggStyleConfig,
};
pub use exec::{graph_backward, graph_backward_from, graph_forward, BackwardPass, ForwardPass};
pub use serial::{load_checkpoint, parse_model_desc, save_checkpoint, Checkpoint};

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::ops::{out_extent, OpsError, Padding};
use crate::tensor::{Tensor, TensorError};
use crate::SeededRng;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("node {id} '{name}': {source}")]
    Node {
        id: usize,
        name: String,
        source: OpsError,
    },
    #[error("node {id} '{name}': {reason}")]
    Shape {
        id: usize,
        name: String,
        reason: String,
    },
    #[error("batch shape {batch:?} does not match model input {expected:?}")]
    BatchShape {
        batch: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("missing parameter '{0}'")]
    MissingParameter(String),
    #[error("model description parse error at line {line}: {reason}")]
    Desc { line: usize, reason: String },
    #[error("checkpoint parse error at offset {offset}: {reason}")]
    Checkpoint { offset: usize, reason: String },
    #[error("gradient check exceeds budget: {params} parameters > {max}")]
    TooManyParams { params: u64, max: u64 },
}

/// What a layer node computes. Kind-specific configuration lives inline.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Input,
    Conv {
        kh: usize,
        kw: usize,
        out_channels: usize,
        stride: usize,
        padding: Padding,
    },
    DepthwiseConv {
        kh: usize,
        kw: usize,
        stride: usize,
        padding: Padding,
    },
    Pointwise {
        out_channels: usize,
    },
    BatchNorm {
        momentum: f64,
        eps: f64,
    },
    Relu,
    MaxPool {
        k: usize,
        stride: usize,
        padding: Padding,
    },
    Dropout {
        rate: f64,
    },
    Dense {
        out_features: usize,
    },
    Flatten,
    Concat,
    Add,
}

impl LayerKind {
    /// Stable kind label used in model descriptions and gradcheck reports.
    pub fn label(&self) -> &'static str {
        match self {
            LayerKind::Input => "input",
            LayerKind::Conv { .. } => "conv",
            LayerKind::DepthwiseConv { .. } => "depthwise",
            LayerKind::Pointwise { .. } => "pointwise",
            LayerKind::BatchNorm { .. } => "batchnorm",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool { .. } => "maxpool",
            LayerKind::Dropout { .. } => "dropout",
            LayerKind::Dense { .. } => "dense",
            LayerKind::Flatten => "flatten",
            LayerKind::Concat => "concat",
            LayerKind::Add => "add",
        }
    }
}

/// One node of a model graph. `inputs` hold ids of earlier nodes, so node
/// order is always a topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNode {
    pub id: usize,
    pub name: String,
    pub kind: LayerKind,
    pub inputs: Vec<usize>,
}

/// Inferred value shape at a node, with the batch dimension left symbolic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeShape {
    Spatial { h: usize, w: usize, c: usize },
    Flat { d: usize },
}

impl NodeShape {
    pub fn channels(&self) -> Option<usize> {
        match self {
            NodeShape::Spatial { c, .. } => Some(*c),
            NodeShape::Flat { .. } => None,
        }
    }
}

/// A built architecture: topologically ordered nodes, the image input node,
/// and the logits output node, with per-node inferred shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    nodes: Vec<LayerNode>,
    input_hwc: (usize, usize, usize),
    output: usize,
    shapes: Vec<NodeShape>,
}

impl ModelGraph {
    pub fn nodes(&self) -> &[LayerNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &LayerNode {
        &self.nodes[id]
    }

    pub fn find(&self, name: &str) -> Option<&LayerNode> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn input_hwc(&self) -> (usize, usize, usize) {
        self.input_hwc
    }

    pub fn output(&self) -> usize {
        self.output
    }

    pub fn shape(&self, id: usize) -> NodeShape {
        self.shapes[id]
    }

    pub fn num_classes(&self) -> usize {
        match self.shapes[self.output] {
            NodeShape::Flat { d } => d,
            NodeShape::Spatial { .. } => unreachable!("output node is always dense"),
        }
    }

    /// Names and shapes of the parameters every node owns, in node order.
    /// The bool marks trainability (running statistics are not trainable).
    pub fn parameter_specs(&self) -> Vec<(String, Vec<usize>, bool)> {
        let mut specs = Vec::new();
        for node in &self.nodes {
            let in_shape = node.inputs.first().map(|&i| self.shapes[i]);
            match &node.kind {
                LayerKind::Conv {
                    kh,
                    kw,
                    out_channels,
                    ..
                } => {
                    let c_in = in_shape.and_then(|s| s.channels()).expect("checked at build");
                    specs.push((
                        format!("{}.weight", node.name),
                        vec![*kh, *kw, c_in, *out_channels],
                        true,
                    ));
                    specs.push((format!("{}.bias", node.name), vec![*out_channels], true));
                }
                LayerKind::DepthwiseConv { kh, kw, .. } => {
                    let c = in_shape.and_then(|s| s.channels()).expect("checked at build");
                    specs.push((format!("{}.weight", node.name), vec![*kh, *kw, c, 1], true));
                    specs.push((format!("{}.bias", node.name), vec![c], true));
                }
                LayerKind::Pointwise { out_channels } => {
                    let c_in = in_shape.and_then(|s| s.channels()).expect("checked at build");
                    specs.push((
                        format!("{}.weight", node.name),
                        vec![1, 1, c_in, *out_channels],
                        true,
                    ));
                    specs.push((format!("{}.bias", node.name), vec![*out_channels], true));
                }
                LayerKind::BatchNorm { .. } => {
                    let c = match in_shape.expect("checked at build") {
                        NodeShape::Spatial { c, .. } => c,
                        NodeShape::Flat { d } => d,
                    };
                    specs.push((format!("{}.gamma", node.name), vec![c], true));
                    specs.push((format!("{}.beta", node.name), vec![c], true));
                    specs.push((format!("{}.running_mean", node.name), vec![c], false));
                    specs.push((format!("{}.running_var", node.name), vec![c], false));
                }
                LayerKind::Dense { out_features } => {
                    let d_in = match in_shape.expect("checked at build") {
                        NodeShape::Flat { d } => d,
                        NodeShape::Spatial { .. } => unreachable!("checked at build"),
                    };
                    specs.push((
                        format!("{}.weight", node.name),
                        vec![d_in, *out_features],
                        true,
                    ));
                    specs.push((format!("{}.bias", node.name), vec![*out_features], true));
                }
                _ => {}
            }
        }
        specs
    }
}

/// Total element count of all trainable tensors. Running statistics are
/// excluded.
pub fn count_parameters(graph: &ModelGraph) -> u64 {
    graph
        .parameter_specs()
        .iter()
        .filter(|(_, _, trainable)| *trainable)
        .map(|(_, shape, _)| shape.iter().product::<usize>() as u64)
        .sum()
}

/// Incremental graph construction with shape inference at build time.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<LayerNode>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, kind: LayerKind, inputs: &[usize]) -> usize {
        let id = self.nodes.len();
        self.nodes.push(LayerNode {
            id,
            name: name.into(),
            kind,
            inputs: inputs.to_vec(),
        });
        id
    }

    /// Finishes the graph, running shape inference end-to-end for the
    /// declared `(h, w, c)` input.
    pub fn build(self, input_hwc: (usize, usize, usize), output: usize) -> Result<ModelGraph, GraphError> {
        finish_graph(self.nodes, input_hwc, output)
    }
}

pub(crate) fn finish_graph(
    nodes: Vec<LayerNode>,
    input_hwc: (usize, usize, usize),
    output: usize,
) -> Result<ModelGraph, GraphError> {
    let (h, w, c) = input_hwc;
    if h == 0 || w == 0 || c == 0 {
        return Err(GraphError::InvalidConfig(format!(
            "input dimensions must be positive, got {h}x{w}x{c}"
        )));
    }
    if nodes.is_empty() {
        return Err(GraphError::InvalidConfig("graph has no nodes".into()));
    }
    if output >= nodes.len() {
        return Err(GraphError::InvalidConfig(format!(
            "output id {output} out of range for {} node(s)",
            nodes.len()
        )));
    }
    let mut shapes: Vec<NodeShape> = Vec::with_capacity(nodes.len());
    for (id, node) in nodes.iter().enumerate() {
        if node.id != id {
            return Err(GraphError::InvalidConfig(format!(
                "node ids must be contiguous; found {} at position {id}",
                node.id
            )));
        }
        for &input in &node.inputs {
            if input >= id {
                return Err(GraphError::Shape {
                    id,
                    name: node.name.clone(),
                    reason: format!("input {input} does not precede the node"),
                });
            }
        }
        let shape = infer_shape(node, &shapes, input_hwc)?;
        shapes.push(shape);
    }
    if !matches!(nodes[0].kind, LayerKind::Input) {
        return Err(GraphError::InvalidConfig(
            "node 0 must be the input node".into(),
        ));
    }
    if nodes.iter().filter(|n| matches!(n.kind, LayerKind::Input)).count() != 1 {
        return Err(GraphError::InvalidConfig(
            "exactly one input node is required".into(),
        ));
    }
    if !matches!(shapes[output], NodeShape::Flat { .. }) {
        return Err(GraphError::InvalidConfig(
            "output node must produce a flat feature vector".into(),
        ));
    }
    Ok(ModelGraph {
        nodes,
        input_hwc,
        output,
        shapes,
    })
}

fn arity_error(node: &LayerNode, expected: &str) -> GraphError {
    GraphError::Shape {
        id: node.id,
        name: node.name.clone(),
        reason: format!(
            "{} node expects {expected} input(s), got {}",
            node.kind.label(),
            node.inputs.len()
        ),
    }
}

fn infer_shape(
    node: &LayerNode,
    shapes: &[NodeShape],
    input_hwc: (usize, usize, usize),
) -> Result<NodeShape, GraphError> {
    let shape_err = |reason: String| GraphError::Shape {
        id: node.id,
        name: node.name.clone(),
        reason,
    };
    let single = |expected: &str| -> Result<NodeShape, GraphError> {
        if node.inputs.len() != 1 {
            Err(arity_error(node, expected))
        } else {
            Ok(shapes[node.inputs[0]])
        }
    };
    let spatial_input = || -> Result<(usize, usize, usize), GraphError> {
        match single("1")? {
            NodeShape::Spatial { h, w, c } => Ok((h, w, c)),
            NodeShape::Flat { .. } => Err(shape_err("expects a spatial (NHWC) input".into())),
        }
    };
    let extent = |input: usize, kernel: usize, stride: usize, padding: Padding| {
        out_extent(input, kernel, stride, padding, "spatial").map_err(|e| GraphError::Node {
            id: node.id,
            name: node.name.clone(),
            source: e,
        })
    };
    match &node.kind {
        LayerKind::Input => {
            if !node.inputs.is_empty() {
                return Err(arity_error(node, "0"));
            }
            let (h, w, c) = input_hwc;
            Ok(NodeShape::Spatial { h, w, c })
        }
        LayerKind::Conv {
            kh,
            kw,
            out_channels,
            stride,
            padding,
        } => {
            let (h, w, _) = spatial_input()?;
            let (oh, _) = extent(h, *kh, *stride, *padding)?;
            let (ow, _) = extent(w, *kw, *stride, *padding)?;
            Ok(NodeShape::Spatial {
                h: oh,
                w: ow,
                c: *out_channels,
            })
        }
        LayerKind::DepthwiseConv {
            kh,
            kw,
            stride,
            padding,
        } => {
            let (h, w, c) = spatial_input()?;
            let (oh, _) = extent(h, *kh, *stride, *padding)?;
            let (ow, _) = extent(w, *kw, *stride, *padding)?;
            Ok(NodeShape::Spatial { h: oh, w: ow, c })
        }
        LayerKind::Pointwise { out_channels } => {
            let (h, w, _) = spatial_input()?;
            Ok(NodeShape::Spatial {
                h,
                w,
                c: *out_channels,
            })
        }
        LayerKind::BatchNorm { momentum, eps } => {
            if !(0.0..=1.0).contains(momentum) {
                return Err(shape_err(format!("momentum {momentum} outside [0, 1]")));
            }
            if *eps <= 0.0 {
                return Err(shape_err(format!("eps {eps} must be positive")));
            }
            single("1")
        }
        LayerKind::Relu => single("1"),
        LayerKind::MaxPool { k, stride, padding } => {
            let (h, w, c) = spatial_input()?;
            if *padding == Padding::Valid && (*k > h || *k > w) {
                return Err(GraphError::Node {
                    id: node.id,
                    name: node.name.clone(),
                    source: OpsError::WindowTooLarge { k: *k, h, w },
                });
            }
            let (oh, _) = extent(h, *k, *stride, *padding)?;
            let (ow, _) = extent(w, *k, *stride, *padding)?;
            Ok(NodeShape::Spatial { h: oh, w: ow, c })
        }
        LayerKind::Dropout { rate } => {
            if !(0.0..1.0).contains(rate) {
                return Err(shape_err(format!("dropout rate {rate} outside [0, 1)")));
            }
            single("1")
        }
        LayerKind::Dense { out_features } => match single("1")? {
            NodeShape::Flat { .. } => Ok(NodeShape::Flat { d: *out_features }),
            NodeShape::Spatial { .. } => {
                Err(shape_err("dense expects a flat input (add a flatten node)".into()))
            }
        },
        LayerKind::Flatten => {
            let (h, w, c) = spatial_input()?;
            let d = h
                .checked_mul(w)
                .and_then(|p| p.checked_mul(c))
                .ok_or_else(|| shape_err("flattened feature count overflows".into()))?;
            Ok(NodeShape::Flat { d })
        }
        LayerKind::Concat => {
            if node.inputs.is_empty() {
                return Err(arity_error(node, ">= 1"));
            }
            let mut total_c = 0usize;
            let mut hw: Option<(usize, usize)> = None;
            for &i in &node.inputs {
                match shapes[i] {
                    NodeShape::Spatial { h, w, c } => {
                        if let Some((eh, ew)) = hw {
                            if (h, w) != (eh, ew) {
                                return Err(shape_err(format!(
                                    "concat inputs disagree on spatial dims: {eh}x{ew} vs {h}x{w}"
                                )));
                            }
                        } else {
                            hw = Some((h, w));
                        }
                        total_c += c;
                    }
                    NodeShape::Flat { .. } => {
                        return Err(shape_err("concat expects spatial inputs".into()))
                    }
                }
            }
            let (h, w) = hw.expect("at least one input");
            Ok(NodeShape::Spatial { h, w, c: total_c })
        }
        LayerKind::Add => {
            if node.inputs.len() < 2 {
                return Err(arity_error(node, ">= 2"));
            }
            let first = shapes[node.inputs[0]];
            for &i in &node.inputs[1..] {
                if shapes[i] != first {
                    return Err(shape_err(format!(
                        "add inputs disagree: {:?} vs {:?}",
                        first, shapes[i]
                    )));
                }
            }
            Ok(first)
        }
    }
}

/// Named parameter tensors with trainability flags. Iteration order is the
/// lexicographic name order, which keeps every store walk deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    entries: BTreeMap<String, Param>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub tensor: Tensor,
    pub trainable: bool,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor, trainable: bool) {
        self.entries.insert(name.into(), Param { tensor, trainable });
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor, GraphError> {
        self.entries
            .get(name)
            .map(|p| &p.tensor)
            .ok_or_else(|| GraphError::MissingParameter(name.to_string()))
    }

    pub fn tensor_mut(&mut self, name: &str) -> Result<&mut Tensor, GraphError> {
        self.entries
            .get_mut(name)
            .map(|p| &mut p.tensor)
            .ok_or_else(|| GraphError::MissingParameter(name.to_string()))
    }

    pub fn is_trainable(&self, name: &str) -> bool {
        self.entries.get(name).map(|p| p.trainable).unwrap_or(false)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn trainable_names(&self) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(|(_, p)| p.trainable)
            .map(|(k, _)| k.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One gradient tensor per trainable parameter. Accumulating twice for the
/// same name sums the contributions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientStore {
    map: BTreeMap<String, Tensor>,
}

impl GradientStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accumulate(&mut self, name: &str, grad: Tensor) -> Result<(), GraphError> {
        match self.map.get_mut(name) {
            Some(existing) => {
                existing.axpy(1.0, &grad)?;
            }
            None => {
                self.map.insert(name.to_string(), grad);
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.map.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.map.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Creates freshly initialized parameters for a graph: fan-in-scaled
/// zero-mean Gaussians for conv/dense weights (std = sqrt(2 / fan_in)),
/// zero biases, gamma 1 / beta 0, running stats (0, 1).
///
/// Parameters are sampled in node order, so a given (graph, seed) pair
/// always produces identical weights.
pub fn init_params(graph: &ModelGraph, seed: u64) -> ParameterStore {
    let mut rng: SeededRng = rand::SeedableRng::seed_from_u64(seed);
    let mut store = ParameterStore::new();
    for (name, shape, trainable) in graph.parameter_specs() {
        let tensor = if name.ends_with(".weight") {
            let fan_in = match shape[..] {
                // Depthwise filters see only their own channel's window.
                [kh, kw, _, 1] => kh * kw,
                [kh, kw, c_in, _] => kh * kw * c_in,
                [d_in, _] => d_in,
                _ => shape.iter().product(),
            };
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
            Tensor::from_fn(shape.clone(), |_| normal.sample(&mut rng))
                .expect("spec shapes are valid")
        } else if name.ends_with(".gamma") || name.ends_with(".running_var") {
            Tensor::ones(shape.clone()).expect("spec shapes are valid")
        } else {
            Tensor::zeros(shape.clone()).expect("spec shapes are valid")
        };
        store.insert(name, tensor, trainable);
    }
    // Consume one draw so distinct seeds are distinguishable even for
    // parameterless graphs.
    let _: u64 = rng.gen();
    store
}
