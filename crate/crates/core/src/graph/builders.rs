//! Builders for the bundled architectures.
//!
//! All four image models are desk-scale minis sized for 32x32x3 inputs, not
//! reproductions of the published full-size networks.

use super::{GraphBuilder, GraphError, LayerKind, ModelGraph};
use crate::ops::Padding;

fn validate_common(
    who: &str,
    input: (usize, usize, usize),
    num_classes: usize,
) -> Result<(), GraphError> {
    let (h, w, c) = input;
    if h == 0 || w == 0 || c == 0 {
        return Err(GraphError::InvalidConfig(format!(
            "{who}: input dimensions must be positive, got {h}x{w}x{c}"
        )));
    }
    if num_classes < 2 {
        return Err(GraphError::InvalidConfig(format!(
            "{who}: need at least 2 classes, got {num_classes}"
        )));
    }
    Ok(())
}

fn validate_rate(who: &str, what: &str, rate: f64) -> Result<(), GraphError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(GraphError::InvalidConfig(format!(
            "{who}: {what} {rate} outside [0, 1)"
        )));
    }
    Ok(())
}

/// Configuration for the multi-block inception model.
#[derive(Debug, Clone, PartialEq)]
pub struct MbInceptionConfig {
    pub input: (usize, usize, usize),
    /// Base filter count n; must be >= 4 and divisible by 4 so the four
    /// inception branches split the budget evenly.
    pub base_filters: usize,
    /// One main block per entry; stage s uses `base_filters * multiplier`.
    pub stage_multipliers: Vec<usize>,
    pub num_classes: usize,
    /// Dropout rate between the two inception modules of a first block.
    pub dropout_block: f64,
    /// Dropout rate before the final dense layer.
    pub dropout_head: f64,
}

impl Default for MbInceptionConfig {
    fn default() -> Self {
        Self {
            input: (32, 32, 3),
            base_filters: 8,
            stage_multipliers: vec![1, 2, 4, 8],
            num_classes: 10,
            dropout_block: 0.25,
            dropout_head: 0.5,
        }
    }
}

struct Ctx<'a> {
    b: &'a mut GraphBuilder,
}

impl<'a> Ctx<'a> {
    fn conv(
        &mut self,
        name: String,
        input: usize,
        k: usize,
        out_channels: usize,
        stride: usize,
        padding: Padding,
    ) -> usize {
        self.b.add(
            name,
            LayerKind::Conv {
                kh: k,
                kw: k,
                out_channels,
                stride,
                padding,
            },
            &[input],
        )
    }

    fn bn(&mut self, name: String, input: usize) -> usize {
        self.b.add(
            name,
            LayerKind::BatchNorm {
                momentum: 0.9,
                eps: 1e-5,
            },
            &[input],
        )
    }

    fn relu(&mut self, name: String, input: usize) -> usize {
        self.b.add(name, LayerKind::Relu, &[input])
    }

    fn conv_bn_relu(
        &mut self,
        prefix: &str,
        input: usize,
        k: usize,
        out_channels: usize,
        stride: usize,
        padding: Padding,
    ) -> usize {
        let c = self.conv(format!("{prefix}.conv"), input, k, out_channels, stride, padding);
        let n = self.bn(format!("{prefix}.bn"), c);
        self.relu(format!("{prefix}.relu"), n)
    }
}

/// Four-branch inception module with filter budget `f`: a 1x1 branch, 3x3
/// and 5x5 branches behind 1x1 reducers, and a pooled 1x1 projection branch.
/// Every branch contributes f/4 channels and preserves H and W.
fn inception_module(ctx: &mut Ctx, prefix: &str, input: usize, f: usize) -> usize {
    let quarter = f / 4;
    let reduce = (f / 8).max(1);
    let b1 = ctx.conv(format!("{prefix}.b1"), input, 1, quarter, 1, Padding::Same);
    let b2r = ctx.conv(format!("{prefix}.b2reduce"), input, 1, reduce, 1, Padding::Same);
    let b2a = ctx.relu(format!("{prefix}.b2reduce_relu"), b2r);
    let b2 = ctx.conv(format!("{prefix}.b2"), b2a, 3, quarter, 1, Padding::Same);
    let b3r = ctx.conv(format!("{prefix}.b3reduce"), input, 1, reduce, 1, Padding::Same);
    let b3a = ctx.relu(format!("{prefix}.b3reduce_relu"), b3r);
    let b3 = ctx.conv(format!("{prefix}.b3"), b3a, 5, quarter, 1, Padding::Same);
    let b4p = ctx.b.add(
        format!("{prefix}.b4pool"),
        LayerKind::MaxPool {
            k: 3,
            stride: 1,
            padding: Padding::Same,
        },
        &[input],
    );
    let b4 = ctx.conv(format!("{prefix}.b4proj"), b4p, 1, quarter, 1, Padding::Same);
    ctx.b
        .add(format!("{prefix}.cat"), LayerKind::Concat, &[b1, b2, b3, b4])
}

/// First block: 1x1 entry conv, two inception modules with batch norm /
/// activation / dropout between them, then channel concatenation with the
/// block input and a final activation.
fn first_block(ctx: &mut Ctx, prefix: &str, input: usize, f: usize, dropout: f64) -> usize {
    let entry = ctx.conv(format!("{prefix}.entry"), input, 1, f, 1, Padding::Same);
    let i1 = inception_module(ctx, &format!("{prefix}.incept1"), entry, f);
    let bn1 = ctx.bn(format!("{prefix}.bn1"), i1);
    let r1 = ctx.relu(format!("{prefix}.relu1"), bn1);
    let drop = ctx.b.add(
        format!("{prefix}.drop"),
        LayerKind::Dropout { rate: dropout },
        &[r1],
    );
    let i2 = inception_module(ctx, &format!("{prefix}.incept2"), drop, f);
    let bn2 = ctx.bn(format!("{prefix}.bn2"), i2);
    let cat = ctx.b.add(
        format!("{prefix}.skipcat"),
        LayerKind::Concat,
        &[bn2, input],
    );
    ctx.relu(format!("{prefix}.out_relu"), cat)
}

/// Builds the multi-block inception graph: a 7x7 stride-2 stem with batch
/// norm, ReLU, and a 3x3 stride-2 max pool, then one main block per stage
/// multiplier. A main block runs a first block and a 3x3 projection conv
/// twice; the second projection downsamples by 2 except in the last stage.
/// The head flattens, applies dropout, and ends in a dense layer.
pub fn build_mbinception(cfg: &MbInceptionConfig) -> Result<ModelGraph, GraphError> {
    validate_common("mbinception", cfg.input, cfg.num_classes)?;
    if cfg.base_filters < 4 || !cfg.base_filters.is_multiple_of(4) {
        return Err(GraphError::InvalidConfig(format!(
            "mbinception: base filter count must be >= 4 and divisible by 4, got {}",
            cfg.base_filters
        )));
    }
    if cfg.stage_multipliers.is_empty() {
        return Err(GraphError::InvalidConfig(
            "mbinception: at least one stage multiplier is required".into(),
        ));
    }
    if let Some(m) = cfg.stage_multipliers.iter().find(|&&m| m == 0) {
        return Err(GraphError::InvalidConfig(format!(
            "mbinception: stage multiplier {m} must be >= 1"
        )));
    }
    validate_rate("mbinception", "block dropout", cfg.dropout_block)?;
    validate_rate("mbinception", "head dropout", cfg.dropout_head)?;

    let mut b = GraphBuilder::new();
    let input = b.add("input", LayerKind::Input, &[]);
    let mut ctx = Ctx { b: &mut b };

    let stem_conv = ctx.conv(
        "stem.conv".into(),
        input,
        7,
        cfg.base_filters,
        2,
        Padding::Same,
    );
    let stem_bn = ctx.bn("stem.bn".into(), stem_conv);
    let stem_relu = ctx.relu("stem.relu".into(), stem_bn);
    let mut cur = ctx.b.add(
        "stem.pool",
        LayerKind::MaxPool {
            k: 3,
            stride: 2,
            padding: Padding::Valid,
        },
        &[stem_relu],
    );

    let last_stage = cfg.stage_multipliers.len() - 1;
    for (s, &mult) in cfg.stage_multipliers.iter().enumerate() {
        let f = cfg.base_filters * mult;
        let stage = format!("stage{}", s + 1);
        let fb1 = first_block(&mut ctx, &format!("{stage}.pass1"), cur, f, cfg.dropout_block);
        cur = ctx.conv_bn_relu(&format!("{stage}.proj1"), fb1, 3, f, 1, Padding::Same);
        let fb2 = first_block(&mut ctx, &format!("{stage}.pass2"), cur, f, cfg.dropout_block);
        let stride = if s == last_stage { 1 } else { 2 };
        cur = ctx.conv_bn_relu(&format!("{stage}.proj2"), fb2, 3, f, stride, Padding::Same);
    }

    let flat = b.add("head.flatten", LayerKind::Flatten, &[cur]);
    let drop = b.add(
        "head.dropout",
        LayerKind::Dropout {
            rate: cfg.dropout_head,
        },
        &[flat],
    );
    let dense = b.add(
        "head.dense",
        LayerKind::Dense {
            out_features: cfg.num_classes,
        },
        &[drop],
    );
    // Shape inference reports collapses with the stage-qualified node name.
    b.build(cfg.input, dense)
}

/// Configuration for the VGG-style mini: stacked 3x3 conv blocks with max
/// pooling between stages, ending in dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct VggStyleConfig {
    pub input: (usize, usize, usize),
    pub width: usize,
    /// Number of conv stages (two 3x3 convs + one 2x2 max pool each), 1..=4.
    pub depth: usize,
    pub hidden: usize,
    pub num_classes: usize,
}

impl Default for VggStyleConfig {
    fn default() -> Self {
        Self {
            input: (32, 32, 3),
            width: 8,
            depth: 3,
            hidden: 64,
            num_classes: 10,
        }
    }
}

pub fn build_vgg_style(cfg: &VggStyleConfig) -> Result<ModelGraph, GraphError> {
    validate_common("vgg-style", cfg.input, cfg.num_classes)?;
    if cfg.width == 0 || cfg.hidden == 0 {
        return Err(GraphError::InvalidConfig(
            "vgg-style: width and hidden size must be >= 1".into(),
        ));
    }
    if !(1..=4).contains(&cfg.depth) {
        return Err(GraphError::InvalidConfig(format!(
            "vgg-style: depth {} outside 1..=4",
            cfg.depth
        )));
    }
    let mut b = GraphBuilder::new();
    let input = b.add("input", LayerKind::Input, &[]);
    let mut ctx = Ctx { b: &mut b };
    let mut cur = input;
    for s in 0..cfg.depth {
        let c = cfg.width * (1 << s.min(3));
        let stage = format!("stage{}", s + 1);
        for block in 1..=2 {
            let conv = ctx.conv(
                format!("{stage}.conv{block}"),
                cur,
                3,
                c,
                1,
                Padding::Same,
            );
            cur = ctx.relu(format!("{stage}.relu{block}"), conv);
        }
        cur = ctx.b.add(
            format!("{stage}.pool"),
            LayerKind::MaxPool {
                k: 2,
                stride: 2,
                padding: Padding::Valid,
            },
            &[cur],
        );
    }
    let flat = b.add("head.flatten", LayerKind::Flatten, &[cur]);
    let fc1 = b.add(
        "head.fc1",
        LayerKind::Dense {
            out_features: cfg.hidden,
        },
        &[flat],
    );
    let fc1_relu = b.add("head.fc1_relu", LayerKind::Relu, &[fc1]);
    let fc2 = b.add(
        "head.fc2",
        LayerKind::Dense {
            out_features: cfg.num_classes,
        },
        &[fc1_relu],
    );
    b.build(cfg.input, fc2)
}

/// Configuration for the ResNet-style mini: residual blocks whose skip is an
/// elementwise add, with a 1x1 projection when shape changes.
#[derive(Debug, Clone, PartialEq)]
pub struct ResNetStyleConfig {
    pub input: (usize, usize, usize),
    pub width: usize,
    /// Number of stages (channel doublings), 1..=4.
    pub stages: usize,
    /// Residual blocks per stage, 1..=3.
    pub blocks_per_stage: usize,
    pub num_classes: usize,
}

impl Default for ResNetStyleConfig {
    fn default() -> Self {
        Self {
            input: (32, 32, 3),
            width: 16,
            stages: 4,
            blocks_per_stage: 2,
            num_classes: 10,
        }
    }
}

pub fn build_resnet_style(cfg: &ResNetStyleConfig) -> Result<ModelGraph, GraphError> {
    validate_common("resnet-style", cfg.input, cfg.num_classes)?;
    if cfg.width == 0 {
        return Err(GraphError::InvalidConfig(
            "resnet-style: width must be >= 1".into(),
        ));
    }
    if !(1..=4).contains(&cfg.stages) {
        return Err(GraphError::InvalidConfig(format!(
            "resnet-style: stages {} outside 1..=4",
            cfg.stages
        )));
    }
    if !(1..=3).contains(&cfg.blocks_per_stage) {
        return Err(GraphError::InvalidConfig(format!(
            "resnet-style: blocks_per_stage {} outside 1..=3",
            cfg.blocks_per_stage
        )));
    }
    let mut b = GraphBuilder::new();
    let input = b.add("input", LayerKind::Input, &[]);
    let mut ctx = Ctx { b: &mut b };
    let mut cur = ctx.conv_bn_relu("stem", input, 3, cfg.width, 1, Padding::Same);
    let mut in_c = cfg.width;
    for s in 0..cfg.stages {
        let c = cfg.width * (1 << s.min(3));
        let stage = format!("stage{}", s + 1);
        for block in 1..=cfg.blocks_per_stage {
            let stride = if s > 0 && block == 1 { 2 } else { 1 };
            let prefix = format!("{stage}.block{block}");
            let c1 = ctx.conv(format!("{prefix}.conv1"), cur, 3, c, stride, Padding::Same);
            let bn1 = ctx.bn(format!("{prefix}.bn1"), c1);
            let r1 = ctx.relu(format!("{prefix}.relu1"), bn1);
            let c2 = ctx.conv(format!("{prefix}.conv2"), r1, 3, c, 1, Padding::Same);
            let bn2 = ctx.bn(format!("{prefix}.bn2"), c2);
            let skip = if stride != 1 || in_c != c {
                let proj = ctx.conv(format!("{prefix}.proj"), cur, 1, c, stride, Padding::Same);
                ctx.bn(format!("{prefix}.proj_bn"), proj)
            } else {
                cur
            };
            let add = ctx.b.add(format!("{prefix}.add"), LayerKind::Add, &[bn2, skip]);
            cur = ctx.relu(format!("{prefix}.out_relu"), add);
            in_c = c;
        }
    }
    let flat = b.add("head.flatten", LayerKind::Flatten, &[cur]);
    let dense = b.add(
        "head.dense",
        LayerKind::Dense {
            out_features: cfg.num_classes,
        },
        &[flat],
    );
    b.build(cfg.input, dense)
}

/// Configuration for the MobileNet-style mini: a stem conv followed by
/// repeated depthwise + pointwise pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct MobileNetStyleConfig {
    pub input: (usize, usize, usize),
    pub width: usize,
    /// Number of depthwise/pointwise pairs, 1..=6. Odd-indexed pairs
    /// downsample by 2 and double the channel count (capped at 8x width).
    pub pairs: usize,
    pub num_classes: usize,
}

impl Default for MobileNetStyleConfig {
    fn default() -> Self {
        Self {
            input: (32, 32, 3),
            width: 8,
            pairs: 4,
            num_classes: 10,
        }
    }
}

pub fn build_mobilenet_style(cfg: &MobileNetStyleConfig) -> Result<ModelGraph, GraphError> {
    validate_common("mobilenet-style", cfg.input, cfg.num_classes)?;
    if cfg.width == 0 {
        return Err(GraphError::InvalidConfig(
            "mobilenet-style: width must be >= 1".into(),
        ));
    }
    if !(1..=6).contains(&cfg.pairs) {
        return Err(GraphError::InvalidConfig(format!(
            "mobilenet-style: pairs {} outside 1..=6",
            cfg.pairs
        )));
    }
    let mut b = GraphBuilder::new();
    let input = b.add("input", LayerKind::Input, &[]);
    let mut ctx = Ctx { b: &mut b };
    let mut cur = ctx.conv_bn_relu("stem", input, 3, cfg.width, 2, Padding::Same);
    let mut c = cfg.width;
    for i in 0..cfg.pairs {
        let stride = if i % 2 == 1 { 2 } else { 1 };
        let c_out = if stride == 2 {
            (c * 2).min(cfg.width * 8)
        } else {
            c
        };
        let prefix = format!("pair{}", i + 1);
        let dw = ctx.b.add(
            format!("{prefix}.dw"),
            LayerKind::DepthwiseConv {
                kh: 3,
                kw: 3,
                stride,
                padding: Padding::Same,
            },
            &[cur],
        );
        let dw_bn = ctx.bn(format!("{prefix}.dw_bn"), dw);
        let dw_relu = ctx.relu(format!("{prefix}.dw_relu"), dw_bn);
        let pw = ctx.b.add(
            format!("{prefix}.pw"),
            LayerKind::Pointwise { out_channels: c_out },
            &[dw_relu],
        );
        let pw_bn = ctx.bn(format!("{prefix}.pw_bn"), pw);
        cur = ctx.relu(format!("{prefix}.pw_relu"), pw_bn);
        c = c_out;
    }
    let flat = b.add("head.flatten", LayerKind::Flatten, &[cur]);
    let dense = b.add(
        "head.dense",
        LayerKind::Dense {
            out_features: cfg.num_classes,
        },
        &[flat],
    );
    b.build(cfg.input, dense)
}

/// Configuration for the dense-only probe model used by gradient checking.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseProbeConfig {
    pub input: (usize, usize, usize),
    pub hidden: usize,
    pub num_classes: usize,
}

impl Default for DenseProbeConfig {
    fn default() -> Self {
        Self {
            input: (4, 4, 1),
            hidden: 8,
            num_classes: 4,
        }
    }
}

/// Flatten -> dense -> ReLU -> dense. No convolutions, no normalization;
/// its gradient check isolates the dense and loss paths.
pub fn build_dense_probe(cfg: &DenseProbeConfig) -> Result<ModelGraph, GraphError> {
    validate_common("dense-probe", cfg.input, cfg.num_classes)?;
    if cfg.hidden == 0 {
        return Err(GraphError::InvalidConfig(
            "dense-probe: hidden size must be >= 1".into(),
        ));
    }
    let mut b = GraphBuilder::new();
    let input = b.add("input", LayerKind::Input, &[]);
    let flat = b.add("flatten", LayerKind::Flatten, &[input]);
    let fc1 = b.add(
        "fc1",
        LayerKind::Dense {
            out_features: cfg.hidden,
        },
        &[flat],
    );
    let relu = b.add("fc1_relu", LayerKind::Relu, &[fc1]);
    let fc2 = b.add(
        "fc2",
        LayerKind::Dense {
            out_features: cfg.num_classes,
        },
        &[relu],
    );
    b.build(cfg.input, fc2)
}

/// A deliberately small MBInception for gradient checking: one stage on a
/// 10x10 input. The stem leaves 2x2 feature maps, so batch statistics never
/// degenerate to zero-variance channels (which would park activations
/// exactly on the ReLU kink, where finite differences and the subgradient
/// convention legitimately disagree).
pub fn mbinception_toy() -> MbInceptionConfig {
    MbInceptionConfig {
        input: (10, 10, 3),
        base_filters: 4,
        stage_multipliers: vec![1],
        num_classes: 4,
        dropout_block: 0.25,
        dropout_head: 0.5,
    }
}

pub fn vgg_toy() -> VggStyleConfig {
    VggStyleConfig {
        input: (8, 8, 3),
        width: 2,
        depth: 1,
        hidden: 8,
        num_classes: 4,
    }
}

pub fn resnet_toy() -> ResNetStyleConfig {
    ResNetStyleConfig {
        input: (8, 8, 3),
        width: 4,
        stages: 2,
        blocks_per_stage: 1,
        num_classes: 4,
    }
}

pub fn mobilenet_toy() -> MobileNetStyleConfig {
    MobileNetStyleConfig {
        input: (8, 8, 3),
        width: 4,
        pairs: 2,
        num_classes: 4,
    }
}
