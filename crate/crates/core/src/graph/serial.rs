//! Model and checkpoint serialization.
//!
//! The model description is a line-oriented text format:
//!
//! ```text
//! mbigraph v1
//! input 32 32 3
//! node 0 input input
//! node 1 stem.conv conv k=7x7 out=8 stride=2 pad=same in=0
//! node 2 stem.bn batchnorm momentum=0.9 eps=0.00001 in=1
//! output 2
//! ```
//!
//! A checkpoint is a binary container: magic and version, run metadata, the
//! model description, every parameter tensor, and (optionally) the optimizer
//! state, so training resumes bit-identically. Both parsers reject malformed
//! input with positioned errors and never panic on untrusted bytes.

use super::{finish_graph, GraphError, LayerKind, LayerNode, ModelGraph, ParameterStore};
use crate::ops::Padding;
use crate::optim::{NadamHyper, NadamState, Optimizer, OptimizerState};
use crate::tensor::Tensor;

fn pad_str(p: Padding) -> &'static str {
    match p {
        Padding::Same => "same",
        Padding::Valid => "valid",
    }
}

impl ModelGraph {
    /// Renders the graph in the textual description format.
    pub fn to_desc(&self) -> String {
        let (h, w, c) = self.input_hwc();
        let mut out = String::from("mbigraph v1\n");
        out.push_str(&format!("input {h} {w} {c}\n"));
        for node in self.nodes() {
            out.push_str(&format!("node {} {} ", node.id, node.name));
            match &node.kind {
                LayerKind::Input => out.push_str("input"),
                LayerKind::Conv {
                    kh,
                    kw,
                    out_channels,
                    stride,
                    padding,
                } => out.push_str(&format!(
                    "conv k={kh}x{kw} out={out_channels} stride={stride} pad={}",
                    pad_str(*padding)
                )),
                LayerKind::DepthwiseConv {
                    kh,
                    kw,
                    stride,
                    padding,
                } => out.push_str(&format!(
                    "depthwise k={kh}x{kw} stride={stride} pad={}",
                    pad_str(*padding)
                )),
                LayerKind::Pointwise { out_channels } => {
                    out.push_str(&format!("pointwise out={out_channels}"))
                }
                LayerKind::BatchNorm { momentum, eps } => {
                    out.push_str(&format!("batchnorm momentum={momentum} eps={eps}"))
                }
                LayerKind::Relu => out.push_str("relu"),
                LayerKind::MaxPool { k, stride, padding } => out.push_str(&format!(
                    "maxpool k={k} stride={stride} pad={}",
                    pad_str(*padding)
                )),
                LayerKind::Dropout { rate } => out.push_str(&format!("dropout rate={rate}")),
                LayerKind::Dense { out_features } => {
                    out.push_str(&format!("dense out={out_features}"))
                }
                LayerKind::Flatten => out.push_str("flatten"),
                LayerKind::Concat => out.push_str("concat"),
                LayerKind::Add => out.push_str("add"),
            }
            if !node.inputs.is_empty() {
                let ids: Vec<String> = node.inputs.iter().map(|i| i.to_string()).collect();
                out.push_str(&format!(" in={}", ids.join(",")));
            }
            out.push('\n');
        }
        out.push_str(&format!("output {}\n", self.output()));
        out
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

struct KindArgs<'a> {
    line: usize,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> KindArgs<'a> {
    fn take(&mut self, key: &str) -> Result<&'a str, GraphError> {
        let pos = self
            .pairs
            .iter()
            .position(|(k, _)| *k == key)
            .ok_or_else(|| GraphError::Desc {
                line: self.line,
                reason: format!("missing {key}="),
            })?;
        Ok(self.pairs.remove(pos).1)
    }

    fn finish(self) -> Result<(), GraphError> {
        if let Some((k, _)) = self.pairs.first() {
            return Err(GraphError::Desc {
                line: self.line,
                reason: format!("unknown argument '{k}'"),
            });
        }
        Ok(())
    }
}

fn parse_usize(line: usize, what: &str, s: &str) -> Result<usize, GraphError> {
    s.parse::<usize>().map_err(|_| GraphError::Desc {
        line,
        reason: format!("bad {what} '{s}'"),
    })
}

fn parse_f64(line: usize, what: &str, s: &str) -> Result<f64, GraphError> {
    let v = s.parse::<f64>().map_err(|_| GraphError::Desc {
        line,
        reason: format!("bad {what} '{s}'"),
    })?;
    if !v.is_finite() {
        return Err(GraphError::Desc {
            line,
            reason: format!("{what} must be finite, got '{s}'"),
        });
    }
    Ok(v)
}

fn parse_pad(line: usize, s: &str) -> Result<Padding, GraphError> {
    match s {
        "same" => Ok(Padding::Same),
        "valid" => Ok(Padding::Valid),
        other => Err(GraphError::Desc {
            line,
            reason: format!("bad padding '{other}' (expected same|valid)"),
        }),
    }
}

fn parse_kernel(line: usize, s: &str) -> Result<(usize, usize), GraphError> {
    let (kh, kw) = s.split_once('x').ok_or_else(|| GraphError::Desc {
        line,
        reason: format!("bad kernel '{s}' (expected KHxKW)"),
    })?;
    Ok((
        parse_usize(line, "kernel height", kh)?,
        parse_usize(line, "kernel width", kw)?,
    ))
}

/// Parses the textual model description back into a validated graph
/// (including full shape inference).
pub fn parse_model_desc(text: &str) -> Result<ModelGraph, GraphError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    fn next_meaningful<'a>(
        lines: &mut impl Iterator<Item = (usize, &'a str)>,
    ) -> Option<(usize, &'a str)> {
        lines.find(|(_, l)| !l.is_empty() && !l.starts_with('#'))
    }

    let (line_no, header) = next_meaningful(&mut lines).ok_or(GraphError::Desc {
        line: 0,
        reason: "empty description".into(),
    })?;
    if header != "mbigraph v1" {
        return Err(GraphError::Desc {
            line: line_no,
            reason: format!("bad header '{header}' (expected 'mbigraph v1')"),
        });
    }

    let (line_no, input_line) = next_meaningful(&mut lines).ok_or(GraphError::Desc {
        line: line_no,
        reason: "missing input line".into(),
    })?;
    let input_parts: Vec<&str> = input_line.split_whitespace().collect();
    if input_parts.len() != 4 || input_parts[0] != "input" {
        return Err(GraphError::Desc {
            line: line_no,
            reason: "expected 'input H W C'".into(),
        });
    }
    let h = parse_usize(line_no, "input height", input_parts[1])?;
    let w = parse_usize(line_no, "input width", input_parts[2])?;
    let c = parse_usize(line_no, "input channels", input_parts[3])?;

    let mut nodes: Vec<LayerNode> = Vec::new();
    let mut output: Option<usize> = None;
    for (line_no, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("node") => {
                if output.is_some() {
                    return Err(GraphError::Desc {
                        line: line_no,
                        reason: "node after output line".into(),
                    });
                }
                let id = parse_usize(line_no, "node id", parts.next().unwrap_or(""))?;
                if id != nodes.len() {
                    return Err(GraphError::Desc {
                        line: line_no,
                        reason: format!("node id {id} out of order (expected {})", nodes.len()),
                    });
                }
                let name = parts.next().unwrap_or("");
                if !valid_name(name) {
                    return Err(GraphError::Desc {
                        line: line_no,
                        reason: format!("bad node name '{name}'"),
                    });
                }
                let kind_word = parts.next().ok_or_else(|| GraphError::Desc {
                    line: line_no,
                    reason: "missing node kind".into(),
                })?;
                let mut inputs: Vec<usize> = Vec::new();
                let mut pairs: Vec<(&str, &str)> = Vec::new();
                for tok in parts {
                    let (k, v) = tok.split_once('=').ok_or_else(|| GraphError::Desc {
                        line: line_no,
                        reason: format!("bad argument '{tok}'"),
                    })?;
                    if k == "in" {
                        for part in v.split(',') {
                            inputs.push(parse_usize(line_no, "input id", part)?);
                        }
                    } else {
                        pairs.push((k, v));
                    }
                }
                let mut args = KindArgs { line: line_no, pairs };
                let kind = match kind_word {
                    "input" => LayerKind::Input,
                    "conv" => {
                        let (kh, kw) = parse_kernel(line_no, args.take("k")?)?;
                        LayerKind::Conv {
                            kh,
                            kw,
                            out_channels: parse_usize(line_no, "out", args.take("out")?)?,
                            stride: parse_usize(line_no, "stride", args.take("stride")?)?,
                            padding: parse_pad(line_no, args.take("pad")?)?,
                        }
                    }
                    "depthwise" => {
                        let (kh, kw) = parse_kernel(line_no, args.take("k")?)?;
                        LayerKind::DepthwiseConv {
                            kh,
                            kw,
                            stride: parse_usize(line_no, "stride", args.take("stride")?)?,
                            padding: parse_pad(line_no, args.take("pad")?)?,
                        }
                    }
                    "pointwise" => LayerKind::Pointwise {
                        out_channels: parse_usize(line_no, "out", args.take("out")?)?,
                    },
                    "batchnorm" => LayerKind::BatchNorm {
                        momentum: parse_f64(line_no, "momentum", args.take("momentum")?)?,
                        eps: parse_f64(line_no, "eps", args.take("eps")?)?,
                    },
                    "relu" => LayerKind::Relu,
                    "maxpool" => LayerKind::MaxPool {
                        k: parse_usize(line_no, "k", args.take("k")?)?,
                        stride: parse_usize(line_no, "stride", args.take("stride")?)?,
                        padding: parse_pad(line_no, args.take("pad")?)?,
                    },
                    "dropout" => LayerKind::Dropout {
                        rate: parse_f64(line_no, "rate", args.take("rate")?)?,
                    },
                    "dense" => LayerKind::Dense {
                        out_features: parse_usize(line_no, "out", args.take("out")?)?,
                    },
                    "flatten" => LayerKind::Flatten,
                    "concat" => LayerKind::Concat,
                    "add" => LayerKind::Add,
                    other => {
                        return Err(GraphError::Desc {
                            line: line_no,
                            reason: format!("unknown node kind '{other}'"),
                        })
                    }
                };
                args.finish()?;
                // Zero-size kernels/windows/features are rejected up front;
                // shape inference handles the rest.
                let positive = |v: usize, what: &str| -> Result<(), GraphError> {
                    if v == 0 {
                        Err(GraphError::Desc {
                            line: line_no,
                            reason: format!("{what} must be >= 1"),
                        })
                    } else {
                        Ok(())
                    }
                };
                match &kind {
                    LayerKind::Conv {
                        kh,
                        kw,
                        out_channels,
                        stride,
                        ..
                    } => {
                        positive(*kh, "kernel height")?;
                        positive(*kw, "kernel width")?;
                        positive(*out_channels, "out channels")?;
                        positive(*stride, "stride")?;
                    }
                    LayerKind::DepthwiseConv { kh, kw, stride, .. } => {
                        positive(*kh, "kernel height")?;
                        positive(*kw, "kernel width")?;
                        positive(*stride, "stride")?;
                    }
                    LayerKind::Pointwise { out_channels } => {
                        positive(*out_channels, "out channels")?
                    }
                    LayerKind::MaxPool { k, stride, .. } => {
                        positive(*k, "pool window")?;
                        positive(*stride, "stride")?;
                    }
                    LayerKind::Dense { out_features } => positive(*out_features, "out features")?,
                    _ => {}
                }
                nodes.push(LayerNode {
                    id,
                    name: name.to_string(),
                    kind,
                    inputs,
                });
            }
            Some("output") => {
                if output.is_some() {
                    return Err(GraphError::Desc {
                        line: line_no,
                        reason: "duplicate output line".into(),
                    });
                }
                output = Some(parse_usize(line_no, "output id", parts.next().unwrap_or(""))?);
                if parts.next().is_some() {
                    return Err(GraphError::Desc {
                        line: line_no,
                        reason: "trailing tokens after output id".into(),
                    });
                }
            }
            Some(other) => {
                return Err(GraphError::Desc {
                    line: line_no,
                    reason: format!("unknown directive '{other}'"),
                })
            }
            None => unreachable!("blank lines are skipped"),
        }
    }
    let output = output.ok_or(GraphError::Desc {
        line: 0,
        reason: "missing output line".into(),
    })?;
    finish_graph(nodes, (h, w, c), output)
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

const CKPT_MAGIC: &[u8; 8] = b"MBICKPT1";
const CKPT_VERSION: u32 = 1;

/// A complete training snapshot: the model, its parameters, and (when
/// present) the optimizer state needed to resume bit-identically.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model_name: String,
    pub seed: u64,
    pub epochs_completed: u32,
    pub graph: ModelGraph,
    pub params: ParameterStore,
    pub optimizer: Option<(Optimizer, OptimizerState)>,
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u16).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub fn save_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CKPT_MAGIC);
    out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    push_str(&mut out, &ckpt.model_name);
    out.extend_from_slice(&ckpt.seed.to_le_bytes());
    out.extend_from_slice(&ckpt.epochs_completed.to_le_bytes());
    let desc = ckpt.graph.to_desc();
    out.extend_from_slice(&(desc.len() as u32).to_le_bytes());
    out.extend_from_slice(desc.as_bytes());
    out.extend_from_slice(&(ckpt.params.len() as u32).to_le_bytes());
    for (name, param) in ckpt.params.iter() {
        push_str(&mut out, name);
        out.push(param.trainable as u8);
        out.extend_from_slice(&param.tensor.to_bytes());
    }
    match &ckpt.optimizer {
        None => out.push(0),
        Some((Optimizer::Sgd { lr }, _)) => {
            out.push(1);
            out.extend_from_slice(&lr.to_le_bytes());
        }
        Some((Optimizer::Nadam(hp), state)) => {
            out.push(2);
            for v in [hp.eta, hp.beta1, hp.beta2, hp.eps] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&(state.per_param.len() as u32).to_le_bytes());
            for (name, st) in &state.per_param {
                push_str(&mut out, name);
                out.extend_from_slice(&st.t.to_le_bytes());
                out.extend_from_slice(&st.m.to_bytes());
                out.extend_from_slice(&st.v.to_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, reason: impl Into<String>) -> GraphError {
        GraphError::Checkpoint {
            offset: self.offset,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], GraphError> {
        if self.bytes.len() - self.offset < n {
            return Err(self.err(format!(
                "truncated: need {n} byte(s), have {}",
                self.bytes.len() - self.offset
            )));
        }
        let slice = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, GraphError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, GraphError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, GraphError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, GraphError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, GraphError> {
        let v = f64::from_le_bytes(self.take(8)?.try_into().unwrap());
        if !v.is_finite() {
            return Err(self.err("non-finite float"));
        }
        Ok(v)
    }

    fn string(&mut self) -> Result<String, GraphError> {
        let len = self.u16()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.err("invalid utf-8 string"))
    }

    fn tensor(&mut self) -> Result<Tensor, GraphError> {
        let start = self.offset;
        let (t, used) =
            Tensor::from_bytes_prefix(&self.bytes[self.offset..]).map_err(|e| {
                GraphError::Checkpoint {
                    offset: start,
                    reason: e.to_string(),
                }
            })?;
        self.offset += used;
        Ok(t)
    }
}

/// Parses and validates a checkpoint: the embedded description must build,
/// and the stored parameters must exactly match the graph's parameter specs
/// in name, shape, and trainability.
pub fn load_checkpoint(bytes: &[u8]) -> Result<Checkpoint, GraphError> {
    let mut r = Reader { bytes, offset: 0 };
    if r.take(8)? != CKPT_MAGIC {
        return Err(GraphError::Checkpoint {
            offset: 0,
            reason: "bad magic (expected MBICKPT1)".into(),
        });
    }
    let version = r.u32()?;
    if version != CKPT_VERSION {
        return Err(r.err(format!("unsupported version {version}")));
    }
    let model_name = r.string()?;
    let seed = r.u64()?;
    let epochs_completed = r.u32()?;
    let desc_len = r.u32()? as usize;
    let desc_bytes = r.take(desc_len)?;
    let desc = std::str::from_utf8(desc_bytes)
        .map_err(|_| GraphError::Checkpoint {
            offset: 0,
            reason: "model description is not utf-8".into(),
        })?;
    let graph = parse_model_desc(desc)?;

    let specs = graph.parameter_specs();
    let n_params = r.u32()? as usize;
    if n_params != specs.len() {
        return Err(r.err(format!(
            "parameter count {n_params} does not match model ({} expected)",
            specs.len()
        )));
    }
    let mut params = ParameterStore::new();
    for _ in 0..n_params {
        let name = r.string()?;
        let trainable = match r.u8()? {
            0 => false,
            1 => true,
            other => return Err(r.err(format!("bad trainable flag {other}"))),
        };
        let tensor = r.tensor()?;
        let spec = specs.iter().find(|(n, _, _)| *n == name).ok_or_else(|| {
            GraphError::Checkpoint {
                offset: 0,
                reason: format!("parameter '{name}' does not belong to the model"),
            }
        })?;
        if tensor.shape() != spec.1 {
            return Err(GraphError::Checkpoint {
                offset: 0,
                reason: format!(
                    "parameter '{name}' has shape {:?}, model expects {:?}",
                    tensor.shape(),
                    spec.1
                ),
            });
        }
        if trainable != spec.2 {
            return Err(GraphError::Checkpoint {
                offset: 0,
                reason: format!("parameter '{name}' trainability flag mismatch"),
            });
        }
        params.insert(name, tensor, trainable);
    }
    if params.len() != specs.len() {
        return Err(r.err("duplicate parameter entries".to_string()));
    }

    let optimizer = match r.u8()? {
        0 => None,
        1 => {
            let lr = r.f64()?;
            Some((Optimizer::Sgd { lr }, OptimizerState::default()))
        }
        2 => {
            let hp = NadamHyper {
                eta: r.f64()?,
                beta1: r.f64()?,
                beta2: r.f64()?,
                eps: r.f64()?,
            };
            let n = r.u32()? as usize;
            let mut state = OptimizerState::default();
            for _ in 0..n {
                let name = r.string()?;
                let t = r.u64()?;
                let m = r.tensor()?;
                let v = r.tensor()?;
                if !params.is_trainable(&name) {
                    return Err(GraphError::Checkpoint {
                        offset: 0,
                        reason: format!("optimizer state for unknown parameter '{name}'"),
                    });
                }
                let expected = params.tensor(&name)?.shape().to_vec();
                if m.shape() != expected || v.shape() != expected {
                    return Err(GraphError::Checkpoint {
                        offset: 0,
                        reason: format!("optimizer state shape mismatch for '{name}'"),
                    });
                }
                state.per_param.insert(name, NadamState { m, v, t });
            }
            Some((Optimizer::Nadam(hp), state))
        }
        other => return Err(r.err(format!("bad optimizer tag {other}"))),
    };
    if r.offset != bytes.len() {
        return Err(r.err(format!("{} trailing byte(s)", bytes.len() - r.offset)));
    }
    Ok(Checkpoint {
        model_name,
        seed,
        epochs_completed,
        graph,
        params,
        optimizer,
    })
}
