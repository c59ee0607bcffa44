//! Run configuration: a flat key-value text format with dotted namespaces,
//! CLI overrides, and a fully resolved echo for the run manifest.
//!
//! ```text
//! # desk-scale training run
//! model.name = mbinception
//! dataset.name = mnist
//! dataset.dir = data/mnist
//! train.seed = 42
//! ```
//!
//! Unknown keys, duplicate keys, and type errors are rejected; `train.seed`
//! is mandatory so no run ever depends on implicit entropy.

use std::collections::BTreeMap;
use std::path::PathBuf;

use super::HarnessError;
use crate::data::ResizeMethod;
use crate::optim::{NadamHyper, Optimizer};

/// Parses the flat key-value document. Later lines may not repeat a key.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, HarnessError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            HarnessError::Config(format!("line {line_no}: expected 'key = value', got '{line}'"))
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty()
            || !key
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, '.' | '_'))
        {
            return Err(HarnessError::Config(format!(
                "line {line_no}: bad key '{key}'"
            )));
        }
        if value.is_empty() {
            return Err(HarnessError::Config(format!(
                "line {line_no}: empty value for '{key}'"
            )));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(HarnessError::Config(format!(
                "line {line_no}: duplicate key '{key}'"
            )));
        }
    }
    Ok(map)
}

/// Applies `key=value` overrides (CLI flags win over file values).
pub fn apply_overrides(
    map: &mut BTreeMap<String, String>,
    overrides: &[String],
) -> Result<(), HarnessError> {
    for item in overrides {
        let (key, value) = item.split_once('=').ok_or_else(|| {
            HarnessError::Config(format!("override '{item}' must look like key=value"))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(())
}

/// Registered model builders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelName {
    MbInception,
    Vgg,
    ResNet,
    MobileNet,
}

pub const MODEL_NAMES: [&str; 4] = ["mbinception", "vgg", "resnet", "mobilenet"];

impl ModelName {
    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        match s {
            "mbinception" => Ok(Self::MbInception),
            "vgg" => Ok(Self::Vgg),
            "resnet" => Ok(Self::ResNet),
            "mobilenet" => Ok(Self::MobileNet),
            other => Err(HarnessError::UnknownName {
                kind: "model",
                name: other.to_string(),
                known: MODEL_NAMES.join(", "),
            }),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MbInception => "mbinception",
            Self::Vgg => "vgg",
            Self::ResNet => "resnet",
            Self::MobileNet => "mobilenet",
        }
    }
}

/// Registered dataset loaders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetName {
    Mnist,
    FashionMnist,
    Cifar10,
    Cifar100,
}

pub const DATASET_NAMES: [&str; 4] = ["mnist", "fashion-mnist", "cifar10", "cifar100"];

impl DatasetName {
    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        match s {
            "mnist" => Ok(Self::Mnist),
            "fashion-mnist" => Ok(Self::FashionMnist),
            "cifar10" => Ok(Self::Cifar10),
            "cifar100" => Ok(Self::Cifar100),
            other => Err(HarnessError::UnknownName {
                kind: "dataset",
                name: other.to_string(),
                known: DATASET_NAMES.join(", "),
            }),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mnist => "mnist",
            Self::FashionMnist => "fashion-mnist",
            Self::Cifar10 => "cifar10",
            Self::Cifar100 => "cifar100",
        }
    }

    pub fn class_count(self) -> usize {
        match self {
            Self::Cifar100 => 100,
            _ => 10,
        }
    }
}

/// Fully typed run configuration with every default resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelName,
    pub base_filters: usize,
    pub stage_multipliers: Vec<usize>,
    pub dropout_block: f64,
    pub dropout_head: f64,
    pub width: usize,
    pub depth: usize,
    pub blocks: usize,
    pub hidden: usize,
    pub dataset: DatasetName,
    pub data_dir: PathBuf,
    pub subset: usize,
    pub test_subset: usize,
    pub resize: ResizeMethod,
    pub optimizer: Optimizer,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    pub output_dir: PathBuf,
    pub resume: Option<PathBuf>,
}

fn get_parsed<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T, HarnessError> {
    match map.get(key) {
        None => Ok(default),
        Some(raw) => raw
            .parse::<T>()
            .map_err(|_| HarnessError::Config(format!("bad value '{raw}' for '{key}'"))),
    }
}

const KNOWN_KEYS: [&str; 22] = [
    "model.name",
    "model.n",
    "model.stages",
    "model.dropout.block",
    "model.dropout.head",
    "model.width",
    "model.depth",
    "model.blocks",
    "model.hidden",
    "dataset.name",
    "dataset.dir",
    "dataset.subset",
    "dataset.test_subset",
    "dataset.resize",
    "optimizer.name",
    "optimizer.eta",
    "optimizer.beta1",
    "optimizer.beta2",
    "optimizer.eps",
    "optimizer.lr",
    "train.batch_size",
    "train.epochs",
];
// Plus the four below; split so the array stays readable.
const KNOWN_KEYS_TAIL: [&str; 4] = [
    "train.seed",
    "train.validation_fraction",
    "output.dir",
    "train.resume",
];

impl RunConfig {
    /// Validates and types a parsed key-value map.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, HarnessError> {
        for key in map.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) && !KNOWN_KEYS_TAIL.contains(&key.as_str()) {
                return Err(HarnessError::Config(format!("unknown key '{key}'")));
            }
        }
        let require = |key: &str| -> Result<&String, HarnessError> {
            map.get(key)
                .ok_or_else(|| HarnessError::Config(format!("missing required key '{key}'")))
        };
        let model = ModelName::parse(require("model.name")?)?;
        let dataset = DatasetName::parse(require("dataset.name")?)?;
        let data_dir = PathBuf::from(require("dataset.dir")?);
        let seed: u64 = require("train.seed")?
            .parse()
            .map_err(|_| HarnessError::Config("bad value for 'train.seed'".into()))?;

        let stage_multipliers = match map.get("model.stages") {
            None => vec![1, 2, 4, 8],
            Some(raw) => raw
                .split(',')
                .map(|p| p.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| {
                    HarnessError::Config(format!("bad value '{raw}' for 'model.stages'"))
                })?,
        };
        let resize = match map.get("dataset.resize").map(String::as_str) {
            None | Some("pad") => ResizeMethod::Pad,
            Some("bilinear") => ResizeMethod::Bilinear,
            Some(other) => {
                return Err(HarnessError::Config(format!(
                    "bad value '{other}' for 'dataset.resize' (pad|bilinear)"
                )))
            }
        };
        let optimizer = match map.get("optimizer.name").map(String::as_str) {
            None | Some("nadam") => Optimizer::Nadam(NadamHyper {
                eta: get_parsed(map, "optimizer.eta", 0.002)?,
                beta1: get_parsed(map, "optimizer.beta1", 0.9)?,
                beta2: get_parsed(map, "optimizer.beta2", 0.999)?,
                eps: get_parsed(map, "optimizer.eps", 1e-6)?,
            }),
            Some("sgd") => Optimizer::Sgd {
                lr: get_parsed(map, "optimizer.lr", 0.01)?,
            },
            Some(other) => {
                return Err(HarnessError::UnknownName {
                    kind: "optimizer",
                    name: other.to_string(),
                    known: "nadam, sgd".into(),
                })
            }
        };

        // Per-model structural defaults (the desk-scale sizes).
        let (def_width, def_depth, def_blocks, def_hidden) = match model {
            ModelName::MbInception => (0, 0, 0, 0),
            ModelName::Vgg => (8, 3, 0, 64),
            ModelName::ResNet => (16, 4, 2, 0),
            ModelName::MobileNet => (8, 4, 0, 0),
        };

        let cfg = Self {
            model,
            base_filters: get_parsed(map, "model.n", 8)?,
            stage_multipliers,
            dropout_block: get_parsed(map, "model.dropout.block", 0.25)?,
            dropout_head: get_parsed(map, "model.dropout.head", 0.5)?,
            width: get_parsed(map, "model.width", def_width)?,
            depth: get_parsed(map, "model.depth", def_depth)?,
            blocks: get_parsed(map, "model.blocks", def_blocks)?,
            hidden: get_parsed(map, "model.hidden", def_hidden)?,
            dataset,
            data_dir,
            subset: get_parsed(map, "dataset.subset", 0)?,
            test_subset: get_parsed(map, "dataset.test_subset", 0)?,
            resize,
            optimizer,
            batch_size: get_parsed(map, "train.batch_size", 64)?,
            epochs: get_parsed(map, "train.epochs", 3)?,
            seed,
            validation_fraction: get_parsed(map, "train.validation_fraction", 0.1)?,
            output_dir: PathBuf::from(
                map.get("output.dir").cloned().unwrap_or_else(|| "runs".into()),
            ),
            resume: map.get("train.resume").map(PathBuf::from),
        };
        if cfg.batch_size == 0 {
            return Err(HarnessError::Config("train.batch_size must be >= 1".into()));
        }
        Ok(cfg)
    }

    /// Every effective setting, echoed as sorted `key = value` pairs. This
    /// is what the manifest records and what the run directory is named by.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("model.name", self.model.as_str().into());
        put("model.n", self.base_filters.to_string());
        put(
            "model.stages",
            self.stage_multipliers
                .iter()
                .map(|m| m.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        put("model.dropout.block", self.dropout_block.to_string());
        put("model.dropout.head", self.dropout_head.to_string());
        put("model.width", self.width.to_string());
        put("model.depth", self.depth.to_string());
        put("model.blocks", self.blocks.to_string());
        put("model.hidden", self.hidden.to_string());
        put("dataset.name", self.dataset.as_str().into());
        put("dataset.dir", self.data_dir.display().to_string());
        put("dataset.subset", self.subset.to_string());
        put("dataset.test_subset", self.test_subset.to_string());
        put(
            "dataset.resize",
            match self.resize {
                ResizeMethod::Pad => "pad".into(),
                ResizeMethod::Bilinear => "bilinear".into(),
            },
        );
        match &self.optimizer {
            Optimizer::Nadam(hp) => {
                put("optimizer.name", "nadam".into());
                put("optimizer.eta", hp.eta.to_string());
                put("optimizer.beta1", hp.beta1.to_string());
                put("optimizer.beta2", hp.beta2.to_string());
                put("optimizer.eps", hp.eps.to_string());
            }
            Optimizer::Sgd { lr } => {
                put("optimizer.name", "sgd".into());
                put("optimizer.lr", lr.to_string());
            }
        }
        put("train.batch_size", self.batch_size.to_string());
        put("train.epochs", self.epochs.to_string());
        put("train.seed", self.seed.to_string());
        put(
            "train.validation_fraction",
            self.validation_fraction.to_string(),
        );
        put("output.dir", self.output_dir.display().to_string());
        if let Some(resume) = &self.resume {
            put("train.resume", resume.display().to_string());
        }
        map
    }

    /// First 16 hex chars of the SHA-256 of the resolved config; names the
    /// run directory together with the seed.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for (k, v) in self.resolved() {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Run directory: `<output.dir>/<config-hash>-s<seed>`.
    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(format!("{}-s{}", self.hash(), self.seed))
    }
}
