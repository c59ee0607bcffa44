//! A self-contained, CPU-only deep-learning engine for desk-scale image
//! classification experiments.
//!
//! The crate provides:
//!
//! - [`tensor`]: dense f64 tensors with deterministic arithmetic.
//! - [`ops`]: forward and backward implementations of every layer the
//!   bundled architectures need.
//! - [`graph`]: architecture builders (MBInception plus VGG-, ResNet-, and
//!   MobileNet-style minis), DAG execution, parameter counting, and
//!   model/checkpoint serialization.
//! - [`optim`]: NADAM and plain SGD parameter updates.
//! - [`data`]: byte-exact IDX and CIFAR binary loaders, preprocessing, and
//!   the validation-split protocol.
//! - [`metrics`]: confusion-matrix accounting, accuracy/precision/recall/F1,
//!   and probability-density histograms.
//! - [`harness`]: the train/eval/compare/gradcheck commands behind the `mbi`
//!   CLI, with reproducible run manifests.
//!
//! Everything is seeded explicitly; a command repeated with the same config
//! and seed produces bit-identical outputs.

pub mod data;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod ops;
pub mod optim;
pub mod tensor;

/// The one RNG used anywhere in the engine. Always seeded explicitly;
/// stream derivation is deterministic across platforms.
pub type SeededRng = rand_chacha::ChaCha20Rng;

