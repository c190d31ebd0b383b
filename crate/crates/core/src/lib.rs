//! A from-scratch convolutional network engine for binary MRI slice
//! classification.
//!
//! The crate covers the whole pipeline: tensors and a seeded RNG, the layer
//! kinds of a 14-layer classifier with hand-written backward passes, the model
//! builder and checkpoint format, the optimizer and loss, dataset ingestion
//! and k-fold partitioning, the training loop with early stopping and fold
//! selection, and the precision/recall/F1 report.
//!
//! Runnable walkthroughs live in `examples/`; the `gliomanet` binary wraps the
//! same library calls as `train`, `cv`, `eval`, `predict` and `inspect`.

pub mod cli;
pub mod data;
mod error;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use layers::Mode;
pub use model::{ArchConfig, Model};
pub use tensor::{Rng, Scalar, Tensor};
