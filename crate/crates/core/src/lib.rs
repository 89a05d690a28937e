//! Training neural networks by reconnecting their weights.
//!
//! The optimizer in [`optim`] keeps a sorted copy of the initial weights and
//! periodically replaces the live weights of every neuron with that copy,
//! reordered to match the ranking the inner optimizer has produced. Everything
//! else in the crate exists to support, measure, or serialize that loop:
//!
//! - [`tensor`]: dense row-major arrays, deterministic numeric kernels, and a
//!   portable seeded RNG.
//! - [`nn`]: layers with hand-written backprop, initializers, and the model
//!   container that exposes per-neuron weight vectors.
//! - [`optim`]: SGD/Adam/Lookahead inner optimizers, learning-rate schedules,
//!   and the reconnection outer loop.
//! - [`perm`]: rankings, ranking distances, permutation cycles, Lehmer codes,
//!   permutation-space counting, and weight-profile export.
//! - [`prune`]: random sparsification, frozen-mask baselines, and shared-value
//!   (weight-agnostic) initialization.
//! - [`data`]: MNIST/CIFAR-10 loaders, normalization, shift/flip augmentation,
//!   and a synthetic blob dataset for fast tests.
//! - [`checkpoint`]: binary model snapshots.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod nn;
pub mod optim;
pub mod perm;
pub mod prune;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Rng, Tensor};
