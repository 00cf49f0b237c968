//! Numeric core for classifying microtubule network images with a small
//! convolutional network.
//!
//! Everything here is pure computation over in-memory data and builds without
//! `std` (only `alloc` is required). File formats, the command line and other
//! IO live in the `mtcnn` companion crate.
//!
//! The pieces, bottom-up:
//!
//! * [`tensor`], [`rng`], [`gradcheck`]: dense tensors, seeded substreams and
//!   the central-difference gradient oracle.
//! * [`layers`]: convolution, max pooling, dense, ReLU, dropout and the
//!   softmax/cross-entropy head, each with an explicit backward pass.
//! * [`optim`]: NAdam and the L2 weight penalty.
//! * [`model`]: declarative topologies, the canonical network, parameter
//!   counting and whole-model forward/backward.
//! * [`data`]: 8-bit image transforms, rotation augmentation, group-aware
//!   splitting and the synthetic texture generator.
//! * [`train`]: mini-batch training with early stopping, k-fold cross
//!   validation and topology search.
//! * [`eval`]: classification tasks, confusion matrices, majority voting,
//!   the two-proportion test and the published-table fixtures.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use rng::{Prng, Stream};
pub use scalar::Scalar;
pub use tensor::Tensor;
