//! Latent-space geometry toolkit.
//!
//! A self-contained kernel for desk-scale experiments on latent sentence
//! spaces: a seeded tensor/autodiff core, invertible flows with cluster
//! supervision, vector-quantization codebooks, attention latent-injection
//! operators, a toy VAE harness with cyclical KL annealing and free bits,
//! convex-cone geometry, decision-tree guided traversal, gradient-kernel
//! rule-separation diagnostics, and evaluation metrics built on exact
//! optimal transport.

pub mod attention;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod mlp;
pub mod ntk;
pub mod optim;
pub mod rng;
pub mod tape;
pub mod tensor;
pub mod tree;
pub mod vae;
pub mod vq;

pub use error::{CoreError, Result};
pub use rng::Rng;
pub use tensor::Tensor;
