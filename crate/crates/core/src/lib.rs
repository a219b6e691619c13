//! Causally disentangled light-curve representations.
//!
//! The crate covers the whole desk-scale pipeline:
//!
//! - [`simgen`]: star/instrument light-curve simulator, observation graph and triplet sampling
//! - [`nncore`]: dense networks with hand-written reverse passes, Adam, gradient checking
//! - [`model`]: dual-encoder autoencoder with Hadamard fusion, single-latent baseline, losses
//! - [`train`]: star-level splits, epoch batching, early stopping, checkpoints
//! - [`eval`]: embeddings, few-shot regression probes, instrument leakage, PCA, reports
//! - [`config`]: strict run configuration shared by the command-line tool

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codec;
pub mod config;
pub mod error;
pub mod eval;
pub mod model;
pub mod nncore;
pub mod rng;
pub mod simgen;
pub mod train;

pub use error::{Error, ErrorClass, Result};
