//! # tegke
//!
//! Topic-to-essay generation with comprehensive knowledge enhancement:
//! a teacher/student pair of latent networks (internal knowledge transfer),
//! a compositional multi-hop knowledge-graph encoder (external knowledge),
//! a dual-attention GRU decoder, and Wasserstein adversarial training with
//! a gradient penalty.
//!
//! The crate is organized around the pipeline:
//!
//! - [`data`] — corpus ingestion, vocabulary, batching
//! - [`kgraph`] — triple store and multi-hop topic-graph extraction
//! - [`seq_encoders`] — bidirectional GRU encoders for topics and essays
//! - [`latent_bridge`] — teacher/student Gaussians and the KL transfer loss
//! - [`graph_encoder`] — compositional relational graph convolution + gate
//! - [`essay_decoder`] — dual-attention decoder, teacher forcing, generation
//! - [`critic`] — CNN Wasserstein critic with gradient penalty
//! - [`trainer`] — two-stage training, checkpoints, logs
//! - [`evalx`] — BLEU, Dist-1/2, Novelty
//! - [`cli`] — the `tegke` command-line entry point
//!
//! Everything numeric runs in `f64` on a small reverse-mode autodiff tape
//! ([`tape`]), which keeps gradient checks and the gradient-penalty
//! double-backward exact.

pub mod cli;
pub mod critic;
pub mod data;
pub mod essay_decoder;
pub mod evalx;
pub mod graph_encoder;
pub mod kgraph;
pub mod latent_bridge;
pub mod model;
pub mod nn;
pub mod seq_encoders;
pub mod tape;
pub mod trainer;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum TegkeError {
    #[error("ingestion error at {path}:{line}: {message}")]
    Ingestion {
        path: String,
        line: usize,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("structural error: {0}")]
    Structure(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("non-finite loss at batch {batch}: {components}")]
    NonFinite { batch: usize, components: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TegkeError>;
