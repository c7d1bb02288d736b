//! Multiple-instance visual-semantic embeddings.
//!
//! Trains a pair of bidirectional-GRU encoders with self-attention, one per
//! modality (video frames, sentence words), under a triplet-ranking
//! objective where pair similarity is the maximum over all K² combinations
//! of the K embeddings each side produces. Retrieval ranks a database by
//! that same max-of-bag similarity.
//!
//! The crate is self-contained: tensor arithmetic with reverse-mode
//! gradients, the encoders, the losses, the training loop, binary feature /
//! checkpoint formats, retrieval metrics, and a synthetic planted-concept
//! dataset generator for end-to-end verification at desk scale.

pub mod cli;
pub mod config;
pub mod data;
pub mod encoder;
pub mod error;
pub mod numerics;
pub mod objective;
pub mod retrieval;
pub mod trainer;

pub use error::{Error, Result};
