//! Point-cloud gait recognition.
//!
//! The pipeline turns LiDAR sweeps of a walking pedestrian into depth images
//! (range view plus two orthographic views), encodes every frame with a small
//! convolutional network, aggregates frames with an order-free max (set
//! pooling) and embeds the result with horizontal part pooling. Training uses
//! a batch-all triplet loss plus cross-entropy; evaluation runs the
//! cross-view rank-k retrieval protocol.
//!
//! A deterministic capsule-body LiDAR simulator ([`synth`]) produces labelled
//! datasets so that the whole pipeline can be exercised without external data.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.

pub mod cli;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod par;
pub mod pipeline;
pub mod projection;
pub mod seed;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
