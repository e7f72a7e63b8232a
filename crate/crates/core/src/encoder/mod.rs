//! Convolutional gait encoder with hand-written gradients.
//!
//! Generic over [`Real`] so the same code trains in `f32` and is verified
//! against finite differences in `f64`.

mod conv;
mod model;
mod params;
mod real;
mod tensor;

pub use conv::{col2im, im2col, max_pool2};
pub use model::{
    backward, branch_forward, compute_gradients, conv_forward, embed, forward, forward_batch,
    fuse_views, hpp_embed, set_pool, set_pool_argmax, strip_bounds, ForwardPass, HppOutput,
    SequenceInput,
};
pub use params::{
    read_architecture, Architecture, ConvLayer, ConvSpec, EncoderParams, InputMode, ENC_MAGIC,
};
pub use real::{gemm, Real};
pub use tensor::Tensor;

/// Sequence embedding: `parts` strips of equal length, concatenated.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub parts: usize,
    pub values: Vec<f32>,
    pub label: Option<String>,
}

impl Embedding {
    pub fn new(parts: usize, values: Vec<f32>, label: Option<String>) -> Self {
        debug_assert!(parts > 0 && values.len().is_multiple_of(parts));
        Self {
            parts,
            values,
            label,
        }
    }

    pub fn part(&self, s: usize) -> &[f32] {
        let n = self.values.len() / self.parts;
        &self.values[s * n..(s + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
