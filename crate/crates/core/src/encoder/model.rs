//! Sequence-level forward and backward passes.
//!
//! A sequence is one list of `1×H×W` frames per view. Each view runs its own
//! convolutional branch frame by frame; the branch outputs are concatenated
//! along channels, max-pooled over frames and split into horizontal strips
//! that are embedded and classified independently.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use super::conv::{layer_backward, layer_forward, LayerCache};
use super::params::{ConvLayer, EncoderParams};
use super::real::Real;
use super::tensor::Tensor;
use crate::{par, Error, Result};

/// Frames of one sequence, indexed `[view][frame]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceInput<T> {
    pub views: Vec<Vec<Tensor<T>>>,
}

impl<T: Real> SequenceInput<T> {
    pub fn single_view(frames: Vec<Tensor<T>>) -> Self {
        Self {
            views: vec![frames],
        }
    }

    pub fn frame_count(&self) -> usize {
        self.views.first().map_or(0, Vec::len)
    }
}

/// Runs one convolutional branch on a single `C×H×W` input.
pub fn conv_forward<T: Real>(branch: &[ConvLayer<T>], image: &Tensor<T>) -> Result<Tensor<T>> {
    let cache = branch_forward(branch, image)?;
    Ok(cache.output())
}

#[derive(Debug, Clone)]
pub struct BranchCache<T> {
    input: Vec<T>,
    input_dims: (usize, usize),
    layers: Vec<LayerCache<T>>,
    out_channels: usize,
}

impl<T: Real> BranchCache<T> {
    pub fn output(&self) -> Tensor<T> {
        let (h, w) = self.output_dims();
        let data = self.layers.last().map_or(&self.input[..], |l| l.output());
        Tensor::from_vec(&[self.out_channels, h, w], data.to_vec()).expect("consistent shape")
    }

    fn output_dims(&self) -> (usize, usize) {
        self.layers
            .last()
            .map_or(self.input_dims, LayerCache::output_dims)
    }
}

fn check_input<T: Real>(branch: &[ConvLayer<T>], image: &Tensor<T>) -> Result<(usize, usize)> {
    let shape = image.shape();
    let expected = branch.first().map_or(1, |l| l.in_channels);
    if shape.len() != 3 || shape[0] != expected {
        return Err(Error::Shape(format!(
            "branch expects {expected}×H×W input, got {shape:?}"
        )));
    }
    if shape[1] == 0 || shape[2] == 0 {
        return Err(Error::Shape("empty input image".into()));
    }
    Ok((shape[1], shape[2]))
}

pub fn branch_forward<T: Real>(
    branch: &[ConvLayer<T>],
    image: &Tensor<T>,
) -> Result<BranchCache<T>> {
    let (h0, w0) = check_input(branch, image)?;
    let mut scratch = Vec::new();
    let mut layers: Vec<LayerCache<T>> = Vec::with_capacity(branch.len());
    let (mut h, mut w) = (h0, w0);
    for layer in branch {
        let input = layers.last().map_or(image.data(), |c| c.output());
        let cache = layer_forward(layer, input, h, w, &mut scratch);
        (h, w) = cache.output_dims();
        if h == 0 || w == 0 {
            return Err(Error::Shape("input too small for the pooling stack".into()));
        }
        layers.push(cache);
    }
    Ok(BranchCache {
        input: image.data().to_vec(),
        input_dims: (h0, w0),
        out_channels: branch.last().map_or(image.shape()[0], |l| l.out_channels),
        layers,
    })
}

fn branch_backward<T: Real>(
    branch: &[ConvLayer<T>],
    cache: &BranchCache<T>,
    d_out: Vec<T>,
    grads: &mut [ConvLayer<T>],
    scratch: &mut Vec<T>,
) {
    let mut d = d_out;
    for l in (0..branch.len()).rev() {
        let input = if l == 0 {
            &cache.input
        } else {
            cache.layers[l - 1].output()
        };
        match layer_backward(
            &branch[l],
            input,
            &cache.layers[l],
            &d,
            &mut grads[l],
            l > 0,
            scratch,
        ) {
            Some(dx) => d = dx,
            None => break,
        }
    }
}

/// Elementwise maximum over frames.
pub fn set_pool<T: Real>(frames: &[Tensor<T>]) -> Result<Tensor<T>> {
    Ok(set_pool_argmax(frames)?.0)
}

/// Set pooling plus, per element, the frame that supplied the maximum (first
/// frame on ties).
pub fn set_pool_argmax<T: Real>(frames: &[Tensor<T>]) -> Result<(Tensor<T>, Vec<u32>)> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidArgument("set pooling needs at least one frame".into()))?;
    if frames.iter().any(|f| f.shape() != first.shape()) {
        return Err(Error::Shape(
            "set pooling over frames of different shapes".into(),
        ));
    }
    let mut out = first.clone();
    let mut arg = vec![0u32; first.len()];
    for (i, frame) in frames.iter().enumerate().skip(1) {
        for ((o, a), v) in out
            .data_mut()
            .iter_mut()
            .zip(arg.iter_mut())
            .zip(frame.data())
        {
            if *v > *o {
                *o = *v;
                *a = i as u32;
            }
        }
    }
    Ok((out, arg))
}

/// Concatenates the views' feature maps frame by frame along channels.
pub fn fuse_views<T: Real>(per_view: &[Vec<Tensor<T>>]) -> Result<Vec<Tensor<T>>> {
    let first = per_view
        .first()
        .ok_or_else(|| Error::InvalidArgument("no views to fuse".into()))?;
    if per_view.len() == 1 {
        return Ok(first.clone());
    }
    if per_view.iter().any(|v| v.len() != first.len()) {
        return Err(Error::Shape("views have different frame counts".into()));
    }
    (0..first.len())
        .map(|f| {
            let shape = per_view[0][f].shape();
            if shape.len() != 3 || per_view.iter().any(|v| v[f].shape()[1..] != shape[1..]) {
                return Err(Error::Shape("views have different spatial extents".into()));
            }
            let channels: usize = per_view.iter().map(|v| v[f].shape()[0]).sum();
            let mut data = Vec::with_capacity(channels * shape[1] * shape[2]);
            for view in per_view {
                data.extend_from_slice(view[f].data());
            }
            Tensor::from_vec(&[channels, shape[1], shape[2]], data)
        })
        .collect()
}

/// Row ranges of the horizontal strips; strips cover every row even when the
/// height is not a multiple of `parts`.
pub fn strip_bounds(height: usize, parts: usize) -> Vec<(usize, usize)> {
    (0..parts)
        .map(|s| (s * height / parts, ((s + 1) * height).div_ceil(parts)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct HppOutput<T> {
    /// `parts × embed`.
    pub embedding: Vec<T>,
    /// `parts × classes`.
    pub logits: Vec<T>,
    /// Strip features before the linear maps, `parts × channels`.
    pub pooled: Vec<T>,
    /// Flat spatial index of each strip maximum, `parts × channels`.
    pub argmax: Vec<u32>,
}

/// Horizontal part pooling: per strip and channel, spatial max plus spatial
/// mean, then the strip's own embedding map and classifier.
pub fn hpp_embed<T: Real>(params: &EncoderParams<T>, pooled: &Tensor<T>) -> Result<HppOutput<T>> {
    let arch = &params.arch;
    let shape = pooled.shape();
    let c = arch.fused_channels();
    if shape.len() != 3 || shape[0] != c {
        return Err(Error::Shape(format!(
            "part pooling expects {c}×H×W, got {shape:?}"
        )));
    }
    let (h, w) = (shape[1], shape[2]);
    let (e, k) = (arch.embed_dim, arch.n_classes);
    let mut feats = Vec::with_capacity(arch.parts * c);
    let mut argmax = Vec::with_capacity(arch.parts * c);
    for (top, bottom) in strip_bounds(h, arch.parts) {
        let inv_area = T::from_f64(1.0 / ((bottom - top) * w) as f64);
        for plane in pooled.data().chunks_exact(h * w) {
            let strip = &plane[top * w..bottom * w];
            let mut best = 0;
            let mut sum = T::zero();
            for (i, &v) in strip.iter().enumerate() {
                if v > strip[best] {
                    best = i;
                }
                sum += v;
            }
            feats.push(strip[best] + sum * inv_area);
            argmax.push((top * w + best) as u32);
        }
    }
    let mut embedding = vec![T::zero(); arch.parts * e];
    let mut logits = vec![T::zero(); arch.parts * k];
    for s in 0..arch.parts {
        let p = &feats[s * c..(s + 1) * c];
        let m = &params.part_maps[s * e * c..(s + 1) * e * c];
        let emb = &mut embedding[s * e..(s + 1) * e];
        for (out, row) in emb.iter_mut().zip(m.chunks_exact(c)) {
            *out = dot(row, p);
        }
        let wcls = &params.classifier[s * k * e..(s + 1) * k * e];
        for (out, row) in logits[s * k..(s + 1) * k]
            .iter_mut()
            .zip(wcls.chunks_exact(e))
        {
            *out = dot(row, emb);
        }
    }
    Ok(HppOutput {
        embedding,
        logits,
        pooled: feats,
        argmax,
    })
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

/// Everything the backward pass needs for one sequence.
#[derive(Debug, Clone)]
pub struct ForwardPass<T> {
    pub embedding: Vec<T>,
    pub logits: Vec<T>,
    branches: Vec<Vec<BranchCache<T>>>,
    frame_argmax: Vec<u32>,
    pooled_dims: (usize, usize),
    hpp: HppOutput<T>,
}

impl<T: Real> ForwardPass<T> {
    /// Hash of every discrete routing decision: ReLU signs, pooling winners
    /// and strip maxima. Two parameter settings with equal fingerprints lie in
    /// the same linear region of the network.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for view in &self.branches {
            for frame in view {
                for layer in &frame.layers {
                    for v in &layer.relu {
                        (*v > T::zero()).hash(&mut h);
                    }
                    if let Some((_, arg)) = &layer.pooled {
                        arg.hash(&mut h);
                    }
                }
            }
        }
        self.frame_argmax.hash(&mut h);
        self.hpp.argmax.hash(&mut h);
        h.finish()
    }
}

fn validate_input<T: Real>(params: &EncoderParams<T>, input: &SequenceInput<T>) -> Result<()> {
    if input.views.len() != params.branches.len() {
        return Err(Error::Shape(format!(
            "encoder has {} views, input has {}",
            params.branches.len(),
            input.views.len()
        )));
    }
    if input.frame_count() == 0 {
        return Err(Error::InvalidArgument("sequence has no frames".into()));
    }
    Ok(())
}

/// Full forward pass keeping activations for [`backward`].
pub fn forward<T: Real>(
    params: &EncoderParams<T>,
    input: &SequenceInput<T>,
) -> Result<ForwardPass<T>> {
    validate_input(params, input)?;
    let branches = params
        .branches
        .iter()
        .zip(&input.views)
        .map(|(branch, frames)| frames.iter().map(|f| branch_forward(branch, f)).collect())
        .collect::<Result<Vec<Vec<_>>>>()?;
    let features: Vec<Vec<Tensor<T>>> = branches
        .iter()
        .map(|v| v.iter().map(BranchCache::output).collect())
        .collect();
    let fused = fuse_views(&features)?;
    let (pooled, frame_argmax) = set_pool_argmax(&fused)?;
    let hpp = hpp_embed(params, &pooled)?;
    Ok(ForwardPass {
        embedding: hpp.embedding.clone(),
        logits: hpp.logits.clone(),
        pooled_dims: (pooled.shape()[1], pooled.shape()[2]),
        branches,
        frame_argmax,
        hpp,
    })
}

/// Inference-only forward: `(embedding, logits)` without stored activations.
pub fn embed<T: Real>(
    params: &EncoderParams<T>,
    input: &SequenceInput<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    validate_input(params, input)?;
    let per_view = params
        .branches
        .iter()
        .zip(&input.views)
        .map(|(branch, frames)| {
            let mut acc: Option<Tensor<T>> = None;
            for f in frames {
                let out = conv_forward(branch, f)?;
                acc = Some(match acc {
                    None => out,
                    Some(a) => set_pool(&[a, out])?,
                });
            }
            Ok(vec![acc.expect("nonempty")])
        })
        .collect::<Result<Vec<_>>>()?;
    let pooled = fuse_views(&per_view)?.pop().expect("one fused frame");
    let hpp = hpp_embed(params, &pooled)?;
    Ok((hpp.embedding, hpp.logits))
}

/// Gradients of a scalar loss with respect to all parameters, given the
/// loss gradient with respect to this sequence's embedding and logits.
pub fn backward<T: Real>(
    params: &EncoderParams<T>,
    pass: &ForwardPass<T>,
    d_embedding: &[T],
    d_logits: &[T],
) -> EncoderParams<T> {
    let arch = &params.arch;
    let mut grads = params.zeros_like();
    let (c, e, k) = (arch.fused_channels(), arch.embed_dim, arch.n_classes);
    let (h, w) = pass.pooled_dims;
    let hw = h * w;
    let mut d_pooled = vec![T::zero(); c * hw];
    for (s, (top, bottom)) in strip_bounds(h, arch.parts).into_iter().enumerate() {
        let emb = &pass.hpp.embedding[s * e..(s + 1) * e];
        let dlog = &d_logits[s * k..(s + 1) * k];
        let wcls = &params.classifier[s * k * e..(s + 1) * k * e];
        let mut de = d_embedding[s * e..(s + 1) * e].to_vec();
        let gcls = &mut grads.classifier[s * k * e..(s + 1) * k * e];
        for ((g_row, w_row), &dl) in gcls.chunks_exact_mut(e).zip(wcls.chunks_exact(e)).zip(dlog) {
            if dl == T::zero() {
                continue;
            }
            for ((g, d), (x, wv)) in g_row
                .iter_mut()
                .zip(de.iter_mut())
                .zip(emb.iter().zip(w_row))
            {
                *g += dl * *x;
                *d += dl * *wv;
            }
        }
        let feats = &pass.hpp.pooled[s * c..(s + 1) * c];
        let m = &params.part_maps[s * e * c..(s + 1) * e * c];
        let gm = &mut grads.part_maps[s * e * c..(s + 1) * e * c];
        let mut dp = vec![T::zero(); c];
        for ((g_row, m_row), &d) in gm.chunks_exact_mut(c).zip(m.chunks_exact(c)).zip(&de) {
            if d == T::zero() {
                continue;
            }
            for ((g, dpc), (f, mv)) in g_row
                .iter_mut()
                .zip(dp.iter_mut())
                .zip(feats.iter().zip(m_row))
            {
                *g += d * *f;
                *dpc += d * *mv;
            }
        }
        let inv_area = T::from_f64(1.0 / ((bottom - top) * w) as f64);
        for (ch, &g) in dp.iter().enumerate() {
            let plane = &mut d_pooled[ch * hw..(ch + 1) * hw];
            plane[pass.hpp.argmax[s * c + ch] as usize] += g;
            let share = g * inv_area;
            plane[top * w..bottom * w]
                .iter_mut()
                .for_each(|v| *v += share);
        }
    }

    let frames = pass.branches[0].len();
    let per_view = arch.branch_channels() * hw;
    let mut scratch = Vec::new();
    for (v, (branch, caches)) in params.branches.iter().zip(&pass.branches).enumerate() {
        let offset = v * per_view;
        for (f, cache) in caches.iter().enumerate().take(frames) {
            let mut d_out = vec![T::zero(); per_view];
            let mut any = false;
            for (i, d) in d_out.iter_mut().enumerate() {
                if pass.frame_argmax[offset + i] as usize == f {
                    *d = d_pooled[offset + i];
                    any |= *d != T::zero();
                }
            }
            if any {
                branch_backward(branch, cache, d_out, &mut grads.branches[v], &mut scratch);
            }
        }
    }
    grads
}

/// Forward passes for a batch of sequences, in input order.
pub fn forward_batch<T: Real>(
    params: &EncoderParams<T>,
    inputs: &[SequenceInput<T>],
) -> Result<Vec<ForwardPass<T>>> {
    par::map(inputs, |input| forward(params, input))
        .into_iter()
        .collect()
}

/// Sum of per-sequence gradients, reduced in sequence order so the result
/// does not depend on scheduling.
pub fn compute_gradients<T: Real>(
    params: &EncoderParams<T>,
    passes: &[ForwardPass<T>],
    d_embeddings: &[Vec<T>],
    d_logits: &[Vec<T>],
) -> EncoderParams<T> {
    let per_sequence = par::map_range(passes.len(), |i| {
        backward(params, &passes[i], &d_embeddings[i], &d_logits[i])
    });
    let mut total = params.zeros_like();
    for g in &per_sequence {
        total.accumulate(g);
    }
    total
}
