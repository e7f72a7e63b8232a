//! 3×3 same-padding convolution, ReLU and 2×2 max pooling with their
//! backward passes.

use super::params::ConvLayer;
use super::real::{gemm, Real};

/// Unfolds a `c×h×w` map into `(c·9)×(h·w)` patch columns.
pub fn im2col<T: Real>(input: &[T], c: usize, h: usize, w: usize, cols: &mut [T]) {
    let hw = h * w;
    debug_assert_eq!(input.len(), c * hw);
    debug_assert_eq!(cols.len(), c * 9 * hw);
    for ch in 0..c {
        let plane = &input[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(ch * 9 + ky * 3 + kx) * hw..][..hw];
                let x0 = 1usize.saturating_sub(kx);
                let x1 = (w + 1 - kx).min(w);
                for y in 0..h {
                    let dst = &mut row[y * w..(y + 1) * w];
                    let sy = y + ky;
                    if sy == 0 || sy > h {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[(sy - 1) * w..sy * w];
                    dst[..x0].fill(T::zero());
                    dst[x1..].fill(T::zero());
                    dst[x0..x1].copy_from_slice(&src[x0 + kx - 1..x1 + kx - 1]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch columns back into `c×h×w`.
pub fn col2im<T: Real>(cols: &[T], c: usize, h: usize, w: usize, out: &mut [T]) {
    let hw = h * w;
    out.fill(T::zero());
    for ch in 0..c {
        let plane = &mut out[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(ch * 9 + ky * 3 + kx) * hw..][..hw];
                let x0 = 1usize.saturating_sub(kx);
                let x1 = (w + 1 - kx).min(w);
                for y in 0..h {
                    let sy = y + ky;
                    if sy == 0 || sy > h {
                        continue;
                    }
                    let dst = &mut plane[(sy - 1) * w + x0 + kx - 1..(sy - 1) * w + x1 + kx - 1];
                    for (d, s) in dst.iter_mut().zip(&row[y * w + x0..y * w + x1]) {
                        *d += *s;
                    }
                }
            }
        }
    }
}

/// Activations of one layer kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache<T> {
    pub height: usize,
    pub width: usize,
    /// Post-ReLU map, `out × h × w`.
    pub relu: Vec<T>,
    /// Pooled map and per-output argmax (flat index into the channel plane).
    pub pooled: Option<(Vec<T>, Vec<u32>)>,
}

impl<T: Real> LayerCache<T> {
    pub fn output(&self) -> &[T] {
        match &self.pooled {
            Some((p, _)) => p,
            None => &self.relu,
        }
    }

    pub fn output_dims(&self) -> (usize, usize) {
        if self.pooled.is_some() {
            (self.height / 2, self.width / 2)
        } else {
            (self.height, self.width)
        }
    }
}

/// Convolution, bias and ReLU, followed by pooling when the layer asks for it.
pub fn layer_forward<T: Real>(
    layer: &ConvLayer<T>,
    input: &[T],
    h: usize,
    w: usize,
    scratch: &mut Vec<T>,
) -> LayerCache<T> {
    let hw = h * w;
    let k = layer.in_channels * 9;
    scratch.resize(k * hw, T::zero());
    im2col(input, layer.in_channels, h, w, scratch);
    let mut relu = vec![T::zero(); layer.out_channels * hw];
    for (o, row) in relu.chunks_exact_mut(hw).enumerate() {
        row.fill(layer.bias[o]);
    }
    gemm(
        false,
        false,
        layer.out_channels,
        hw,
        k,
        &layer.weight,
        scratch,
        T::one(),
        &mut relu,
    );
    for v in relu.iter_mut() {
        if v.is_nan() || *v <= T::zero() {
            *v = T::zero();
        }
    }
    let pooled = layer
        .pool
        .then(|| max_pool2(&relu, layer.out_channels, h, w));
    LayerCache {
        height: h,
        width: w,
        relu,
        pooled,
    }
}

/// 2×2 stride-2 max pooling; odd trailing rows/columns are dropped. Ties go to
/// the first element in row-major order.
pub fn max_pool2<T: Real>(input: &[T], c: usize, h: usize, w: usize) -> (Vec<T>, Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut arg = Vec::with_capacity(c * oh * ow);
    for plane in input.chunks_exact(h * w).take(c) {
        for y in 0..oh {
            for x in 0..ow {
                let mut best = (2 * y) * w + 2 * x;
                for idx in [best + 1, best + w, best + w + 1] {
                    if plane[idx] > plane[best] {
                        best = idx;
                    }
                }
                out.push(plane[best]);
                arg.push(best as u32);
            }
        }
    }
    (out, arg)
}

/// Backward through one layer.
///
/// `d_out` is the gradient of the layer output (pooled if pooling). Weight and
/// bias gradients are added into `grad`. Returns the input gradient when
/// `need_input_grad`.
pub fn layer_backward<T: Real>(
    layer: &ConvLayer<T>,
    input: &[T],
    cache: &LayerCache<T>,
    d_out: &[T],
    grad: &mut ConvLayer<T>,
    need_input_grad: bool,
    scratch: &mut Vec<T>,
) -> Option<Vec<T>> {
    let (h, w) = (cache.height, cache.width);
    let hw = h * w;
    let cout = layer.out_channels;
    let k = layer.in_channels * 9;
    let mut dy = match &cache.pooled {
        Some((_, arg)) => {
            let ohw = (h / 2) * (w / 2);
            let mut dy = vec![T::zero(); cout * hw];
            for o in 0..cout {
                let plane = &mut dy[o * hw..(o + 1) * hw];
                for (g, &a) in d_out[o * ohw..(o + 1) * ohw]
                    .iter()
                    .zip(&arg[o * ohw..(o + 1) * ohw])
                {
                    plane[a as usize] += *g;
                }
            }
            dy
        }
        None => d_out.to_vec(),
    };
    for (d, a) in dy.iter_mut().zip(&cache.relu) {
        if *a <= T::zero() {
            *d = T::zero();
        }
    }
    for (o, row) in dy.chunks_exact(hw).enumerate() {
        grad.bias[o] += row.iter().copied().sum::<T>();
    }
    scratch.resize(k * hw, T::zero());
    im2col(input, layer.in_channels, h, w, scratch);
    gemm(
        false,
        true,
        cout,
        k,
        hw,
        &dy,
        scratch,
        T::one(),
        &mut grad.weight,
    );
    if !need_input_grad {
        return None;
    }
    gemm(
        true,
        false,
        k,
        hw,
        cout,
        &layer.weight,
        &dy,
        T::zero(),
        scratch,
    );
    let mut dx = vec![T::zero(); layer.in_channels * hw];
    col2im(scratch, layer.in_channels, h, w, &mut dx);
    Some(dx)
}
