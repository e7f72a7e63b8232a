#![allow(dead_code)]

use lidargait::encoder::{
    compute_gradients, forward_batch, Architecture, EncoderParams, SequenceInput, Tensor,
};
use lidargait::seed;
use lidargait::synth::unit_f64;
use lidargait::training::{combined_loss, cross_entropy_loss, triplet_loss_bap};

pub struct LossSpec {
    pub alpha: f64,
    pub beta: f64,
    pub margin: f64,
}

pub const BOTH_LOSSES: LossSpec = LossSpec {
    alpha: 1.0,
    beta: 0.1,
    margin: 0.2,
};

/// Loss value plus a signature of every discrete decision taken on the way.
pub fn loss_and_signature(
    params: &EncoderParams<f64>,
    inputs: &[SequenceInput<f64>],
    labels: &[usize],
    spec: &LossSpec,
) -> (f64, Vec<u64>) {
    let passes = forward_batch(params, inputs).unwrap();
    let emb: Vec<Vec<f64>> = passes.iter().map(|p| p.embedding.clone()).collect();
    let log: Vec<Vec<f64>> = passes.iter().map(|p| p.logits.clone()).collect();
    let parts = params.arch.parts;
    let tri = triplet_loss_bap(&emb, labels, parts, spec.margin);
    let ce = cross_entropy_loss(&log, labels, parts);
    let mut sig: Vec<u64> = passes.iter().map(|p| p.fingerprint()).collect();
    sig.push(tri.active as u64);
    (
        combined_loss(tri.loss.value, ce.value, spec.alpha, spec.beta),
        sig,
    )
}

pub fn analytic_gradient(
    params: &EncoderParams<f64>,
    inputs: &[SequenceInput<f64>],
    labels: &[usize],
    spec: &LossSpec,
) -> EncoderParams<f64> {
    let passes = forward_batch(params, inputs).unwrap();
    let emb: Vec<Vec<f64>> = passes.iter().map(|p| p.embedding.clone()).collect();
    let log: Vec<Vec<f64>> = passes.iter().map(|p| p.logits.clone()).collect();
    let parts = params.arch.parts;
    let tri = triplet_loss_bap(&emb, labels, parts, spec.margin);
    let ce = cross_entropy_loss(&log, labels, parts);
    let scale = |g: Vec<Vec<f64>>, f: f64| -> Vec<Vec<f64>> {
        g.into_iter()
            .map(|v| v.into_iter().map(|x| x * f).collect())
            .collect()
    };
    compute_gradients(
        params,
        &passes,
        &scale(tri.loss.grads, spec.alpha),
        &scale(ce.grads, spec.beta),
    )
}

#[derive(Debug, Default, Clone, Copy)]
pub struct CheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose ±h perturbation crossed a ReLU, pooling or hinge
    /// boundary, where a central difference does not estimate the derivative.
    pub skipped: usize,
}

/// Relative error with a floor on the denominator so that coordinates with
/// (near) zero gradient compare absolutely.
pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Central differences with step `h` on `per_blob` random coordinates of
/// every parameter blob (all coordinates when the blob is smaller).
///
/// The estimate is the five-point stencil at `h` and `h/2` combined by one
/// Richardson step, which cancels the `h⁴` term; it samples `±h/2, ±h, ±2h`.
/// Coordinates whose samples leave the current linear region are skipped and
/// counted.
pub fn check_gradients(
    params: &EncoderParams<f64>,
    inputs: &[SequenceInput<f64>],
    labels: &[usize],
    spec: &LossSpec,
    h: f64,
    per_blob: usize,
    seed_value: u64,
) -> CheckReport {
    let analytic = analytic_gradient(params, inputs, labels, spec);
    let (_, base_sig) = loss_and_signature(params, inputs, labels, spec);
    let mut rng = seed::rng(seed_value);
    let mut report = CheckReport::default();
    let n_blobs = params.blobs().len();
    for b in 0..n_blobs {
        let len = params.blobs()[b].len();
        let coords: Vec<usize> = if len <= per_blob {
            (0..len).collect()
        } else {
            (0..per_blob)
                .map(|_| (unit_f64(&mut rng) * len as f64) as usize)
                .collect()
        };
        for i in coords {
            let eval = |offset: f64| {
                let mut p = params.clone();
                p.blobs_mut()[b][i] += offset;
                loss_and_signature(&p, inputs, labels, spec)
            };
            let samples = [
                eval(2.0 * h),
                eval(h),
                eval(0.5 * h),
                eval(-0.5 * h),
                eval(-h),
                eval(-2.0 * h),
            ];
            if samples.iter().any(|(_, sig)| *sig != base_sig) {
                report.skipped += 1;
                continue;
            }
            let [f2, f1, fh, mh, m1, m2] = samples.map(|(v, _)| v);
            let coarse = (-f2 + 8.0 * f1 - 8.0 * m1 + m2) / (12.0 * h);
            let fine = (-f1 + 8.0 * fh - 8.0 * mh + m1) / (6.0 * h);
            let numeric = (16.0 * fine - coarse) / 15.0;
            let a = analytic.blobs()[b][i];
            report.max_rel_error = report.max_rel_error.max(rel_error(a, numeric));
            report.checked += 1;
        }
    }
    report
}

/// Smooth random blob images, one list of frames per view.
pub fn random_sequence(
    views: usize,
    frames: usize,
    h: usize,
    w: usize,
    seed_value: u64,
) -> SequenceInput<f64> {
    let mut rng = seed::rng(seed_value);
    SequenceInput {
        views: (0..views)
            .map(|_| {
                (0..frames)
                    .map(|_| {
                        let data = (0..h * w).map(|_| unit_f64(&mut rng)).collect();
                        Tensor::from_vec(&[1, h, w], data).unwrap()
                    })
                    .collect()
            })
            .collect(),
    }
}

pub fn micro_arch(n_classes: usize) -> Architecture {
    use lidargait::encoder::ConvSpec;
    use lidargait::projection::ProjectionView;
    Architecture {
        conv: vec![ConvSpec {
            out_channels: 4,
            pool: false,
        }],
        parts: 2,
        embed_dim: 3,
        ..Architecture::standard(vec![ProjectionView::RangeView], n_classes)
    }
}

/// Initialized parameters with random nonzero biases, so that few
/// pre-activations sit exactly on a ReLU kink.
pub fn check_params(arch: &Architecture, seed_value: u64) -> EncoderParams<f64> {
    let mut params = EncoderParams::<f64>::init(arch, seed_value).unwrap();
    let mut rng = seed::rng(seed_value ^ 0xb1a5);
    for branch in &mut params.branches {
        for layer in branch.iter_mut() {
            for b in layer.bias.iter_mut() {
                *b = 0.2 * unit_f64(&mut rng) - 0.05;
            }
        }
    }
    params
}
