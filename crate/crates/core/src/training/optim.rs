use crate::encoder::{EncoderParams, Real};

/// `lr0 / 10^m` where `m` counts the milestones already reached.
pub fn learning_rate(lr0: f64, milestones: &[usize], iteration: usize) -> f64 {
    let passed = milestones.iter().filter(|&&m| m <= iteration).count();
    lr0 / 10f64.powi(passed as i32)
}

/// SGD with momentum and L2 weight decay:
/// `v ← μ·v + g + λ·w`, `w ← w − lr·v`.
pub fn sgd_step<T: Real>(
    params: &mut EncoderParams<T>,
    velocity: &mut EncoderParams<T>,
    grads: &EncoderParams<T>,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) {
    let (lr, mu, wd) = (
        T::from_f64(lr),
        T::from_f64(momentum),
        T::from_f64(weight_decay),
    );
    for ((w, v), g) in params
        .blobs_mut()
        .into_iter()
        .zip(velocity.blobs_mut())
        .zip(grads.blobs())
    {
        for ((wi, vi), gi) in w.iter_mut().zip(v.iter_mut()).zip(g) {
            *vi = mu * *vi + *gi + wd * *wi;
            *wi -= lr * *vi;
        }
    }
}
