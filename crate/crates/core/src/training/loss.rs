//! Batch-all triplet loss, softmax cross-entropy and their gradients.

use crate::encoder::Real;

/// Loss value with the gradient for every sample's input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput<T> {
    pub value: T,
    pub grads: Vec<Vec<T>>,
}

/// Triplet loss details alongside [`LossOutput`].
#[derive(Debug, Clone, PartialEq)]
pub struct TripletOutput<T> {
    pub loss: LossOutput<T>,
    /// Hinge terms above zero, summed over parts.
    pub active: usize,
    /// Anchor/positive/negative triples per part.
    pub triples: usize,
}

fn euclid<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x - *y) * (*x - *y))
        .sum::<T>()
        .sqrt()
}

/// Sum that is exact for `n` equal powers-of-two multiples, e.g. four equal
/// part losses.
fn pairwise_sum<T: Real>(v: &[T]) -> T {
    match v.len() {
        0 => T::zero(),
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// Batch-all triplet loss averaged over the nonzero hinge terms.
///
/// Each embedding is `parts` equal strips. For strip `s`, every triple
/// `(a, p, n)` with `label[p] = label[a]`, `p ≠ a`, `label[n] ≠ label[a]`
/// contributes `max(0, d(a,p) − d(a,n) + margin)`. A strip's loss is the mean
/// of its positive terms (0 if none); the total is the mean over strips.
pub fn triplet_loss_bap<T: Real>(
    embeddings: &[Vec<T>],
    labels: &[usize],
    parts: usize,
    margin: T,
) -> TripletOutput<T> {
    let n = embeddings.len();
    assert_eq!(labels.len(), n, "one label per embedding");
    let dim = embeddings.first().map_or(0, Vec::len);
    assert!(
        parts > 0 && dim.is_multiple_of(parts),
        "embedding does not split into parts"
    );
    let width = dim / parts;
    let mut grads = vec![vec![T::zero(); dim]; n];
    let mut part_losses = Vec::with_capacity(parts);
    let mut active_total = 0;
    let mut triples = 0;
    for s in 0..parts {
        let seg = |i: usize| &embeddings[i][s * width..(s + 1) * width];
        let mut dist = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = euclid(seg(i), seg(j));
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        // Net count of (i, j) distances entering the active hinge sum, +1 for
        // anchor-positive and −1 for anchor-negative.
        let mut coeff = vec![0i64; n * n];
        let mut active = 0usize;
        let mut excess = T::zero();
        triples = 0;
        for a in 0..n {
            for p in 0..n {
                if p == a || labels[p] != labels[a] {
                    continue;
                }
                for q in 0..n {
                    if labels[q] == labels[a] {
                        continue;
                    }
                    triples += 1;
                    let diff = dist[a * n + p] - dist[a * n + q];
                    if diff + margin > T::zero() {
                        active += 1;
                        excess += diff;
                        coeff[a * n + p] += 1;
                        coeff[a * n + q] -= 1;
                    }
                }
            }
        }
        if active == 0 {
            part_losses.push(T::zero());
            continue;
        }
        active_total += active;
        let inv = T::from_f64(1.0 / active as f64);
        part_losses.push(margin + excess * inv);
        let scale = inv / T::from_f64(parts as f64);
        for i in 0..n {
            for j in 0..n {
                let c = coeff[i * n + j];
                let d = dist[i * n + j];
                if c == 0 || d == T::zero() {
                    continue;
                }
                let f = T::from_f64(c as f64) * scale / d;
                let (xi, xj) = (seg(i), seg(j));
                for k in 0..width {
                    let g = f * (xi[k] - xj[k]);
                    grads[i][s * width + k] += g;
                    grads[j][s * width + k] -= g;
                }
            }
        }
    }
    if triples == 0 {
        log::warn!("triplet loss: batch has no valid anchor/positive/negative triple");
    }
    TripletOutput {
        loss: LossOutput {
            value: pairwise_sum(&part_losses) / T::from_f64(parts as f64),
            grads,
        },
        active: active_total,
        triples,
    }
}

/// Softmax cross-entropy per strip and sample, averaged over both.
pub fn cross_entropy_loss<T: Real>(
    logits: &[Vec<T>],
    labels: &[usize],
    parts: usize,
) -> LossOutput<T> {
    let n = logits.len();
    assert_eq!(labels.len(), n, "one label per sample");
    let dim = logits.first().map_or(0, Vec::len);
    assert!(
        parts > 0 && dim.is_multiple_of(parts),
        "logits do not split into parts"
    );
    let classes = dim / parts;
    assert!(classes >= 2, "cross-entropy needs at least two classes");
    let scale = T::from_f64(1.0 / (n * parts) as f64);
    let mut terms = Vec::with_capacity(n * parts);
    let mut grads = vec![vec![T::zero(); dim]; n];
    for (i, (z_all, &y)) in logits.iter().zip(labels).enumerate() {
        assert!(y < classes, "label out of range");
        for s in 0..parts {
            let z = &z_all[s * classes..(s + 1) * classes];
            let zmax = z.iter().copied().fold(T::neg_infinity(), T::max);
            let sum: T = z.iter().map(|&v| (v - zmax).exp()).sum();
            let lse = zmax + sum.ln();
            terms.push(lse - z[y]);
            let g = &mut grads[i][s * classes..(s + 1) * classes];
            for (c, gv) in g.iter_mut().enumerate() {
                let p = (z[c] - lse).exp();
                *gv = (p - if c == y { T::one() } else { T::zero() }) * scale;
            }
        }
    }
    LossOutput {
        value: terms.into_iter().sum::<T>() * scale,
        grads,
    }
}

/// `α·tri + β·ce`.
pub fn combined_loss<T: Real>(tri: T, ce: T, alpha: T, beta: T) -> T {
    alpha * tri + beta * ce
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_embeddings_cost_the_margin() {
        let e = vec![vec![0.3f64; 8]; 6];
        let out = triplet_loss_bap(&e, &[0, 0, 1, 1, 2, 2], 4, 0.2);
        assert_eq!(out.loss.value, 0.2);
        assert!(out.loss.grads.iter().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn separated_pairs_cost_nothing() {
        let e: Vec<Vec<f64>> = [0.0, 0.1, 1.0, 1.1].iter().map(|&v| vec![v]).collect();
        let out = triplet_loss_bap(&e, &[0, 0, 1, 1], 1, 0.2);
        assert_eq!(out.triples, 8);
        assert_eq!(out.active, 0);
        assert_eq!(out.loss.value, 0.0);
    }

    #[test]
    fn no_triples_without_negatives() {
        let e = vec![vec![1.0f64], vec![2.0]];
        let out = triplet_loss_bap(&e, &[3, 3], 1, 0.2);
        assert_eq!(out.triples, 0);
        assert_eq!(out.loss.value, 0.0);
    }

    #[test]
    fn cross_entropy_fixtures() {
        let out = cross_entropy_loss(&[vec![0.0f64; 4]], &[2], 1);
        assert!((out.value - 4f64.ln()).abs() < 1e-12);
        let mut z = vec![0.0f64; 4];
        z[1] = 50.0;
        assert!(cross_entropy_loss(&[z], &[1], 1).value < 1e-20);
        let out = cross_entropy_loss(&[vec![1.0f64, 2.0]], &[1], 1);
        assert!((out.value - (1.0 + (-1f64).exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn combined_fixtures() {
        assert!((combined_loss(0.5f64, 1.0, 1.0, 0.1) - 0.6).abs() < 1e-15);
        assert_eq!(combined_loss(0.7f64, 3.0, 1.0, 0.0), 0.7);
        assert_eq!(combined_loss(0.0f64, 0.0, 1.0, 0.1), 0.0);
    }

    fn numeric_grad(f: impl Fn(&[Vec<f64>]) -> f64, x: &[Vec<f64>], i: usize, k: usize) -> f64 {
        let h = 1e-6;
        let mut xp = x.to_vec();
        xp[i][k] += h;
        let mut xm = x.to_vec();
        xm[i][k] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    }

    proptest! {
        #[test]
        fn triplet_gradient_matches_differences(
            vals in proptest::collection::vec(-1.0f64..1.0, 24),
        ) {
            let x: Vec<Vec<f64>> = vals.chunks(4).map(<[f64]>::to_vec).collect();
            let labels = [0, 0, 1, 1, 2, 2];
            let f = |e: &[Vec<f64>]| triplet_loss_bap(e, &labels, 2, 0.2).loss.value;
            let out = triplet_loss_bap(&x, &labels, 2, 0.2);
            for i in 0..6 {
                for k in 0..4 {
                    let a = out.loss.grads[i][k];
                    let n = numeric_grad(f, &x, i, k);
                    prop_assert!((a - n).abs() < 1e-4 * (1.0 + a.abs()), "{a} vs {n}");
                }
            }
        }

        #[test]
        fn losses_ignore_sample_order(
            vals in proptest::collection::vec(-1.0f64..1.0, 24),
            rot in 0usize..6,
        ) {
            let x: Vec<Vec<f64>> = vals.chunks(4).map(<[f64]>::to_vec).collect();
            let labels = vec![0, 0, 1, 1, 1, 0];
            let mut xr = x.clone();
            xr.rotate_left(rot);
            let mut lr = labels.clone();
            lr.rotate_left(rot);
            let a = triplet_loss_bap(&x, &labels, 2, 0.2).loss.value;
            let b = triplet_loss_bap(&xr, &lr, 2, 0.2).loss.value;
            prop_assert!((a - b).abs() < 1e-12);
            let a = cross_entropy_loss(&x, &labels, 2).value;
            let b = cross_entropy_loss(&xr, &lr, 2).value;
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn cross_entropy_gradient_matches_differences(
            vals in proptest::collection::vec(-3.0f64..3.0, 12),
        ) {
            let x: Vec<Vec<f64>> = vals.chunks(6).map(<[f64]>::to_vec).collect();
            let labels = [1, 2];
            let f = |z: &[Vec<f64>]| cross_entropy_loss(z, &labels, 2).value;
            let out = cross_entropy_loss(&x, &labels, 2);
            for i in 0..2 {
                for k in 0..6 {
                    let n = numeric_grad(f, &x, i, k);
                    prop_assert!((out.grads[i][k] - n).abs() < 1e-8);
                }
            }
        }
    }
}
