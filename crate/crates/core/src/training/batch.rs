use rand::seq::index::sample;
use rand::Rng;

use crate::{Error, Result};

/// Which sequences belong to which identity, and how long each one is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePool {
    /// Sequence indices per identity label.
    pub by_identity: Vec<Vec<usize>>,
    /// Frame count per sequence index.
    pub frame_counts: Vec<usize>,
}

impl SamplePool {
    pub fn new(labels: &[usize], frame_counts: Vec<usize>) -> Self {
        let n_ids = labels.iter().max().map_or(0, |m| m + 1);
        let mut by_identity = vec![Vec::new(); n_ids];
        for (i, &l) in labels.iter().enumerate() {
            by_identity[l].push(i);
        }
        by_identity.retain(|v| !v.is_empty());
        Self {
            by_identity,
            frame_counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchItem {
    pub sequence: usize,
    /// Position of the identity in [`SamplePool::by_identity`].
    pub identity: usize,
    pub frames: Vec<usize>,
}

/// `p` identities × `k` sequences × `l` frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub items: Vec<BatchItem>,
}

/// Draws `p` distinct identities, `k` sequences of each and `l` frames of
/// each sequence. Sequences and frames are drawn without replacement when
/// enough exist and with replacement otherwise.
pub fn sample_batch<R: Rng>(
    pool: &SamplePool,
    p: usize,
    k: usize,
    l: usize,
    rng: &mut R,
) -> Result<Batch> {
    if pool.by_identity.len() < p {
        return Err(Error::InvalidArgument(format!(
            "batch needs {p} identities, dataset has {}",
            pool.by_identity.len()
        )));
    }
    let draw = |n: usize, m: usize, rng: &mut R| -> Vec<usize> {
        if n >= m {
            sample(rng, n, m).into_vec()
        } else {
            (0..m).map(|_| rng.gen_range(0..n)).collect()
        }
    };
    let mut items = Vec::with_capacity(p * k);
    for identity in sample(rng, pool.by_identity.len(), p).into_vec() {
        let seqs = &pool.by_identity[identity];
        for j in draw(seqs.len(), k, rng) {
            let sequence = seqs[j];
            let len = pool.frame_counts[sequence];
            if len == 0 {
                return Err(Error::InvalidArgument(format!(
                    "sequence {sequence} has no frames"
                )));
            }
            let frames = draw(len, l, rng);
            items.push(BatchItem {
                sequence,
                identity,
                frames,
            });
        }
    }
    Ok(Batch { items })
}
