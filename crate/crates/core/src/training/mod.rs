//! Metric-learning training loop: batch sampling, combined triplet and
//! cross-entropy loss, SGD with a step schedule and resumable checkpoints.

mod batch;
mod loss;
mod optim;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use batch::{sample_batch, Batch, BatchItem, SamplePool};
pub use loss::{combined_loss, cross_entropy_loss, triplet_loss_bap, LossOutput, TripletOutput};
pub use optim::{learning_rate, sgd_step};

use crate::encoder::{compute_gradients, forward_batch, Architecture, EncoderParams};
use crate::pipeline::SequenceImages;
use crate::{seed, Error, Result};

const STREAM_INIT: u64 = 0x696e6974;
const STREAM_BATCH: u64 = 0x62617463;

#[derive(Debug, Clone, PartialEq)]
pub enum Milestones {
    /// Absolute iteration numbers.
    Iterations(Vec<usize>),
    /// Fractions of `total_iters`, rounded down.
    Fractions(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Paper,
    Desk,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            _ => Err(Error::InvalidArgument(format!(
                "unknown preset {s:?} (paper|desk)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub alpha: f64,
    pub beta: f64,
    pub margin: f64,
    /// Identities per batch.
    pub p: usize,
    /// Sequences per identity.
    pub k: usize,
    /// Frames per sequence.
    pub l: usize,
    pub lr0: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub milestones: Milestones,
    pub total_iters: usize,
    pub seed: u64,
    /// Save a checkpoint every this many iterations (0 disables).
    pub checkpoint_every: usize,
}

impl TrainingConfig {
    /// Full-scale schedule: batch (8, 8, 10), lr 0.1 dropping tenfold at
    /// 20k and 30k of 40k iterations.
    pub fn paper() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.1,
            margin: 0.2,
            p: 8,
            k: 8,
            l: 10,
            lr0: 0.1,
            weight_decay: 0.0005,
            momentum: 0.9,
            milestones: Milestones::Iterations(vec![20_000, 30_000]),
            total_iters: 40_000,
            seed: 0,
            checkpoint_every: 0,
        }
    }

    /// Single-machine schedule: 2000 iterations at lr 0.01 with drops at
    /// 60% and 80%, and a smaller batch.
    pub fn desk() -> Self {
        Self {
            p: 8,
            k: 2,
            l: 2,
            lr0: 0.01,
            milestones: Milestones::Fractions(vec![0.6, 0.8]),
            total_iters: 2000,
            ..Self::paper()
        }
    }

    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Paper => Self::paper(),
            Preset::Desk => Self::desk(),
        }
    }

    pub fn milestone_iters(&self) -> Vec<usize> {
        match &self.milestones {
            Milestones::Iterations(m) => m.clone(),
            Milestones::Fractions(f) => f
                .iter()
                .map(|x| (x * self.total_iters as f64).floor() as usize)
                .collect(),
        }
    }

    pub fn learning_rate(&self, iteration: usize) -> f64 {
        learning_rate(self.lr0, &self.milestone_iters(), iteration)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidArgument(format!("training config: {why}")));
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return bad("alpha and beta must be >= 0");
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return bad("margin must be finite and > 0");
        }
        if self.p == 0 || self.k == 0 || self.p * self.k < 2 {
            return bad("p*k must be at least 2");
        }
        if self.l == 0 {
            return bad("l must be at least 1");
        }
        if !(self.lr0 > 0.0 && self.weight_decay >= 0.0 && (0.0..1.0).contains(&self.momentum)) {
            return bad("lr0 > 0, weight_decay >= 0 and momentum in [0, 1) required");
        }
        Ok(())
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("{key}: cannot parse {value:?}")))
        }
        match key {
            "alpha" => self.alpha = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "margin" => self.margin = num(key, value)?,
            "p" => self.p = num(key, value)?,
            "k" => self.k = num(key, value)?,
            "l" => self.l = num(key, value)?,
            "lr0" => self.lr0 = num(key, value)?,
            "weight_decay" => self.weight_decay = num(key, value)?,
            "momentum" => self.momentum = num(key, value)?,
            "total_iters" => self.total_iters = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            "milestones" => {
                let items: Vec<&str> = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .collect();
                self.milestones = if items.iter().all(|s| s.ends_with('%')) && !items.is_empty() {
                    Milestones::Fractions(
                        items
                            .iter()
                            .map(|s| num::<f64>(key, s.trim_end_matches('%')).map(|v| v / 100.0))
                            .collect::<Result<_>>()?,
                    )
                } else {
                    Milestones::Iterations(
                        items.iter().map(|s| num(key, s)).collect::<Result<_>>()?,
                    )
                };
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown training key {key:?}"
                )))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub iter: usize,
    pub loss_tri: f64,
    pub loss_ce: f64,
    pub loss_total: f64,
    pub lr: f64,
}

pub const LOG_HEADER: &str = "iter,loss_tri,loss_ce,loss_total,lr";

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.iter, r.loss_tri, r.loss_ce, r.loss_total, r.lr
        );
    }
    out
}

/// Parameters, optimizer velocity and the next iteration to run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: EncoderParams<f32>,
    pub velocity: EncoderParams<f32>,
    pub iteration: usize,
}

const OPT_MAGIC: &[u8; 4] = b"OPT1";

impl TrainState {
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        let params = EncoderParams::init(arch, seed::derive(seed, &[STREAM_INIT]))?;
        Ok(Self {
            velocity: params.zeros_like(),
            params,
            iteration: 0,
        })
    }

    /// Optimizer sidecar written next to a checkpoint.
    pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
        let mut name = checkpoint.as_os_str().to_os_string();
        name.push(".opt");
        PathBuf::from(name)
    }

    /// Writes the parameters as `ENC1` and the velocity plus iteration count
    /// to the `.opt` sidecar.
    pub fn save(&self, checkpoint: &Path) -> Result<()> {
        self.params.save(checkpoint)?;
        let mut side = Vec::new();
        side.extend_from_slice(OPT_MAGIC);
        side.extend_from_slice(&(self.iteration as u64).to_le_bytes());
        side.extend_from_slice(&self.velocity.to_enc1());
        let path = Self::sidecar_path(checkpoint);
        fs::write(&path, side).map_err(|e| Error::io(path, e))
    }

    pub fn load(checkpoint: &Path) -> Result<Self> {
        let params = EncoderParams::load(checkpoint)?;
        let path = Self::sidecar_path(checkpoint);
        let side = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if side.len() < 12 || &side[..4] != OPT_MAGIC {
            return Err(Error::format("OPT1", "missing magic"));
        }
        let iteration = u64::from_le_bytes(side[4..12].try_into().unwrap()) as usize;
        let velocity = EncoderParams::from_enc1(&side[12..])?;
        if velocity.arch != params.arch {
            return Err(Error::Architecture {
                expected: params.arch.to_string(),
                found: velocity.arch.to_string(),
            });
        }
        Ok(Self {
            params,
            velocity,
            iteration,
        })
    }
}

/// Class index per sequence: identities sorted by label.
pub fn class_labels(data: &[SequenceImages]) -> (Vec<String>, Vec<usize>) {
    let mut ids: Vec<String> = data.iter().map(|s| s.row.identity.clone()).collect();
    ids.sort();
    ids.dedup();
    let labels = data
        .iter()
        .map(|s| ids.binary_search(&s.row.identity).expect("identity listed"))
        .collect();
    (ids, labels)
}

/// Training data with labels and a sampling index.
pub struct Trainer<'a> {
    data: &'a [SequenceImages],
    labels: Vec<usize>,
    pool: SamplePool,
    cfg: TrainingConfig,
    milestones: Vec<usize>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        data: &'a [SequenceImages],
        arch: &Architecture,
        cfg: &TrainingConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        arch.validate()?;
        if data.is_empty() {
            return Err(Error::InvalidArgument("training set is empty".into()));
        }
        let (ids, labels) = class_labels(data);
        if ids.len() != arch.n_classes {
            return Err(Error::Architecture {
                expected: format!("{} classes", ids.len()),
                found: arch.to_string(),
            });
        }
        if data.iter().any(|s| s.views.len() != arch.views.len()) {
            return Err(Error::Shape(
                "image views do not match the architecture".into(),
            ));
        }
        let pool = SamplePool::new(
            &labels,
            data.iter().map(SequenceImages::frame_count).collect(),
        );
        Ok(Self {
            data,
            labels,
            pool,
            milestones: cfg.milestone_iters(),
            cfg: cfg.clone(),
        })
    }

    /// One optimization step at `state.iteration`.
    pub fn step(&self, state: &mut TrainState) -> Result<LogRow> {
        let cfg = &self.cfg;
        let iter = state.iteration;
        let mut rng = seed::rng(seed::derive(cfg.seed, &[STREAM_BATCH, iter as u64]));
        let batch = sample_batch(&self.pool, cfg.p, cfg.k, cfg.l, &mut rng)?;
        let inputs: Vec<_> = batch
            .items
            .iter()
            .map(|it| self.data[it.sequence].to_input(Some(&it.frames)))
            .collect();
        let labels: Vec<usize> = batch
            .items
            .iter()
            .map(|it| self.labels[it.sequence])
            .collect();
        let passes = forward_batch(&state.params, &inputs)?;
        let embeddings: Vec<Vec<f32>> = passes.iter().map(|p| p.embedding.clone()).collect();
        let logits: Vec<Vec<f32>> = passes.iter().map(|p| p.logits.clone()).collect();
        let parts = state.params.arch.parts;
        let tri = triplet_loss_bap(&embeddings, &labels, parts, cfg.margin as f32);
        let ce = cross_entropy_loss(&logits, &labels, parts);
        let (alpha, beta) = (cfg.alpha as f32, cfg.beta as f32);
        let total = combined_loss(tri.loss.value, ce.value, alpha, beta);
        if !total.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: iter });
        }
        let scale = |grads: Vec<Vec<f32>>, f: f32| -> Vec<Vec<f32>> {
            grads
                .into_iter()
                .map(|g| g.into_iter().map(|v| v * f).collect())
                .collect()
        };
        let d_emb = scale(tri.loss.grads, alpha);
        let d_log = scale(ce.grads, beta);
        let grads = compute_gradients(&state.params, &passes, &d_emb, &d_log);
        let lr = learning_rate(cfg.lr0, &self.milestones, iter);
        sgd_step(
            &mut state.params,
            &mut state.velocity,
            &grads,
            lr,
            cfg.momentum,
            cfg.weight_decay,
        );
        if !state.params.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: iter });
        }
        state.iteration += 1;
        Ok(LogRow {
            iter,
            loss_tri: tri.loss.value as f64,
            loss_ce: ce.value as f64,
            loss_total: total as f64,
            lr,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub log: Vec<LogRow>,
}

/// Runs from `resume` (or a fresh initialization) until `total_iters`.
///
/// With `checkpoint` set, the state is saved there every `checkpoint_every`
/// iterations and at the end.
pub fn train(
    data: &[SequenceImages],
    arch: &Architecture,
    cfg: &TrainingConfig,
    resume: Option<TrainState>,
    checkpoint: Option<&Path>,
) -> Result<TrainOutcome> {
    let trainer = Trainer::new(data, arch, cfg)?;
    let mut state = match resume {
        Some(s) if &s.params.arch != arch => {
            return Err(Error::Architecture {
                expected: arch.to_string(),
                found: s.params.arch.to_string(),
            })
        }
        Some(s) => s,
        None => TrainState::init(arch, cfg.seed)?,
    };
    let mut log = Vec::with_capacity(cfg.total_iters.saturating_sub(state.iteration));
    while state.iteration < cfg.total_iters {
        let row = trainer.step(&mut state)?;
        if row.iter % 100 == 0 {
            log::info!(
                "iter {} tri {:.4} ce {:.4} total {:.4} lr {}",
                row.iter,
                row.loss_tri,
                row.loss_ce,
                row.loss_total,
                row.lr
            );
        }
        log.push(row);
        if let Some(path) = checkpoint {
            if cfg.checkpoint_every > 0 && state.iteration % cfg.checkpoint_every == 0 {
                state.save(path)?;
            }
        }
    }
    if let Some(path) = checkpoint {
        state.save(path)?;
    }
    Ok(TrainOutcome { state, log })
}
