//! One-shot training: dataset assembly, BCE + Adam, balanced batching,
//! validation and early stopping.

mod adam;
mod config;
mod dataset;
mod loss;

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use adam::{adam_step, TrainState, BETA1, BETA2, EPSILON};
pub use config::{Balance, TrainConfig};
pub use dataset::{build_dataset, validation_points, Dataset, Sample};
pub use loss::{batch_bce, bce_loss, PROB_CLAMP};

use crate::cloud::{extract_patch, PointCloud, SpatialIndex};
use crate::error::{Error, Result};
use crate::eval::{point_scores, PointScores};
use crate::net::{forward, forward_traced, Gradients, Hyper, ModelParameters};

/// Samples per gradient work unit. Chunk sums are reduced in chunk order,
/// so the result does not depend on the number of threads.
pub const GRAD_CHUNK: usize = 16;

/// Predictions strictly above this are edges.
pub const EDGE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val: PointScores,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

impl TrainLog {
    pub const CSV_HEADER: &'static str = "epoch,mean_loss,val_precision,val_recall,val_fscore,seconds";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.3}",
                r.epoch, r.mean_loss, r.val.precision, r.val.recall, r.val.fscore, r.seconds
            );
        }
        out
    }

    pub fn best_fscore(&self) -> Option<f64> {
        let best = self.best_epoch?;
        self.epochs.iter().find(|r| r.epoch == best).map(|r| r.val.fscore)
    }
}

/// Mean loss and gradient over `batch`, reduced deterministically.
pub fn batch_gradient(params: &ModelParameters, samples: &[Sample], batch: &[usize]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let partials = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grads = params.zero_gradients();
            let mut loss = 0.0;
            for &i in chunk {
                let s = &samples[i];
                let trace = forward_traced(&s.patch, params)?;
                let (l, de) = bce_loss(trace.output(), if s.label { 1.0 } else { 0.0 })?;
                trace.backward(params, de, &mut grads)?;
                loss += l;
            }
            Ok((loss, grads))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = partials.into_iter();
    let (mut loss, mut grads) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        loss += l;
        grads.add_assign(&g);
    }
    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    Ok((loss * inv, grads))
}

/// Draws the batches of one epoch as indices into the training samples.
pub struct BatchSampler {
    balance: Balance,
    batch_size: usize,
    all: Vec<usize>,
    edges: Vec<usize>,
    others: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(samples: &[Sample], balance: Balance, batch_size: usize, seed: u64) -> Result<Self> {
        let (edges, others): (Vec<usize>, Vec<usize>) = (0..samples.len()).partition(|&i| samples[i].label);
        if edges.is_empty() || others.is_empty() {
            return Err(Error::invalid(format!(
                "training split needs both classes (edges {}, non-edges {})",
                edges.len(),
                others.len()
            )));
        }
        let mut sampler = Self {
            balance,
            batch_size,
            all: (0..samples.len()).collect(),
            edges,
            others,
            cursor: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        if balance == Balance::BalancedBatches {
            sampler.reshuffle_majority();
        }
        Ok(sampler)
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.all.len().div_ceil(self.batch_size)
    }

    fn reshuffle_majority(&mut self) {
        let majority = if self.edges.len() >= self.others.len() { &mut self.edges } else { &mut self.others };
        majority.shuffle(&mut self.rng);
        self.cursor = 0;
    }

    /// One epoch: plain shuffled passes, or half-and-half batches where the
    /// majority class is walked without replacement and the minority class
    /// is drawn with replacement.
    pub fn epoch(&mut self) -> Vec<Vec<usize>> {
        match self.balance {
            Balance::None => {
                self.all.shuffle(&mut self.rng);
                self.all.chunks(self.batch_size).map(<[usize]>::to_vec).collect()
            }
            Balance::BalancedBatches => {
                let half = self.batch_size / 2;
                let edges_major = self.edges.len() >= self.others.len();
                (0..self.batches_per_epoch())
                    .map(|_| {
                        let mut batch = Vec::with_capacity(self.batch_size);
                        for _ in 0..half {
                            if self.cursor == self.edges.len().max(self.others.len()) {
                                self.reshuffle_majority();
                            }
                            let major = if edges_major { &self.edges } else { &self.others };
                            batch.push(major[self.cursor]);
                            self.cursor += 1;
                        }
                        let minor = if edges_major { &self.others } else { &self.edges };
                        for _ in 0..half {
                            batch.push(minor[self.rng.random_range(0..minor.len())]);
                        }
                        batch
                    })
                    .collect()
            }
        }
    }
}

/// Validation predictions for every sample.
pub fn score_samples(params: &ModelParameters, samples: &[Sample]) -> Result<PointScores> {
    let probs = samples
        .par_iter()
        .map(|s| forward(&s.patch, params))
        .collect::<Result<Vec<f64>>>()?;
    let pred: Vec<bool> = probs.iter().map(|&e| e > EDGE_THRESHOLD).collect();
    let truth: Vec<bool> = samples.iter().map(|s| s.label).collect();
    point_scores(&pred, &truth)
}

/// Trains from scratch on one labeled cloud; returns the best-validation
/// parameters and the per-epoch log.
pub fn train(cloud: &PointCloud, cfg: &TrainConfig) -> Result<(ModelParameters, TrainLog)> {
    let dataset = build_dataset(cloud, cfg)?;
    train_on(&dataset, cfg, ModelParameters::init(Hyper::new(cfg.k)?, cfg.seed))
}

/// Training loop over a prepared dataset, starting from `init`.
pub fn train_on(dataset: &Dataset, cfg: &TrainConfig, init: ModelParameters) -> Result<(ModelParameters, TrainLog)> {
    cfg.validate()?;
    init.ensure_k(cfg.k)?;
    let mut sampler = BatchSampler::new(&dataset.train, cfg.balance, cfg.batch_size, cfg.seed.wrapping_add(1))?;
    log::info!(
        "training on {} patches ({} edges), validating on {}",
        dataset.train.len(),
        dataset.train_edge_count(),
        dataset.val.len()
    );
    let mut state = TrainState::new(init);
    let mut best = state.params.clone();
    let mut log = TrainLog::default();
    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let mut loss_sum = 0.0;
        let batches = sampler.epoch();
        for batch in &batches {
            let (loss, grads) = batch_gradient(&state.params, &dataset.train, batch)?;
            adam_step(&mut state, &grads, cfg.lr)?;
            loss_sum += loss;
        }
        state.params.check_finite()?;
        let val = score_samples(&state.params, &dataset.val)?;
        let record = EpochRecord {
            epoch,
            mean_loss: loss_sum / batches.len() as f64,
            val,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: loss {:.5} val P {:.4} R {:.4} F {:.4} ({:.1}s)",
            record.mean_loss,
            val.precision,
            val.recall,
            val.fscore,
            record.seconds
        );
        log.epochs.push(record);
        if val.fscore > state.best_fscore {
            state.best_fscore = val.fscore;
            state.epochs_since_improvement = 0;
            best = state.params.clone();
            log.best_epoch = Some(epoch);
        } else {
            state.epochs_since_improvement += 1;
            if state.epochs_since_improvement >= cfg.patience {
                log::info!("no validation improvement for {} epochs, stopping", cfg.patience);
                break;
            }
        }
    }
    Ok((best, log))
}

/// Per-point edge probabilities, computed `batch` patches at a time.
pub fn predict_probabilities(cloud: &PointCloud, params: &ModelParameters, batch: usize) -> Result<Vec<f64>> {
    let k = params.k();
    if batch == 0 {
        return Err(Error::invalid("batch must be positive"));
    }
    if cloud.len() < 2 * k + 1 {
        return Err(Error::invalid(format!("need at least {} points for k={k}, got {}", 2 * k + 1, cloud.len())));
    }
    let index = SpatialIndex::build(cloud)?;
    let mut probs = Vec::with_capacity(cloud.len());
    let mut start = 0;
    while start < cloud.len() {
        let end = (start + batch).min(cloud.len());
        let chunk = (start..end)
            .into_par_iter()
            .map(|i| extract_patch(cloud, &index, i, k).and_then(|p| forward(&p, params)))
            .collect::<Result<Vec<f64>>>()?;
        probs.extend(chunk);
        start = end;
    }
    Ok(probs)
}

/// Fills predictions and thresholded labels (`e > 0.5` is an edge).
pub fn predict(cloud: &PointCloud, params: &ModelParameters, batch: usize) -> Result<PointCloud> {
    let probs = predict_probabilities(cloud, params, batch)?;
    let labels = probs.iter().map(|&e| e > EDGE_THRESHOLD).collect();
    cloud.without_annotations().with_labels(labels)?.with_predictions(probs)
}
