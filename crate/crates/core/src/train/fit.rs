use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::backward::backward;
use super::loss::bce_loss;
use super::schedule::PlateauScheduler;
use crate::matrix::Matrix;
use crate::model::{save_weights, ModelConfig, NetworkParams, WeightStore};
use crate::{Result, SadError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub weight_decay: f64,
    pub plateau_patience_epochs: usize,
    pub lr_halving_factor: f64,
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub epoch_train_pairs: usize,
    pub epoch_val_pairs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            initial_lr: 1e-3,
            weight_decay: 1e-4,
            plateau_patience_epochs: 20,
            lr_halving_factor: 0.5,
            early_stop_patience: 20,
            max_epochs: 200,
            batch_size: 8,
            seed: 0,
            epoch_train_pairs: 512,
            epoch_val_pairs: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SadError::InvalidConfig(m.to_string()));
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad("initial_lr must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if !(self.lr_halving_factor > 0.0 && self.lr_halving_factor < 1.0) {
            return bad("lr_halving_factor must lie in (0, 1)");
        }
        if self.plateau_patience_epochs == 0 || self.early_stop_patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.epoch_train_pairs == 0 || self.epoch_val_pairs == 0 {
            return bad("epoch, batch and pair counts must be at least 1");
        }
        Ok(())
    }
}

/// One (features, labels) pair. Features are frames × mel bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Matrix,
    pub labels: Vec<f64>,
}

/// Source of training pairs. Implementations must be pure functions of their
/// arguments so that parallel generation stays reproducible.
pub trait TrainingData: Sync {
    fn train_example(&self, epoch: usize, index: usize) -> Result<Example>;
    fn val_example(&self, index: usize) -> Result<Example>;
}

/// Fixed pool of examples, cycled in order.
#[derive(Debug, Clone)]
pub struct InMemoryData {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
}

impl TrainingData for InMemoryData {
    fn train_example(&self, _epoch: usize, index: usize) -> Result<Example> {
        self.train
            .get(index % self.train.len().max(1))
            .cloned()
            .ok_or_else(|| SadError::InvalidInput("empty training pool".into()))
    }

    fn val_example(&self, index: usize) -> Result<Example> {
        self.val
            .get(index % self.val.len().max(1))
            .cloned()
            .ok_or_else(|| SadError::InvalidInput("empty validation pool".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    /// Generate and differentiate samples on one thread.
    pub strict_deterministic: bool,
    /// NDJSON epoch log.
    pub log_path: Option<PathBuf>,
    /// Directory receiving a checkpoint at every new best epoch.
    pub checkpoint_dir: Option<PathBuf>,
    pub feature_config_hash: String,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: NetworkParams,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub log: Vec<EpochRecord>,
    pub stopped_early: bool,
}

impl FitOutcome {
    pub fn weight_store(&self, feature_config_hash: &str) -> WeightStore {
        WeightStore::from_params(&self.params, feature_config_hash)
    }
}

pub fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join(format!("checkpoint_epoch{epoch:04}.srw"))
}

/// Initialise weights from `cfg.seed` and train.
pub fn fit(model: &ModelConfig, data: &dyn TrainingData, cfg: &TrainConfig, opts: &FitOptions) -> Result<FitOutcome> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = NetworkParams::init_random(model, &mut rng);
    fit_from(params, data, cfg, opts)
}

fn map_indices<T: Send>(
    indices: std::ops::Range<usize>,
    sequential: bool,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    if sequential {
        indices.map(f).collect()
    } else {
        indices.into_par_iter().map(f).collect()
    }
}

/// Mean loss and mean gradient over a batch. Per-sample results are reduced
/// in index order, so the sum does not depend on the thread count.
pub fn batch_gradient(
    params: &NetworkParams,
    examples: &[Example],
    sequential: bool,
) -> Result<(f64, NetworkParams)> {
    let per = map_indices(0..examples.len(), sequential, |i| {
        backward(params, &examples[i].features, &examples[i].labels)
    })?;
    let n = per.len() as f64;
    let mut total = NetworkParams::zeros(&params.config);
    let mut loss = 0.0;
    for (l, g) in &per {
        loss += l;
        for (acc, src) in total.slices_mut().into_iter().zip(g.slices()) {
            for (a, s) in acc.iter_mut().zip(src) {
                *a += s;
            }
        }
    }
    for s in total.slices_mut() {
        for a in s.iter_mut() {
            *a /= n;
        }
    }
    Ok((loss / n, total))
}

pub fn evaluate_loss(params: &NetworkParams, examples: &[Example], sequential: bool) -> Result<f64> {
    let losses = map_indices(0..examples.len(), sequential, |i| {
        let p = params.forward(&examples[i].features)?;
        bce_loss(&p, &examples[i].labels)
    })?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Train from the given starting weights.
pub fn fit_from(
    mut params: NetworkParams,
    data: &dyn TrainingData,
    cfg: &TrainConfig,
    opts: &FitOptions,
) -> Result<FitOutcome> {
    cfg.validate()?;
    let sequential = opts.strict_deterministic;
    let mut log_file = match &opts.log_path {
        Some(p) => Some(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => None,
    };
    if let Some(dir) = &opts.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    let val = map_indices(0..cfg.epoch_val_pairs, sequential, |i| data.val_example(i))?;
    let mut adam = AdamState::for_params(&params);
    let mut sched = PlateauScheduler::new(
        cfg.initial_lr,
        cfg.lr_halving_factor,
        cfg.plateau_patience_epochs,
        cfg.early_stop_patience,
    );
    let start = Instant::now();
    let mut best = params.clone();
    let mut best_epoch = 0;
    let mut log = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let lr = sched.lr();
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut next = 0;
        while next < cfg.epoch_train_pairs {
            let end = (next + cfg.batch_size).min(cfg.epoch_train_pairs);
            let batch = map_indices(next..end, sequential, |i| data.train_example(epoch, i))?;
            let (loss, grads) = batch_gradient(&params, &batch, sequential)?;
            if !loss.is_finite() || grads.flatten().iter().any(|g| !g.is_finite()) {
                return Err(SadError::TrainingDiverged { epoch, detail: format!("non-finite training loss {loss}") });
            }
            adam_step(&mut params, &grads, &mut adam, lr, cfg.weight_decay)?;
            loss_sum += loss;
            batches += 1;
            next = end;
        }
        let train_loss = loss_sum / batches as f64;
        let val_loss = evaluate_loss(&params, &val, sequential)?;
        if !val_loss.is_finite() {
            return Err(SadError::TrainingDiverged { epoch, detail: format!("non-finite validation loss {val_loss}") });
        }
        let decision = sched.observe(val_loss);
        let rec = EpochRecord { epoch, train_loss, val_loss, lr, elapsed_s: start.elapsed().as_secs_f64() };
        log::info!("epoch {epoch}: train {train_loss:.5} val {val_loss:.5} lr {lr:.2e}");
        if let Some(f) = log_file.as_mut() {
            writeln!(f, "{}", serde_json::to_string(&rec)?)?;
            f.flush()?;
        }
        log.push(rec);
        if decision.improved {
            best = params.clone();
            best_epoch = epoch;
            if let Some(dir) = &opts.checkpoint_dir {
                save_weights(
                    &WeightStore::from_params(&best, &opts.feature_config_hash),
                    checkpoint_path(dir, epoch),
                )?;
            }
        }
        if decision.stop {
            stopped_early = true;
            break;
        }
    }
    Ok(FitOutcome { params: best, best_epoch, best_val_loss: sched.best(), log, stopped_early })
}
