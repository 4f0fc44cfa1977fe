//! Minibatch training with Adam, best-epoch selection, and the
//! hyperparameter grid search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::data::{StandardizedRecording, WindowDataset};
use crate::error::{Error, Result};
use crate::model::{param_count, Mode, ModelWeights, TcnConfig, TcnModel};
use crate::optim::{adam_step, AdamState};
use crate::rng::{tag_of, RngStream};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.0005, dropout: 0.2, batch_size: 32, epochs: 100, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TcnModel,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub history: Vec<EpochRecord>,
}

impl TrainOutcome {
    pub fn weights(&self) -> &ModelWeights {
        self.model.weights()
    }
}

fn check_dataset(name: &str, ds: &WindowDataset, config: &TcnConfig) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::Data(format!("{} dataset is empty", name)));
    }
    if ds.window_len() != config.receptive_field() {
        return Err(Error::Data(format!(
            "{} windows have length {}, model receptive field is {}",
            name,
            ds.window_len(),
            config.receptive_field()
        )));
    }
    if ds.n_features() != config.input_features {
        return Err(Error::Data(format!(
            "{} windows have {} features, model expects {}",
            name,
            ds.n_features(),
            config.input_features
        )));
    }
    Ok(())
}

/// Mean squared error (standardized units) over every window of `ds`. Each
/// recording is run through the network once and the predictions at the
/// window end steps are read off, which equals predicting each window alone.
pub fn dataset_mse(model: &TcnModel, ds: &WindowDataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::Data("cannot score an empty dataset".into()));
    }
    let mut sum = 0.0;
    let mut current: Option<(usize, Vec<f64>)> = None;
    for &(r, end) in ds.entries() {
        if current.as_ref().is_none_or(|(cr, _)| *cr != r) {
            current = Some((r, recording_predictions(model, &ds.recordings()[r])?));
        }
        let preds = &current.as_ref().expect("set above").1;
        let e = preds[end] - ds.recordings()[r].target[end];
        sum += e * e;
    }
    let mse = sum / ds.len() as f64;
    if !mse.is_finite() {
        return Err(Error::NonFinite("validation loss"));
    }
    Ok(mse)
}

/// Standardized prediction for every step of a recording (steps before
/// RF − 1 see zero padding).
pub fn recording_predictions(model: &TcnModel, rec: &StandardizedRecording) -> Result<Vec<f64>> {
    let x = Tensor::new(&[rec.len(), rec.n_features], rec.features.clone())?;
    model.predict_sequence(&x)
}

pub fn train(
    config: &TcnConfig,
    tc: &TrainConfig,
    train_ds: &WindowDataset,
    val_ds: &WindowDataset,
) -> Result<TrainOutcome> {
    train_with_progress(config, tc, train_ds, val_ds, |_| {})
}

/// Training loop. Every epoch visits all training windows once in a seeded
/// random order; the final partial minibatch is kept. Train MSE is the mean of
/// the minibatch losses, validation MSE is taken over all validation windows.
/// The returned model carries the weights of the epoch with the lowest
/// validation MSE (earliest on ties).
pub fn train_with_progress(
    config: &TcnConfig,
    tc: &TrainConfig,
    train_ds: &WindowDataset,
    val_ds: &WindowDataset,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    tc.validate()?;
    let config = config.with_dropout(tc.dropout);
    config.validate()?;
    check_dataset("training", train_ds, &config)?;
    check_dataset("validation", val_ds, &config)?;

    let root = RngStream::new(tc.seed);
    let mut model = TcnModel::build(config, &mut root.derive(tag_of("init")))?;
    let mut adam = AdamState::with_lr(model.weights().len(), tc.learning_rate);
    let mut best: Option<(usize, f64, ModelWeights)> = None;
    let mut history = Vec::with_capacity(tc.epochs);
    let mut order: Vec<usize> = Vec::with_capacity(train_ds.len());

    for epoch in 1..=tc.epochs {
        order.clear();
        order.extend(0..train_ds.len());
        root.derive_path(&[tag_of("shuffle"), epoch as u64]).shuffle(&mut order);
        let mut dropout_rng = root.derive_path(&[tag_of("dropout"), epoch as u64]);

        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(tc.batch_size) {
            let (x, y) = train_ds.batch(chunk)?;
            let mut tape = Tape::new();
            let params = model.weights().register(&mut tape);
            let xv = tape.constant(x);
            let yv = tape.constant(y);
            let pred = model.forward(&mut tape, &params, xv, &mut Mode::Train(&mut dropout_rng))?;
            let loss = tape.mse(pred, yv)?;
            let loss_value = tape.value(loss).data()[0];
            if !loss_value.is_finite() {
                return Err(Error::NonFinite("training loss"));
            }
            let grads = tape.backward(loss)?;
            let flat = model.weights().collect_grads(&grads, &params);
            adam_step(model.weights_mut().values_mut(), &flat, &mut adam)?;
            loss_sum += loss_value;
            batches += 1;
        }

        let record = EpochRecord { epoch, train_mse: loss_sum / batches as f64, val_mse: dataset_mse(&model, val_ds)? };
        if best.as_ref().is_none_or(|(_, b, _)| record.val_mse < *b) {
            best = Some((epoch, record.val_mse, model.weights().clone()));
        }
        on_epoch(&record);
        history.push(record);
    }

    let (best_epoch, best_val_mse, weights) = best.expect("at least one epoch");
    let model = TcnModel::from_values(config, weights.values().to_vec())?;
    Ok(TrainOutcome { model, best_epoch, best_val_mse, history })
}

/// Standardized recordings used by the grid search; windows of length RF are
/// cut per configuration. A stride above 1 keeps every stride-th window.
#[derive(Debug, Clone)]
pub struct GridData {
    pub train: Vec<StandardizedRecording>,
    pub val: Vec<StandardizedRecording>,
    pub train_stride: usize,
    pub val_stride: usize,
}

impl GridData {
    pub fn new(train: Vec<StandardizedRecording>, val: Vec<StandardizedRecording>) -> Self {
        Self { train, val, train_stride: 1, val_stride: 1 }
    }

    pub fn datasets(&self, window_len: usize) -> Result<(WindowDataset, WindowDataset)> {
        Ok((
            WindowDataset::new(self.train.clone(), window_len)?.strided(self.train_stride)?,
            WindowDataset::new(self.val.clone(), window_len)?.strided(self.val_stride)?,
        ))
    }
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub config: TcnConfig,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub param_count: usize,
    pub receptive_field: usize,
    pub history: Vec<EpochRecord>,
    pub model: TcnModel,
}

/// Seed of one grid configuration; depends only on the global seed and the
/// (filters, kernel, dilations) triple.
pub fn config_seed(global_seed: u64, config: &TcnConfig) -> u64 {
    RngStream::new(global_seed)
        .derive_path(&[
            tag_of("grid"),
            config.num_filters as u64,
            config.kernel_size as u64,
            config.dilation_depth as u64,
        ])
        .seed()
}

pub fn train_config(config: &TcnConfig, tc: &TrainConfig, data: &GridData) -> Result<GridResult> {
    let (train_ds, val_ds) = data.datasets(config.receptive_field())?;
    let tc = TrainConfig { seed: config_seed(tc.seed, config), ..*tc };
    let out = train(config, &tc, &train_ds, &val_ds)?;
    Ok(GridResult {
        config: *out.model.config(),
        best_epoch: out.best_epoch,
        best_val_mse: out.best_val_mse,
        param_count: param_count(config),
        receptive_field: config.receptive_field(),
        history: out.history,
        model: out.model,
    })
}

/// Trains every configuration on a pool of `jobs` threads and ranks results by
/// best validation MSE (grid order breaks ties). Output does not depend on
/// `jobs`.
pub fn grid_search(grid: &[TcnConfig], tc: &TrainConfig, data: &GridData, jobs: usize) -> Result<Vec<GridResult>> {
    grid_search_with_progress(grid, tc, data, jobs, |_| {})
}

pub fn grid_search_with_progress(
    grid: &[TcnConfig],
    tc: &TrainConfig,
    data: &GridData,
    jobs: usize,
    on_result: impl Fn(&GridResult) + Sync,
) -> Result<Vec<GridResult>> {
    if grid.is_empty() {
        return Err(Error::Config("grid is empty".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {}", e)))?;
    let mut results = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, c)| {
                let r = train_config(c, tc, data)?;
                on_result(&r);
                Ok((i, r))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    results.sort_by(|(ia, a), (ib, b)| a.best_val_mse.total_cmp(&b.best_val_mse).then(ia.cmp(ib)));
    Ok(results.into_iter().map(|(_, r)| r).collect())
}
