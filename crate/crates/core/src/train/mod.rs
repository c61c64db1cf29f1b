//! Training: masked losses, grouped folds, the epoch loop with early
//! stopping, checkpoints and fold ensembling.

mod checkpoint;
mod data;
mod loss;
mod splits;

pub use checkpoint::{Checkpoint, CheckpointMeta};
pub use data::{load_samples, make_targets, Sample};
pub use loss::{masked_categorical_crossentropy, masked_mse, LossOutput, EPS};
pub use splits::{fold_sizes, make_cv_splits, Fold, FoldPlan, Role};

use std::borrow::Borrow;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EventSet, View};
use crate::infer::{FramePredictions, PredictionKind};
use crate::labels::{pad_batch, Batch, Clip, LabelTrack};
use crate::models::{CellType, ModelConfig};
use crate::nn::{Adam, Network, Tensor};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

impl Task {
    pub fn of(model: &ModelConfig) -> Task {
        match model {
            ModelConfig::Classification(_) => Task::Classification,
            ModelConfig::Regression(_) => Task::Regression,
        }
    }

    pub fn prediction_kind(self) -> PredictionKind {
        match self {
            Task::Classification => PredictionKind::PhaseProbs,
            Task::Regression => PredictionKind::EventCurves,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewSelection {
    #[default]
    All,
    Single(View),
}

impl ViewSelection {
    pub fn admits(self, view: View) -> bool {
        match self {
            ViewSelection::All => true,
            ViewSelection::Single(v) => v == view,
        }
    }
}

/// Ablation switches. `None` keeps the model config's own setting.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    pub bidirectional: Option<bool>,
    pub cell: Option<CellType>,
    pub events: EventSet,
    pub views: ViewSelection,
}

impl Ablation {
    /// The model with the switches applied and one output per phase or event of the set.
    pub fn apply(&self, model: &ModelConfig) -> ModelConfig {
        let mut m = model.clone();
        match &mut m {
            ModelConfig::Classification(c) => {
                c.bidirectional = self.bidirectional.unwrap_or(c.bidirectional);
                c.cell = self.cell.unwrap_or(c.cell);
                c.n_classes = self.events.len();
            }
            ModelConfig::Regression(c) => {
                c.bidirectional = self.bidirectional.unwrap_or(c.bidirectional);
                c.cell = self.cell.unwrap_or(c.cell);
                c.n_outputs = self.events.len();
            }
        }
        m
    }
}

/// How training sequences are cut.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sequences {
    /// Whole recordings for classification, 30-frame windows for regression.
    #[default]
    Auto,
    /// Whole recordings, padded per batch.
    Whole,
    /// Windows of this many frames at a random start, redrawn every epoch.
    Window(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    /// `None` = 8 for classification, 4 for regression.
    pub batch_size: Option<usize>,
    pub sequences: Sequences,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Half-width of the regression target triangles, in frames.
    pub soft_label_width: usize,
    pub ablation: Ablation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::classification()
    }
}

impl TrainConfig {
    pub fn classification() -> Self {
        TrainConfig {
            task: Task::Classification,
            batch_size: None,
            sequences: Sequences::Auto,
            learning_rate: 1e-3,
            max_epochs: 200,
            patience: 15,
            seed: 0,
            soft_label_width: 5,
            ablation: Ablation::default(),
        }
    }

    pub fn regression() -> Self {
        TrainConfig {
            task: Task::Regression,
            ..TrainConfig::classification()
        }
    }

    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Classification => TrainConfig::classification(),
            Task::Regression => TrainConfig::regression(),
        }
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size.unwrap_or(match self.task {
            Task::Classification => 8,
            Task::Regression => 4,
        })
    }

    /// Training window length, `None` for whole sequences.
    pub fn window(&self) -> Option<usize> {
        match (self.sequences, self.task) {
            (Sequences::Auto, Task::Classification) | (Sequences::Whole, _) => None,
            (Sequences::Auto, Task::Regression) => Some(30),
            (Sequences::Window(w), _) => Some(w),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.max_epochs == 0 || self.patience >= self.max_epochs {
            return Err(Error::Config(format!(
                "patience ({}) must be below max_epochs ({})",
                self.patience, self.max_epochs
            )));
        }
        if self.sequences == Sequences::Window(0) || self.soft_label_width == 0 {
            return Err(Error::Config("window and soft_label_width must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Stops after `patience` consecutive epochs without a strict improvement.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    wait: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StopDecision {
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            wait: 0,
        }
    }

    pub fn update(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.wait = 0;
            StopDecision {
                improved: true,
                stop: false,
            }
        } else {
            self.wait += 1;
            StopDecision {
                improved: false,
                stop: self.wait >= self.patience,
            }
        }
    }

    pub fn best(&self) -> (usize, f64) {
        (self.best_epoch, self.best)
    }
}

/// Losses of one epoch; epochs count from 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
}

pub fn write_history_csv(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in history {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, "csv", format!("{other:?}")),
    }
}

fn to_input(batch: &Batch) -> Tensor<f32> {
    Tensor::from_vec(
        &[batch.n_items, batch.channels, batch.n_frames, batch.height, batch.width],
        batch.images.clone(),
    )
}

fn batch_loss(task: Task, out: &Tensor<f32>, labels: &[f32]) -> LossOutput<f32> {
    match task {
        Task::Classification => masked_categorical_crossentropy(out, labels),
        Task::Regression => masked_mse(out, labels),
    }
}

/// Count-weighted mean loss of `net` over `items`, without updating it.
fn evaluate_loss(net: &mut Network<f32>, task: Task, items: &[(&Clip, &LabelTrack)], batch_size: usize) -> Result<f64> {
    let (mut total, mut count) = (0.0, 0usize);
    for chunk in items.chunks(batch_size) {
        let batch = pad_batch(chunk)?;
        let out = net.predict(to_input(&batch), &batch.lengths)?;
        let l = batch_loss(task, &out, &batch.labels);
        total += l.value * l.count as f64;
        count += l.count;
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Trains one fold. Validation loss is tracked every epoch; training stops
/// at `max_epochs` or after `patience` epochs without improvement, and the
/// checkpoint holds the weights of the best validation epoch. With an empty
/// validation set the training loss is monitored instead.
pub fn train_fold(
    model: &ModelConfig,
    cfg: &TrainConfig,
    train: &[impl Borrow<Sample>],
    val: &[impl Borrow<Sample>],
    fold: &str,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if Task::of(model) != cfg.task {
        return Err(Error::Config(format!(
            "train task {:?} does not match the model kind",
            cfg.task
        )));
    }
    let model = cfg.ablation.apply(model);
    let set = cfg.ablation.events;
    let keep = |s: &&Sample| cfg.ablation.views.admits(s.view);
    let train: Vec<&Sample> = train.iter().map(Borrow::borrow).filter(keep).collect();
    let val: Vec<&Sample> = val.iter().map(Borrow::borrow).filter(keep).collect();
    if train.is_empty() {
        return Err(Error::InvalidArgument(format!("fold {fold} has no training recordings")));
    }
    let train_labels = train
        .iter()
        .map(|s| s.labels(cfg.task, set, cfg.soft_label_width))
        .collect::<Result<Vec<_>>>()?;
    let val_labels = val
        .iter()
        .map(|s| s.labels(cfg.task, set, cfg.soft_label_width))
        .collect::<Result<Vec<_>>>()?;
    let val_items: Vec<(&Clip, &LabelTrack)> = val.iter().map(|s| &s.clip).zip(&val_labels).collect();

    let mut net: Network<f32> = model.build(rng::derive_seed(cfg.seed, "model", fold))?;
    let mut opt = Adam::new(cfg.learning_rate);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_weights = net.export_weights();
    let mut history = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        let mut rng = rng::stream(cfg.seed, "epoch", &format!("{fold}/{epoch}"));
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);
        let (mut total, mut count) = (0.0, 0usize);
        for (b, chunk) in order.chunks(cfg.batch_size()).enumerate() {
            let windows: Vec<(Clip, LabelTrack)> = chunk
                .iter()
                .map(|&i| {
                    let (clip, labels) = (&train[i].clip, &train_labels[i]);
                    match cfg.window() {
                        Some(w) if clip.n_frames > w => {
                            let start = rng.gen_range(0..=clip.n_frames - w);
                            (clip.window(start, w), labels.window(start, w))
                        }
                        _ => (clip.clone(), labels.clone()),
                    }
                })
                .collect();
            let refs: Vec<(&Clip, &LabelTrack)> = windows.iter().map(|(c, l)| (c, l)).collect();
            let batch = pad_batch(&refs)?;
            let out = net.forward(to_input(&batch), &batch.lengths, true)?;
            let loss = batch_loss(cfg.task, &out, &batch.labels);
            if !loss.value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            net.zero_grad();
            net.backward(loss.grad, &batch.lengths);
            opt.step(&mut net);
            total += loss.value * loss.count as f64;
            count += loss.count;
        }
        let train_loss = if count == 0 { 0.0 } else { total / count as f64 };
        let val_loss = if val_items.is_empty() {
            train_loss
        } else {
            evaluate_loss(&mut net, cfg.task, &val_items, cfg.batch_size())?
        };
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: 0 });
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        log::info!("fold {fold} epoch {epoch}: train {train_loss:.5} val {val_loss:.5}");
        let decision = stopper.update(epoch, val_loss);
        if decision.improved {
            best_weights = net.export_weights();
        }
        if decision.stop {
            break;
        }
    }
    let (best_epoch, best_val_loss) = stopper.best();
    let meta = CheckpointMeta {
        format: String::new(),
        model,
        event_set: set,
        seed: cfg.seed,
        fold: fold.to_string(),
        epochs_run: history.len(),
        best_epoch,
        best_val_loss,
        n_weights: 0,
        weights_sha256: String::new(),
    };
    Ok(TrainOutcome {
        checkpoint: Checkpoint::new(meta, best_weights),
        history,
    })
}

/// Runs `net` over whole recordings and returns one prediction per sample.
pub fn predict_samples(
    net: &mut Network<f32>,
    kind: PredictionKind,
    set: EventSet,
    samples: &[impl Borrow<Sample>],
    batch_size: usize,
) -> Result<Vec<FramePredictions>> {
    let c = set.len();
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch_size.max(1)) {
        let chunk: Vec<&Sample> = chunk.iter().map(Borrow::borrow).collect();
        let dummy: Vec<LabelTrack> = chunk
            .iter()
            .map(|s| LabelTrack {
                channels: 1,
                values: vec![0.0; s.n_frames()],
            })
            .collect();
        let items: Vec<(&Clip, &LabelTrack)> = chunk.iter().map(|s| &s.clip).zip(&dummy).collect();
        let batch = pad_batch(&items)?;
        let y = net.predict(to_input(&batch), &batch.lengths)?;
        if y.shape[2] != c {
            return Err(Error::InvalidArgument(format!(
                "network emits {} channels, event set has {c}",
                y.shape[2]
            )));
        }
        let t_max = batch.n_frames;
        for (i, s) in chunk.iter().enumerate() {
            let rows = &y.data[i * t_max * c..(i * t_max + s.n_frames()) * c];
            let values = match kind {
                PredictionKind::PhaseProbs => renormalize(rows, c),
                PredictionKind::EventCurves => rows.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            };
            out.push(FramePredictions::new(&s.id, s.fps, kind, set, values)?);
        }
    }
    Ok(out)
}

fn renormalize(values: &[f32], c: usize) -> Vec<f32> {
    values
        .chunks(c)
        .flat_map(|row| {
            let s: f32 = row.iter().sum();
            row.iter().map(move |v| v / s).collect::<Vec<_>>()
        })
        .collect()
}

/// Element-wise mean of several models' predictions for one recording;
/// probability rows are renormalized afterwards.
pub fn ensemble_average(preds: &[FramePredictions]) -> Result<FramePredictions> {
    let Some(first) = preds.first() else {
        return Err(Error::InvalidArgument("ensemble of zero predictions".into()));
    };
    for p in preds {
        if p.kind != first.kind || p.event_set != first.event_set || p.n_frames != first.n_frames {
            return Err(Error::InvalidArgument(format!(
                "ensemble members disagree in shape: {} vs {}",
                p.id, first.id
            )));
        }
    }
    let n = preds.len() as f64;
    let mut mean: Vec<f32> = (0..first.values.len())
        .map(|i| (preds.iter().map(|p| f64::from(p.values[i])).sum::<f64>() / n) as f32)
        .collect();
    if first.kind == PredictionKind::PhaseProbs {
        mean = renormalize(&mean, first.channels());
    }
    FramePredictions::new(&first.id, first.fps, first.kind, first.event_set, mean)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, serde_json::to_vec_pretty(value)?).map_err(|e| Error::io(path, e))
}
