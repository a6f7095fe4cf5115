use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arch::{DeepMatchModel, HeadKind};
use super::dataset::DetectionDataset;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, Loss, Tensor};
use crate::timeseries::WindowSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub lr: f64,
    pub pos_weight: f64,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    /// Keep the matched-filter layer fixed during fine-tuning.
    pub freeze_input_layer: bool,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            pos_weight: 3.0,
            batch_size: 32,
            pretrain_epochs: 50,
            finetune_epochs: 100,
            patience: 10,
            validation_fraction: 0.1,
            freeze_input_layer: false,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !(self.pos_weight > 0.0) {
            return Err(Error::invalid("lr and pos_weight must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::invalid("validation fraction must lie in [0, 1)"));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, ..AdamConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Loss over the full training set before the first update.
    pub initial_loss: f64,
    /// Mean minibatch loss of each epoch.
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch (1-based) whose parameters were returned; 0 means untrained.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Flattens windows into `channels × len` f32 samples.
pub fn pretrain_inputs(sets: &[WindowSet]) -> Vec<Vec<f32>> {
    sets.iter()
        .flat_map(|ws| ws.windows.iter().map(|(_, w)| w.iter().map(|&v| v as f32).collect()))
        .collect()
}

struct Batcher<'a> {
    inputs: Vec<&'a [f32]>,
    targets: Vec<&'a [f32]>,
    in_shape: (usize, usize),
    out_shape: (usize, usize),
}

impl Batcher<'_> {
    fn batch(&self, idx: &[usize]) -> Result<(Tensor<f32>, Tensor<f32>)> {
        let x: Vec<&[f32]> = idx.iter().map(|&i| self.inputs[i]).collect();
        let y: Vec<&[f32]> = idx.iter().map(|&i| self.targets[i]).collect();
        Ok((
            Tensor::stack(&x, self.in_shape.0, self.in_shape.1)?,
            Tensor::stack(&y, self.out_shape.0, self.out_shape.1)?,
        ))
    }

    /// Mean loss over `idx`, evaluated in batches.
    fn eval(&self, model: &DeepMatchModel<f32>, idx: &[usize], loss: Loss, bs: usize) -> Result<f64> {
        let mut total = 0.0;
        for chunk in idx.chunks(bs) {
            let (x, y) = self.batch(chunk)?;
            total += model.loss(&x, &y, loss)? * chunk.len() as f64;
        }
        Ok(total / idx.len().max(1) as f64)
    }
}

struct Stage<'a> {
    name: &'static str,
    batcher: Batcher<'a>,
    train_idx: Vec<usize>,
    val_idx: Vec<usize>,
    loss: Loss,
    epochs: usize,
    patience: Option<usize>,
    trainable: Option<Vec<bool>>,
    rng_stream: u64,
}

fn run_stage(
    mut model: DeepMatchModel<f32>,
    stage: Stage<'_>,
    cfg: &TrainingConfig,
) -> Result<(DeepMatchModel<f32>, TrainHistory)> {
    let Stage { name, batcher, mut train_idx, val_idx, loss, epochs, patience, trainable, rng_stream } = stage;
    let mut history = TrainHistory::default();
    if train_idx.is_empty() {
        return Err(Error::invalid(format!("{name}: no training samples")));
    }
    history.initial_loss = batcher.eval(&model, &train_idx, loss, cfg.batch_size)?;
    if !history.initial_loss.is_finite() {
        return Err(Error::Diverged { stage: name, epoch: 0 });
    }
    let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    let mut adam = AdamState::new(cfg.adam(), &sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rng_stream);
    let mut best: Option<(f64, DeepMatchModel<f32>)> = None;
    let mut since_best = 0;

    for epoch in 1..=epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in train_idx.chunks(cfg.batch_size) {
            let (x, y) = batcher.batch(chunk)?;
            let (value, grads) = model.loss_and_grads(&x, &y, loss)?;
            if !value.is_finite() {
                return Err(Error::Diverged { stage: name, epoch });
            }
            total += value * chunk.len() as f64;
            adam.step(&mut model.params_mut(), &grads.blocks, trainable.as_deref())?;
        }
        let train_loss = total / train_idx.len() as f64;
        history.train_loss.push(train_loss);
        let monitored = if val_idx.is_empty() {
            train_loss
        } else {
            let v = batcher.eval(&model, &val_idx, loss, cfg.batch_size)?;
            if !v.is_finite() {
                return Err(Error::Diverged { stage: name, epoch });
            }
            history.val_loss.push(v);
            v
        };
        debug!("{name} epoch {epoch}: train {train_loss:.5} monitored {monitored:.5}");
        match patience {
            Some(p) => {
                if best.as_ref().is_none_or(|(b, _)| monitored < *b) {
                    best = Some((monitored, model.clone()));
                    history.best_epoch = epoch;
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= p {
                        history.stopped_early = true;
                        break;
                    }
                }
            }
            None => history.best_epoch = epoch,
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    info!(
        "{name}: {} epochs, loss {:.5} -> {:.5}",
        history.train_loss.len(),
        history.initial_loss,
        history.train_loss.last().copied().unwrap_or(history.initial_loss)
    );
    Ok((model, history))
}

/// Stage one: trains encoder and decoder to reproduce each window (MSE).
/// Runs the full epoch budget and returns the final parameters.
pub fn pretrain(
    model: DeepMatchModel<f32>,
    windows: &[Vec<f32>],
    cfg: &TrainingConfig,
) -> Result<(DeepMatchModel<f32>, TrainHistory)> {
    cfg.validate()?;
    if model.head_kind != HeadKind::Decoder {
        return Err(Error::invalid("pretraining needs an encoder-decoder model"));
    }
    let shape = (model.arch.input_channels, model.arch.window_len_samples);
    if let Some(w) = windows.iter().find(|w| w.len() != shape.0 * shape.1) {
        return Err(Error::shape(format!("window of {} values, expected {}", w.len(), shape.0 * shape.1)));
    }
    let inputs: Vec<&[f32]> = windows.iter().map(Vec::as_slice).collect();
    let stage = Stage {
        name: "pretrain",
        batcher: Batcher { targets: inputs.clone(), inputs, in_shape: shape, out_shape: shape },
        train_idx: (0..windows.len()).collect(),
        val_idx: Vec::new(),
        loss: Loss::Mse,
        epochs: cfg.pretrain_epochs,
        patience: None,
        trainable: None,
        rng_stream: 1,
    };
    run_stage(model, stage, cfg)
}

/// Stage two: trains the whole detector model with weighted BCE, holding out
/// a seeded `validation_fraction` of samples for early stopping, and returns
/// the parameters with the best validation loss.
pub fn finetune(
    model: DeepMatchModel<f32>,
    dataset: &DetectionDataset,
    cfg: &TrainingConfig,
) -> Result<(DeepMatchModel<f32>, TrainHistory)> {
    cfg.validate()?;
    if model.head_kind != HeadKind::Detector {
        return Err(Error::invalid("fine-tuning needs a detector model"));
    }
    let in_shape = (model.arch.input_channels, model.arch.window_len_samples);
    if dataset.samples.is_empty() {
        return Err(Error::invalid("detection dataset is empty"));
    }
    if (dataset.channels, dataset.window_len, dataset.output_len)
        != (in_shape.0, in_shape.1, model.arch.output_len)
    {
        return Err(Error::shape(format!(
            "dataset samples are {}×{} -> {}, model expects {}×{} -> {}",
            dataset.channels,
            dataset.window_len,
            dataset.output_len,
            in_shape.0,
            in_shape.1,
            model.arch.output_len
        )));
    }
    let n = dataset.samples.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    order.shuffle(&mut rng);
    let n_val = ((n as f64 * cfg.validation_fraction).round() as usize).min(n - 1);
    let val_idx = order[..n_val].to_vec();
    let train_idx = order[n_val..].to_vec();
    let trainable = cfg.freeze_input_layer.then(|| {
        let n_blocks = model.params().len();
        (0..n_blocks).map(|i| i >= model.input_layer_blocks()).collect()
    });
    let stage = Stage {
        name: "finetune",
        batcher: Batcher {
            inputs: dataset.samples.iter().map(|s| s.input.as_slice()).collect(),
            targets: dataset.samples.iter().map(|s| s.target.as_slice()).collect(),
            in_shape,
            out_shape: (1, model.arch.output_len),
        },
        train_idx,
        val_idx,
        loss: Loss::WeightedBce { pos_weight: cfg.pos_weight },
        epochs: cfg.finetune_epochs,
        patience: Some(cfg.patience.max(1)),
        trainable,
        rng_stream: 3,
    };
    run_stage(model, stage, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        make_detection_dataset, ArchitectureConfig, DetectionConfig, ModelVariant, SubjectRecording,
    };
    use crate::synth::{generate_subject, SynthConfig};
    use crate::timeseries::{standardize, window};

    fn windows(n: usize) -> Vec<Vec<f32>> {
        let s = generate_subject(&SynthConfig { duration_s: 100.0, ..Default::default() }).unwrap();
        let (rec, _) = standardize(&s.recording).unwrap();
        let mut w = pretrain_inputs(&[window(&rec, 2.0, 0.0).unwrap()]);
        w.truncate(n);
        w
    }

    fn model(seed: u64) -> DeepMatchModel<f32> {
        DeepMatchModel::build(&ArchitectureConfig::default(), ModelVariant::Standard, None, seed).unwrap()
    }

    #[test]
    fn pretrain_halves_reconstruction_error() {
        let w = windows(50);
        assert_eq!(w.len(), 50);
        let cfg = TrainingConfig { pretrain_epochs: 20, batch_size: 8, ..Default::default() };
        let (m, h) = pretrain(model(0), &w, &cfg).unwrap();
        assert_eq!(h.train_loss.len(), 20);
        let x = Tensor::stack(&w.iter().map(Vec::as_slice).collect::<Vec<_>>(), 4, 500).unwrap();
        let final_loss = m.loss(&x, &x, Loss::Mse).unwrap();
        assert!(final_loss < 0.5 * h.initial_loss, "{} vs {}", final_loss, h.initial_loss);
    }

    #[test]
    fn zero_epochs_leaves_model_unchanged() {
        let w = windows(4);
        let cfg = TrainingConfig { pretrain_epochs: 0, ..Default::default() };
        let (m, h) = pretrain(model(1), &w, &cfg).unwrap();
        assert_eq!(m, model(1));
        assert!(h.train_loss.is_empty());
    }

    #[test]
    fn pretrain_is_deterministic() {
        let w = windows(8);
        let cfg = TrainingConfig { pretrain_epochs: 2, batch_size: 4, ..Default::default() };
        let (m1, h1) = pretrain(model(2), &w, &cfg).unwrap();
        let (m2, h2) = pretrain(model(2), &w, &cfg).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(m1, m2);
    }

    fn tiny_dataset() -> DetectionDataset {
        let s = generate_subject(&SynthConfig { snr_db: 10.0, ..Default::default() }).unwrap();
        let (rec, _) = standardize(&s.recording).unwrap();
        let subj = SubjectRecording { subject: "s0".into(), recording: rec, events: s.events };
        let mut ds = make_detection_dataset(&[subj], &DetectionConfig::default()).unwrap();
        let pos = ds.samples.iter().position(|s| s.is_positive()).unwrap();
        let pos2 = ds.samples.iter().skip(pos + 20).position(|s| s.is_positive()).unwrap() + pos + 20;
        let neg: Vec<usize> = ds.samples.iter().enumerate().filter(|(_, s)| !s.is_positive()).map(|(i, _)| i).take(2).collect();
        ds.samples = [pos, pos2, neg[0], neg[1]].iter().map(|&i| ds.samples[i].clone()).collect();
        ds
    }

    #[test]
    fn finetune_overfits_four_samples() {
        let ds = tiny_dataset();
        let cfg = TrainingConfig {
            finetune_epochs: 500,
            patience: 500,
            validation_fraction: 0.0,
            batch_size: 4,
            lr: 3e-3,
            ..Default::default()
        };
        let det = model(3).attach_detector(3).unwrap();
        let (_, h) = finetune(det, &ds, &cfg).unwrap();
        let best = h.train_loss.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(best < 0.05, "best loss {best}");
    }

    #[test]
    fn pos_weight_changes_result_and_runs_repeat() {
        let ds = tiny_dataset();
        let cfg = TrainingConfig { finetune_epochs: 3, validation_fraction: 0.25, batch_size: 2, ..Default::default() };
        let det = model(4).attach_detector(4).unwrap();
        let (a, ha) = finetune(det.clone(), &ds, &cfg).unwrap();
        let (b, hb) = finetune(det.clone(), &ds, &cfg).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
        let (c, _) = finetune(det, &ds, &TrainingConfig { pos_weight: 1.0, ..cfg }).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn freeze_keeps_input_layer() {
        let ds = tiny_dataset();
        let cfg = TrainingConfig {
            finetune_epochs: 2,
            validation_fraction: 0.0,
            freeze_input_layer: true,
            ..Default::default()
        };
        let det = model(5).attach_detector(5).unwrap();
        let (m, _) = finetune(det.clone(), &ds, &cfg).unwrap();
        assert_eq!(m.input_layer_weights(), det.input_layer_weights());
        assert_ne!(m.params()[2], det.params()[2]);
    }

    #[test]
    fn wrong_head_rejected() {
        let ds = tiny_dataset();
        assert!(finetune(model(0), &ds, &TrainingConfig::default()).is_err());
        let det = model(0).attach_detector(0).unwrap();
        assert!(pretrain(det, &windows(2), &TrainingConfig::default()).is_err());
    }
}
