//! Momentum SGD, one sample per step.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::inputs::{prepare_inputs, SampleInputs};
use super::loss::{loss_and_logit_grad, LossBreakdown, LossConfig};
use super::model::{ModelConfig, ModelParams};
use crate::candidates::knn_graph;
use crate::dataset::{class_weight, LabeledSample, DEFAULT_WEIGHT_MULTIPLIER};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// How per-candidate losses are combined into the step objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    Sum,
    /// Divide by the candidate count; keeps the step size independent of
    /// sample size.
    Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub momentum: f64,
    pub initial_lr: f64,
    /// The rate drops tenfold over this many epochs.
    pub lr_decay_epochs: f64,
    pub w_multiplier: f64,
    pub seed: u64,
    #[serde(flatten)]
    pub loss: LossConfig,
    pub reduction: Reduction,
    /// From this epoch on, normalisation uses the running statistics in
    /// training as well, so later updates see the inference-time scaling.
    pub freeze_norm_epoch: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            momentum: 0.99,
            initial_lr: 1e-3,
            lr_decay_epochs: 150.0,
            w_multiplier: DEFAULT_WEIGHT_MULTIPLIER,
            seed: 0,
            loss: LossConfig::default(),
            reduction: Reduction::Mean,
            freeze_norm_epoch: None,
        }
    }
}

impl TrainConfig {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.initial_lr * 10f64.powf(-(epoch as f64) / self.lr_decay_epochs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidInput(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::InvalidInput(format!("learning rate must be positive, got {}", self.initial_lr)));
        }
        if !(self.lr_decay_epochs > 0.0) {
            return Err(Error::InvalidInput("lr_decay_epochs must be positive".into()));
        }
        if !(self.w_multiplier > 0.0) {
            return Err(Error::InvalidInput("w_multiplier must be positive".into()));
        }
        Ok(())
    }
}

/// Prepared network inputs with labels and class weight.
#[derive(Clone, Debug)]
pub struct TrainItem {
    pub inputs: SampleInputs,
    pub labels: Vec<u8>,
    pub weight: f64,
}

pub fn prepare_item<T: Real>(sample: &LabeledSample<T>, model: &ModelConfig, w_multiplier: f64) -> Result<TrainItem> {
    if sample.labels.len() != sample.candidates.len() {
        return Err(Error::Shape(format!("{} labels for {} candidates", sample.labels.len(), sample.candidates.len())));
    }
    let weight = class_weight(&sample.labels, w_multiplier)?;
    let graph = knn_graph(&sample.cloud, model.k)?;
    let inputs = prepare_inputs(&sample.cloud, &graph, &sample.candidates, &model.drop_finfo)?;
    Ok(TrainItem {
        inputs,
        labels: sample.labels.clone(),
        weight,
    })
}

/// Losses summed over all candidates of all samples in one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub classification: f64,
    pub face: f64,
    pub total: f64,
}

impl std::fmt::Display for EpochLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:.6e} {:.6} {:.6} {:.6}",
            self.epoch, self.lr, self.classification, self.face, self.total
        )
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub params: ModelParams,
    pub log: Vec<EpochLog>,
}

pub fn train<T: Real>(samples: &[LabeledSample<T>], model: &ModelConfig, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let items = samples
        .iter()
        .map(|s| prepare_item(s, model, cfg.w_multiplier))
        .collect::<Result<Vec<_>>>()?;
    train_items(&items, ModelParams::init(model)?, cfg)
}

/// Trains `params` in place on prepared items.
pub fn train_items(items: &[TrainItem], mut params: ModelParams, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if items.is_empty() {
        return Err(Error::InvalidInput("no training samples".into()));
    }
    let mut velocity = params.zeros_like();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let batch_norm = cfg.freeze_norm_epoch.is_none_or(|f| epoch < f);
        let mut sum = LossBreakdown::default();
        for &s in &order {
            let item = &items[s];
            let (pred, cache) = params.forward(&item.inputs, batch_norm)?;
            let (loss, mut dlogits) = loss_and_logit_grad(&pred, &item.labels, item.weight, &cfg.loss)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, sample: s });
            }
            sum.classification += loss.classification;
            sum.face += loss.face;
            sum.total += loss.total;
            if cfg.reduction == Reduction::Mean && !item.labels.is_empty() {
                dlogits /= item.labels.len() as f64;
            }
            let mut grad = params.backward(&item.inputs, &cache, &dlogits);
            if batch_norm {
                params.update_running(&cache);
            }
            for ((p, v), g) in params.blocks_mut().into_iter().zip(velocity.blocks_mut()).zip(grad.blocks_mut()) {
                if !p.trainable {
                    continue;
                }
                for ((pv, vv), gv) in p.data.iter_mut().zip(v.data.iter_mut()).zip(g.data.iter()) {
                    *vv = cfg.momentum * *vv + gv;
                    *pv -= lr * *vv;
                }
            }
        }
        let entry = EpochLog {
            epoch,
            lr,
            classification: sum.classification,
            face: sum.face,
            total: sum.total,
        };
        log::info!("epoch {entry}");
        log.push(entry);
    }
    Ok(TrainReport { params, log })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule() {
        let c = TrainConfig::default();
        assert_eq!(c.lr_at(0), 1e-3);
        assert!((c.lr_at(150) - 1e-4).abs() < 1e-12);
        assert!((c.lr_at(300) - 1e-5).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let mut c = TrainConfig::default();
        c.momentum = 1.0;
        assert!(c.validate().is_err());
        c.momentum = 0.5;
        c.initial_lr = 0.0;
        assert!(c.validate().is_err());
    }
}
