//! Mini-batch training with Adam and early stopping.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{bail_validation, Error, Result};
use crate::kd::{self, KdParams};
use crate::math;
use crate::net::{self, AdamConfig, NetworkSpec, NetworkState, OptimizerState};
use crate::synth::{self, Preprocess};
use crate::tensor::Tensor;

/// Data seed used for shuffling and augmentation under `fixed_shuffle`.
pub const FIXED_SHUFFLE_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Decouple data order and augmentation from `seed`.
    pub fixed_shuffle: bool,
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            seed: 42,
            fixed_shuffle: false,
            augment: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            bail_validation!("batch size must be at least 1");
        }
        if self.max_epochs == 0 {
            bail_validation!("max_epochs must be at least 1");
        }
        if self.patience == 0 {
            bail_validation!("patience must be at least 1");
        }
        Ok(())
    }

    pub fn data_seed(&self) -> u64 {
        if self.fixed_shuffle {
            FIXED_SHUFFLE_SEED
        } else {
            self.seed
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StopReason {
    EarlyStopping,
    MaxEpochs,
}

/// Strict improvement against the best loss seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::INFINITY, stale: 0 }
    }

    /// Records one epoch's loss; true once `patience` consecutive epochs
    /// failed to beat the best.
    pub fn observe(&mut self, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale >= self.patience
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub losses: Vec<f64>,
    /// 1-based epoch at which training stopped.
    pub stop_epoch: usize,
    pub reason: StopReason,
}

/// Runs `epoch(e)` for `e = 1, 2, …` until early stopping or `max_epochs`.
pub fn fit(max_epochs: usize, patience: usize, mut epoch: impl FnMut(usize) -> Result<f64>) -> Result<Schedule> {
    if max_epochs == 0 || patience == 0 {
        bail_validation!("max_epochs and patience must be at least 1");
    }
    let mut stopper = EarlyStopping::new(patience);
    let mut losses = Vec::new();
    for e in 1..=max_epochs {
        let loss = epoch(e)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(alloc::format!("training loss diverged at epoch {e}")));
        }
        losses.push(loss);
        if stopper.observe(loss) {
            return Ok(Schedule { losses, stop_epoch: e, reason: StopReason::EarlyStopping });
        }
    }
    Ok(Schedule { losses, stop_epoch: max_epochs, reason: StopReason::MaxEpochs })
}

/// One raw training example; `image` is `C×H×W` before preprocessing.
#[derive(Debug, Clone, Copy)]
pub struct TrainItem<'a> {
    pub id: &'a str,
    pub image: &'a Tensor,
    pub label: usize,
}

#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    CrossEntropy,
    /// Student loss against a frozen teacher evaluated on the same batch.
    Distill { teacher: &'a NetworkState, kd: KdParams },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: NetworkState,
    pub schedule: Schedule,
}

/// Builds a batch: optional augmentation, then preprocessing.
pub fn prepare_batch(items: &[TrainItem<'_>], prep: &Preprocess, augment: Option<(u64, u64)>) -> Result<Tensor> {
    let images = items
        .iter()
        .map(|it| match augment {
            Some((epoch, seed)) => prep.apply(&synth::augment(it.image, it.id, epoch, seed)),
            None => prep.apply(it.image),
        })
        .collect::<Result<Vec<_>>>()?;
    Tensor::stack(&images)
}

pub fn train(
    spec: NetworkSpec,
    items: &[TrainItem<'_>],
    prep: &Preprocess,
    config: &TrainConfig,
    objective: Objective<'_>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if items.is_empty() {
        bail_validation!("no training samples");
    }
    if let Objective::Distill { teacher, kd } = objective {
        kd.validate()?;
        if teacher.spec().classes != spec.classes {
            bail_validation!("teacher has {} classes, student {}", teacher.spec().classes, spec.classes);
        }
    }
    let mut net = NetworkState::build(spec, config.seed)?;
    let mut opt = OptimizerState::new(net.params().len(), config.adam);
    let data_seed = config.data_seed();
    let mut order: Vec<usize> = (0..items.len()).collect();
    let schedule = fit(config.max_epochs, config.patience, |epoch| {
        order.sort_unstable();
        order.shuffle(&mut math::rng(math::substream(data_seed, "shuffle", epoch as u64)));
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch_items: Vec<TrainItem<'_>> = chunk.iter().map(|&i| items[i]).collect();
            let labels: Vec<usize> = batch_items.iter().map(|it| it.label).collect();
            let augment = config.augment.then_some((epoch as u64, data_seed));
            let batch = prepare_batch(&batch_items, prep, augment)?;
            let cache = net::forward_pass(net.spec(), net.params(), &batch)?;
            let (loss, d_logits) = match objective {
                Objective::CrossEntropy => net::cross_entropy_batch(cache.logits(), &labels)?,
                Objective::Distill { teacher, kd } => {
                    let t_logits = teacher.predict(&batch)?;
                    kd::total_loss_batch(&t_logits, cache.logits(), &labels, kd)?
                }
            };
            if !loss.is_finite() {
                return Err(Error::Numeric(alloc::format!("non-finite batch loss at epoch {epoch}")));
            }
            let (grad, _) = net::backward_pass(net.spec(), net.params(), &cache, &d_logits)?;
            opt.step(&mut net, &grad)?;
            total += loss * chunk.len() as f64;
        }
        Ok(total / items.len() as f64)
    })?;
    Ok(TrainOutcome { net, schedule })
}

/// Human-readable stop reason used in run records.
pub fn reason_name(reason: StopReason) -> String {
    String::from(match reason {
        StopReason::EarlyStopping => "early_stopping",
        StopReason::MaxEpochs => "max_epochs",
    })
}
