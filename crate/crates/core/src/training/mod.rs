//! Optimization: configs and presets, learning-rate schedules, Adam,
//! joint geometric augmentation, the shared training loop with JSONL logs
//! and resumable checkpoints, and the stage-specific trainers.

mod ablation;
mod augment;
mod labels;
mod pcf;
mod predn;
mod ranet;
mod trainer;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use ablation::{ablate_tmo, AblationRow};
pub use augment::{augment_pair, augment_set, crop, Geometry};
pub use labels::{label_paths, rule_labels, PathLabel, RULE_ISO_BANDS};
pub use pcf::{pcf_batch_loss, pcf_items, train_pcf, PcfItem};
pub use predn::{denoise_pairs, train_predn, DenoisePair};
pub use ranet::{ranet_accuracy, ranet_examples, train_ranet, RaNetExample, RaNetReport};
pub use trainer::{Adam, LogRecord, StepLoss, TrainOutcome, Trainer, TrainState};

use crate::imaging::{ImagingError, TmoOperator};
use crate::loss::LossError;
use crate::models::ModelError;
use crate::pipeline::PipelineError;
use crate::sim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("training diverged at step {step} (epoch {epoch}): loss {loss}; {detail}")]
    Divergence { step: usize, epoch: usize, loss: f64, detail: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("io error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl From<jointhdr_autograd::GraphError> for TrainError {
    fn from(e: jointhdr_autograd::GraphError) -> Self {
        TrainError::Model(e.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `lr0 · γ^⌊epoch / every⌋`, floored.
    Step,
    /// Half-cosine from `lr0` at epoch 0 to the floor at the last epoch.
    Cosine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentFlags {
    pub crop: bool,
    pub rotate: bool,
    pub flip: bool,
}

impl AugmentFlags {
    pub const ALL: Self = Self { crop: true, rotate: true, flip: true };
    pub const NONE: Self = Self { crop: false, rotate: false, flip: false };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub decay_gamma: f64,
    pub decay_every_epochs: usize,
    pub lr_floor: f64,
    pub schedule: ScheduleKind,
    pub patch_size: usize,
    pub augment: AugmentFlags,
    pub seed: u64,
    pub lambda: f64,
    pub tmo: TmoOperator,
    /// Save a resumable state every this many epochs (0 = never).
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
    /// Stop (as if interrupted) once this many epochs are done.
    #[serde(default)]
    pub stop_after_epoch: Option<usize>,
}

/// Pyramid divisor a patch must respect.
const PATCH_DIVISOR: usize = 4;

impl TrainConfig {
    /// Full-size schedule for the denoiser and fusion paths.
    pub fn full_fusion() -> Self {
        Self {
            epochs: 10_000,
            batch_size: 8,
            lr0: 5e-4,
            decay_gamma: 0.7,
            decay_every_epochs: 200,
            lr_floor: 1e-6,
            schedule: ScheduleKind::Step,
            patch_size: 256,
            augment: AugmentFlags::ALL,
            seed: 0,
            lambda: crate::loss::DEFAULT_LAMBDA,
            tmo: TmoOperator::mu_law(),
            checkpoint_every: 0,
            checkpoint_dir: None,
            stop_after_epoch: None,
        }
    }

    /// Full-size selector schedule.
    pub fn full_selector() -> Self {
        Self {
            epochs: 200,
            batch_size: 16,
            lr0: 1e-4,
            schedule: ScheduleKind::Cosine,
            augment: AugmentFlags::NONE,
            ..Self::full_fusion()
        }
    }

    /// Desk-scale denoiser preset.
    pub fn toy_predn() -> Self {
        Self { epochs: 60, batch_size: 8, lr0: 2e-3, decay_every_epochs: 20, patch_size: 48, ..Self::full_fusion() }
    }

    /// Desk-scale fusion preset.
    pub fn toy_pcf() -> Self {
        Self { epochs: 300, batch_size: 4, lr0: 2e-3, decay_every_epochs: 100, patch_size: 48, ..Self::full_fusion() }
    }

    /// Desk-scale selector preset.
    pub fn toy_ranet() -> Self {
        Self { epochs: 40, batch_size: 16, lr0: 2e-3, ..Self::full_selector() }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |m: String| Err(TrainError::Config(m));
        if !(self.lr0 > self.lr_floor && self.lr_floor > 0.0) {
            return err(format!("need lr0 > lr_floor > 0, got {} / {}", self.lr0, self.lr_floor));
        }
        if self.patch_size == 0 || self.patch_size % PATCH_DIVISOR != 0 {
            return err(format!("patch_size {} not divisible by {PATCH_DIVISOR}", self.patch_size));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return err("epochs and batch_size must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return err(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if self.schedule == ScheduleKind::Step && (self.decay_every_epochs == 0 || !(self.decay_gamma > 0.0)) {
            return err("step schedule needs decay_every_epochs > 0 and decay_gamma > 0".into());
        }
        Ok(())
    }

    /// Learning rate used throughout `epoch`.
    pub fn lr(&self, epoch: usize) -> f64 {
        match self.schedule {
            ScheduleKind::Step => {
                let k = (epoch / self.decay_every_epochs) as i32;
                (self.lr0 * self.decay_gamma.powi(k)).max(self.lr_floor)
            }
            ScheduleKind::Cosine => {
                if self.epochs <= 1 {
                    return self.lr_floor;
                }
                let p = epoch.min(self.epochs - 1) as f64 / (self.epochs - 1) as f64;
                self.lr_floor + 0.5 * (self.lr0 - self.lr_floor) * (1.0 + (std::f64::consts::PI * p).cos())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_schedule_law() {
        let c = TrainConfig::full_fusion();
        assert_eq!(c.lr(0), 5e-4);
        assert!((c.lr(400) - 5e-4 * 0.7 * 0.7).abs() < 1e-18);
        assert_eq!(c.lr(399), 5e-4 * 0.7);
        for e in (0..20_000).step_by(97) {
            let expect = (5e-4 * 0.7f64.powi((e / 200) as i32)).max(1e-6);
            assert_eq!(c.lr(e), expect);
            assert!(c.lr(e) >= 1e-6);
        }
        assert_eq!(c.lr(9_999), 1e-6);
    }

    #[test]
    fn cosine_reaches_floor_at_last_epoch() {
        let c = TrainConfig::full_selector();
        assert_eq!(c.lr(0), c.lr0);
        assert_eq!(c.lr(c.epochs - 1), c.lr_floor);
        let mut prev = f64::INFINITY;
        for e in 0..c.epochs {
            assert!(c.lr(e) <= prev);
            prev = c.lr(e);
        }
    }

    #[test]
    fn validation() {
        assert!(TrainConfig::toy_pcf().validate().is_ok());
        assert!(TrainConfig { patch_size: 30, ..TrainConfig::toy_pcf() }.validate().is_err());
        assert!(TrainConfig { lr_floor: 1.0, ..TrainConfig::toy_pcf() }.validate().is_err());
        assert!(TrainConfig { lambda: -0.1, ..TrainConfig::toy_pcf() }.validate().is_err());
    }
}
