use jointhdr_autograd::Graph;

use crate::image::Image;
use crate::imaging::{tmo_apply, ReferenceChoice, TmoOperator};
use crate::loss::{total_loss_graph, LossVars};
use crate::models::{batch, pcf_config, pcf_forward, FrameImages, FrameInput, ModelWeights, Bound, PcfConfig};
use crate::pipeline::{fusion_inputs, prepare_frames};
use crate::sim::{DatasetSample, RADIANCE_CEILING};

use super::augment::augment_set;
use super::trainer::{StepLoss, TrainOutcome, Trainer};
use super::{TrainConfig, TrainError};

/// Precomputed fusion inputs of one sample for a fixed reference, with the
/// tone-mapped ground truth. The denoiser is applied once here and never
/// receives gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct PcfItem {
    pub frames: [FrameImages; 3],
    pub target: Image,
}

impl PcfItem {
    pub fn from_sample(
        sample: &DatasetSample,
        predn: Option<&ModelWeights>,
        reference: ReferenceChoice,
        tmo: TmoOperator,
    ) -> Result<Self, TrainError> {
        let stages = prepare_frames(&sample.variant(reference), predn, tmo, RADIANCE_CEILING)?;
        let target = tmo_apply(&sample.ground_truth.0, tmo)?.pixels;
        Ok(Self { frames: fusion_inputs(&stages), target })
    }

    /// Same crop/rotation/flip on all seven images.
    fn augmented(&self, rng: &mut impl rand::Rng, cfg: &TrainConfig) -> Self {
        let set: Vec<&Image> =
            self.frames.iter().flat_map(|(l, h)| [l, h]).chain(std::iter::once(&self.target)).collect();
        let mut v = augment_set(&set, rng, cfg.patch_size, cfg.augment).into_iter();
        let mut next = || v.next().expect("seven images");
        let frames = std::array::from_fn(|_| (next(), next()));
        Self { frames, target: next() }
    }
}

/// Precomputes items for every sample.
pub fn pcf_items(
    samples: &[DatasetSample],
    predn: Option<&ModelWeights>,
    reference: ReferenceChoice,
    tmo: TmoOperator,
) -> Result<Vec<PcfItem>, TrainError> {
    samples.iter().map(|s| PcfItem::from_sample(s, predn, reference, tmo)).collect()
}

/// Records the fusion loss of a batch of (already augmented) items.
pub fn pcf_batch_loss(
    g: &mut Graph<f32>,
    cfg: &PcfConfig,
    p: &Bound,
    items: &[&PcfItem],
    lambda: f64,
) -> Result<LossVars, TrainError> {
    let mut frames = Vec::with_capacity(3);
    for i in 0..3 {
        let ldr: Vec<&Image> = items.iter().map(|it| &it.frames[i].0).collect();
        let hdr: Vec<&Image> = items.iter().map(|it| &it.frames[i].1).collect();
        frames.push(FrameInput { ldr: g.input(batch(&ldr)?), hdr: g.input(batch(&hdr)?) });
    }
    let frames: [FrameInput; 3] = frames.try_into().expect("three frames");
    let target: Vec<&Image> = items.iter().map(|it| &it.target).collect();
    let target = g.input(batch(&target)?);
    let pred = pcf_forward(g, cfg, p, &frames, cfg.reference)?;
    Ok(total_loss_graph(g, pred, target, lambda)?)
}

/// Trains one fusion path; the reference comes from `init`'s architecture.
pub fn train_pcf(cfg: &TrainConfig, init: ModelWeights, items: &[PcfItem]) -> Result<TrainOutcome, TrainError> {
    let arch = pcf_config(&init)?.clone();
    let mut trainer = Trainer::new_or_resume(cfg, init)?;
    trainer.run(items.len(), |g, p, idx, rng| {
        let aug: Vec<PcfItem> = idx.iter().map(|&i| items[i].augmented(rng, cfg)).collect();
        let refs: Vec<&PcfItem> = aug.iter().collect();
        let l = pcf_batch_loss(g, &arch, p, &refs, cfg.lambda)?;
        Ok(StepLoss { total: l.total, recon: Some(l.recon), sobel: Some((l.sobel_x, l.sobel_y)) })
    })?;
    Ok(trainer.finish())
}
