use crate::image::Image;
use crate::imaging::{gamma_expand, tmo_apply, TmoOperator};
use crate::loss::total_loss_graph;
use crate::models::{batch, iso_plane, predn_config, predn_forward, ModelWeights};
use crate::sim::DatasetSample;

use super::augment::augment_pair;
use super::trainer::{StepLoss, TrainOutcome, Trainer};
use super::{TrainConfig, TrainError};

/// Noisy tone-mapped frame and its clean counterpart.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoisePair {
    pub input: Image,
    pub target: Image,
    pub iso: f64,
}

/// One pair per static frame: `T(L_i)` against `T` of the same capture with
/// noise switched off (quantization kept, so zero noise means identity).
pub fn denoise_pairs(samples: &[DatasetSample], tmo: TmoOperator) -> Result<Vec<DenoisePair>, TrainError> {
    let mut out = Vec::with_capacity(samples.len() * 3);
    for s in samples {
        for (i, frame) in s.static_frames.iter().enumerate() {
            let input = tmo_apply(&gamma_expand(frame).0, tmo)?.pixels;
            let target = tmo_apply(&gamma_expand(&s.clean_capture(i)).0, tmo)?.pixels;
            out.push(DenoisePair { input, target, iso: frame.iso() });
        }
    }
    Ok(out)
}

/// Trains the denoiser from `init` (or resumes from the configured
/// checkpoint directory).
pub fn train_predn(cfg: &TrainConfig, init: ModelWeights, pairs: &[DenoisePair]) -> Result<TrainOutcome, TrainError> {
    let arch = predn_config(&init)?.clone();
    let mut trainer = Trainer::new_or_resume(cfg, init)?;
    trainer.run(pairs.len(), |g, p, idx, rng| {
        let mut xs = Vec::with_capacity(idx.len());
        let mut ys = Vec::with_capacity(idx.len());
        let mut planes = Vec::with_capacity(idx.len());
        for &i in idx {
            let pair = &pairs[i];
            let (x, y) = augment_pair(&pair.input, &pair.target, rng, cfg.patch_size, cfg.augment);
            planes.push(iso_plane(pair.iso, x.height(), x.width()));
            xs.push(x);
            ys.push(y);
        }
        let x = g.input(batch(&refs(&xs))?);
        let iso = g.input(batch(&refs(&planes))?);
        let target = g.input(batch(&refs(&ys))?);
        let pred = predn_forward(g, &arch, p, x, iso)?;
        let l = total_loss_graph(g, pred, target, cfg.lambda)?;
        Ok(StepLoss { total: l.total, recon: Some(l.recon), sobel: Some((l.sobel_x, l.sobel_y)) })
    })?;
    Ok(trainer.finish())
}

fn refs(v: &[Image]) -> Vec<&Image> {
    v.iter().collect()
}
