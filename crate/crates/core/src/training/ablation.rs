use serde::{Deserialize, Serialize};

use crate::imaging::{ReferenceChoice, TmoOperator};
use crate::metrics::{MetricRecord, MetricReport};
use crate::models::{Architecture, ModelWeights, PcfConfig};
use crate::pipeline::{fuse, inverse, prepare_frames};
use crate::sim::{DatasetSample, RADIANCE_CEILING};

use super::pcf::{pcf_items, train_pcf};
use super::{TrainConfig, TrainError};

/// One row of the tone-mapping comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub tmo: String,
    /// PSNR-μ, PSNR-L, SSIM-μ, SSIM-L on the test samples.
    pub means: [f64; 4],
    pub report: MetricReport,
}

/// Trains one fusion path per operator with identical seeds and budgets
/// (no denoiser, so only the tone-mapping domain differs) and scores each
/// on `test`.
pub fn ablate_tmo(
    cfg: &TrainConfig,
    arch: &PcfConfig,
    reference: ReferenceChoice,
    operators: &[TmoOperator],
    train: &[DatasetSample],
    test: &[DatasetSample],
) -> Result<Vec<AblationRow>, TrainError> {
    let arch = arch.for_reference(reference);
    let mut rows = Vec::with_capacity(operators.len());
    for &tmo in operators {
        let cfg = TrainConfig { tmo, checkpoint_dir: None, ..cfg.clone() };
        let items = pcf_items(train, None, reference, tmo)?;
        let init = ModelWeights::init(Architecture::Pcf(arch.clone()), cfg.seed);
        let w = train_pcf(&cfg, init, &items)?.weights;
        let mut report = MetricReport::default();
        for (i, s) in test.iter().enumerate() {
            let stages = prepare_frames(&s.variant(reference), None, tmo, RADIANCE_CEILING)?;
            let out = inverse(&fuse(&w, &stages, reference, tmo)?)?;
            let rec = MetricRecord::measure(format!("sample_{i:04}"), &out.0, &s.ground_truth.0)
                .map_err(crate::pipeline::PipelineError::from)?;
            report.push(rec);
        }
        rows.push(AblationRow { tmo: tmo.name().to_string(), means: report.means(), report });
    }
    Ok(rows)
}
