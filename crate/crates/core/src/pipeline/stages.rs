//! The individual inference stages, exposed so callers (training, label
//! generation, tests) can replay the exact composition.

use crate::image::Image;
use crate::imaging::{
    exposure_align, gamma_expand, inv_tmo_apply, tmo_apply, ExposureBracket, HdrDomainImage, LinearImage,
    TmoOperator, TonemappedImage,
};
use crate::models::{run_pcf, run_predn, FrameImages, ModelWeights, RANET_INPUT};
use crate::imaging::ReferenceChoice;

use super::PipelineError;

/// Intermediate results for one bracket frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameStages {
    /// `I^γ`.
    pub linear: LinearImage,
    /// `I^γ / t`.
    pub hdr: HdrDomainImage,
    /// `T(L)`.
    pub ldr_tm: TonemappedImage,
    /// `T(H / ceiling)`.
    pub hdr_tm: TonemappedImage,
    /// Denoised `T(L)`.
    pub denoised: TonemappedImage,
}

/// Gamma expansion, exposure alignment and tone mapping of every frame.
/// `predn = None` skips denoising (identity).
pub fn prepare_frames(
    bracket: &ExposureBracket,
    predn: Option<&ModelWeights>,
    tmo: TmoOperator,
    ceiling: f64,
) -> Result<[FrameStages; 3], PipelineError> {
    let mut out = Vec::with_capacity(3);
    for frame in bracket.frames() {
        let linear = gamma_expand(frame);
        let hdr = exposure_align(&linear, frame.exposure_time()).map_err(PipelineError::stage("exposure_align"))?;
        let ldr_tm = tmo_apply(&linear.0, tmo).map_err(PipelineError::stage("tmo"))?;
        let hdr_tm = tmo_apply(&hdr.normalized(ceiling), tmo).map_err(PipelineError::stage("tmo"))?;
        let denoised = match predn {
            Some(w) => run_predn(w, &ldr_tm, frame.iso()).map_err(PipelineError::stage("pre_denoise"))?,
            None => ldr_tm.clone(),
        };
        out.push(FrameStages { linear, hdr, ldr_tm, hdr_tm, denoised });
    }
    Ok(out.try_into().expect("three frames"))
}

/// Fusion network inputs `(denoised T(L), T(H))` per frame.
pub fn fusion_inputs(stages: &[FrameStages; 3]) -> [FrameImages; 3] {
    std::array::from_fn(|i| (stages[i].denoised.pixels.clone(), stages[i].hdr_tm.pixels.clone()))
}

/// Runs the fusion path and returns the tone-mapped estimate.
pub fn fuse(
    pcf: &ModelWeights,
    stages: &[FrameStages; 3],
    reference: ReferenceChoice,
    tmo: TmoOperator,
) -> Result<TonemappedImage, PipelineError> {
    let pixels = run_pcf(pcf, &fusion_inputs(stages), reference).map_err(PipelineError::stage("fusion"))?;
    Ok(TonemappedImage { pixels, operator: tmo })
}

/// Back to normalized linear radiance.
pub fn inverse(hdr_tm: &TonemappedImage) -> Result<HdrDomainImage, PipelineError> {
    Ok(HdrDomainImage(inv_tmo_apply(&hdr_tm.pixels, hdr_tm.operator).map_err(PipelineError::stage("inverse_tmo"))?))
}

/// Selector input: the three tone-mapped frames area-resized to 224².
pub fn selector_input(bracket: &ExposureBracket, tmo: TmoOperator) -> Result<Image, PipelineError> {
    let mut parts = Vec::with_capacity(3);
    for frame in bracket.frames() {
        let tm = tmo_apply(&gamma_expand(frame).0, tmo).map_err(PipelineError::stage("tmo"))?;
        parts.push(tm.pixels.resize_area(RANET_INPUT, RANET_INPUT));
    }
    Ok(Image::concat_channels(&parts.iter().collect::<Vec<_>>()).expect("same size"))
}
