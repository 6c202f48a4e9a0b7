//! Inference orchestration: tone mapping, per-frame denoising, reference
//! selection, path-specific fusion and the inverse tone map, plus the
//! on-disk pipeline bundle.

mod bundle;
mod stages;

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use bundle::{load_pipeline, save_pipeline, BundleManifest, BUNDLE_VERSION};
pub use stages::{fuse, fusion_inputs, inverse, prepare_frames, selector_input, FrameStages};

use crate::image::Image;
use crate::imaging::{ExposureBracket, HdrDomainImage, ReferenceChoice, TmoOperator, TonemappedImage};
use crate::metrics::{Metric, MetricError, MetricRecord, MetricReport};
use crate::models::{load_weights, run_ranet, Architecture, ModelError, ModelWeights};
use crate::sim::{DatasetSample, RADIANCE_CEILING};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("stage {stage} failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("fusion path for {0} reference is missing")]
    MissingPath(ReferenceChoice),
    #[error("inconsistent components: {0}")]
    Inconsistent(String),
    #[error("bundle version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("io error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl PipelineError {
    pub(crate) fn stage<E: std::fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> PipelineError {
        move |e| PipelineError::Stage { stage, message: e.to_string() }
    }
}

/// Weights of one fusion path, either resident or loaded on first use.
#[derive(Debug)]
pub(crate) struct PathSlot {
    dir: Option<PathBuf>,
    cell: OnceLock<ModelWeights>,
}

impl PathSlot {
    fn loaded(w: ModelWeights) -> Self {
        let cell = OnceLock::new();
        let _ = cell.set(w);
        Self { dir: None, cell }
    }

    fn lazy(dir: PathBuf) -> Self {
        Self { dir: Some(dir), cell: OnceLock::new() }
    }

    fn get(&self, r: ReferenceChoice) -> Result<&ModelWeights, PipelineError> {
        if let Some(w) = self.cell.get() {
            return Ok(w);
        }
        let dir = self.dir.as_ref().ok_or(PipelineError::MissingPath(r))?;
        if !dir.exists() {
            return Err(PipelineError::MissingPath(r));
        }
        let w = load_weights(dir)?;
        check_path_arch(w.arch(), r)?;
        Ok(self.cell.get_or_init(|| w))
    }

    fn is_resident(&self) -> bool {
        self.cell.get().is_some()
    }
}

fn check_path_arch(arch: &Architecture, slot: ReferenceChoice) -> Result<(), PipelineError> {
    match arch {
        Architecture::Pcf(c) if c.reference == slot => Ok(()),
        Architecture::Pcf(c) => Err(PipelineError::Inconsistent(format!(
            "{slot} slot holds weights for the {} reference",
            c.reference
        ))),
        other => Err(PipelineError::Inconsistent(format!("{slot} slot holds {} weights", other.family()))),
    }
}

/// Validates that component tags share one preset, the fusion paths share
/// one topology and every slot holds the right family.
pub fn check_consistency(
    predn: Option<&Architecture>,
    paths: &[Architecture; 3],
    ranet: Option<&Architecture>,
) -> Result<(), PipelineError> {
    for (slot, arch) in ReferenceChoice::ALL.iter().zip(paths) {
        check_path_arch(arch, *slot)?;
    }
    let topo = |a: &Architecture| match a {
        Architecture::Pcf(c) => Some((c.widths.clone(), c.growth, c.preset.clone())),
        _ => None,
    };
    if paths.iter().any(|a| topo(a) != topo(&paths[0])) {
        return Err(PipelineError::Inconsistent("fusion paths differ in topology".into()));
    }
    let preset = paths[0].preset();
    if let Some(a) = predn {
        if !matches!(a, Architecture::PreDn(_)) {
            return Err(PipelineError::Inconsistent(format!("denoiser slot holds {} weights", a.family())));
        }
        if a.preset() != preset {
            return Err(PipelineError::Inconsistent(format!("denoiser preset {} vs paths {preset}", a.preset())));
        }
    }
    if let Some(a) = ranet {
        if !matches!(a, Architecture::RaNet(_)) {
            return Err(PipelineError::Inconsistent(format!("selector slot holds {} weights", a.family())));
        }
        if a.preset() != preset {
            return Err(PipelineError::Inconsistent(format!("selector preset {} vs paths {preset}", a.preset())));
        }
    }
    Ok(())
}

/// A denoiser, three reference-specific fusion paths and a selector.
/// Immutable once built; safe to share between threads.
#[derive(Debug)]
pub struct TrainedPipeline {
    pub tmo: TmoOperator,
    pub ceiling: f64,
    predn: Option<ModelWeights>,
    paths: [PathSlot; 3],
    ranet: Option<ModelWeights>,
}

impl TrainedPipeline {
    /// `predn = None` runs without pre-denoising; `ranet = None` requires a
    /// reference override at inference time.
    pub fn new(
        predn: Option<ModelWeights>,
        paths: [ModelWeights; 3],
        ranet: Option<ModelWeights>,
        tmo: TmoOperator,
    ) -> Result<Self, PipelineError> {
        let arches = [paths[0].arch().clone(), paths[1].arch().clone(), paths[2].arch().clone()];
        check_consistency(predn.as_ref().map(|w| w.arch()), &arches, ranet.as_ref().map(|w| w.arch()))?;
        Ok(Self { tmo, ceiling: RADIANCE_CEILING, predn, paths: paths.map(PathSlot::loaded), ranet })
    }

    pub fn predn(&self) -> Option<&ModelWeights> {
        self.predn.as_ref()
    }

    pub fn ranet(&self) -> Option<&ModelWeights> {
        self.ranet.as_ref()
    }

    pub fn with_ranet(mut self, ranet: ModelWeights) -> Result<Self, PipelineError> {
        let r = ranet.arch();
        if !matches!(r, Architecture::RaNet(_)) {
            return Err(PipelineError::Inconsistent(format!("selector slot holds {} weights", r.family())));
        }
        let preset = self.path(ReferenceChoice::Medium)?.arch().preset().to_string();
        if r.preset() != preset {
            return Err(PipelineError::Inconsistent(format!("selector preset {} vs paths {preset}", r.preset())));
        }
        self.ranet = Some(ranet);
        Ok(self)
    }

    /// Weights of path `r`, loading them on first access.
    pub fn path(&self, r: ReferenceChoice) -> Result<&ModelWeights, PipelineError> {
        self.paths[r.index()].get(r)
    }

    /// Whether path `r` is currently in memory.
    pub fn is_resident(&self, r: ReferenceChoice) -> bool {
        self.paths[r.index()].is_resident()
    }

    /// Loads every path (eager mode for evaluation sweeps).
    pub fn load_all(&self) -> Result<(), PipelineError> {
        for r in ReferenceChoice::ALL {
            self.path(r)?;
        }
        Ok(())
    }

    pub(crate) fn from_parts(
        tmo: TmoOperator,
        ceiling: f64,
        predn: Option<ModelWeights>,
        paths: [PathSlot; 3],
        ranet: Option<ModelWeights>,
    ) -> Self {
        Self { tmo, ceiling, predn, paths, ranet }
    }
}

/// Per-stage wall time in milliseconds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub prepare_ms: f64,
    pub select_ms: f64,
    pub fuse_ms: f64,
    pub inverse_ms: f64,
}

#[derive(Clone, Debug)]
pub struct InferenceResult {
    /// Fused estimate in the tone-mapped domain.
    pub hdr_tm: TonemappedImage,
    /// Its inverse: normalized linear radiance (multiply by the ceiling for
    /// absolute radiance).
    pub hdr_linear: HdrDomainImage,
    pub chosen: ReferenceChoice,
    /// `None` when the reference was overridden.
    pub ranet_logits: Option<[f64; 3]>,
    pub timing: StageTiming,
}

/// Picks the fusion path: the override if given, otherwise the selector's
/// argmax over the 224² tone-mapped frames and priors.
pub fn select_reference(
    pipe: &TrainedPipeline,
    bracket: &ExposureBracket,
    override_ref: Option<ReferenceChoice>,
) -> Result<(ReferenceChoice, Option<[f64; 3]>), PipelineError> {
    if let Some(r) = override_ref {
        return Ok((r, None));
    }
    let ranet = pipe.ranet.as_ref().ok_or_else(|| PipelineError::Config("no selector loaded and no reference override".into()))?;
    let x = selector_input(bracket, pipe.tmo)?;
    let logits = run_ranet(ranet, &x, bracket.priors()).map_err(PipelineError::stage("select"))?;
    Ok((ReferenceChoice::argmax(&logits), Some(logits)))
}

/// Full inference on one bracket.
pub fn run_sjhdr(
    pipe: &TrainedPipeline,
    bracket: &ExposureBracket,
    override_ref: Option<ReferenceChoice>,
) -> Result<InferenceResult, PipelineError> {
    let mut timing = StageTiming::default();
    let ms = |t: Instant| t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let stages = prepare_frames(bracket, pipe.predn.as_ref(), pipe.tmo, pipe.ceiling)?;
    timing.prepare_ms = ms(t);

    let t = Instant::now();
    let (chosen, ranet_logits) = select_reference(pipe, bracket, override_ref)?;
    timing.select_ms = ms(t);

    let t = Instant::now();
    let hdr_tm = fuse(pipe.path(chosen)?, &stages, chosen, pipe.tmo)?;
    timing.fuse_ms = ms(t);

    let t = Instant::now();
    let hdr_linear = inverse(&hdr_tm)?;
    timing.inverse_ms = ms(t);

    Ok(InferenceResult { hdr_tm, hdr_linear, chosen, ranet_logits, timing })
}

/// Which path choice an evaluation column uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Fixed(ReferenceChoice),
    /// The selector's choice.
    Selective,
    /// The per-sample best path under the selection metric.
    OracleSelective,
}

impl Variant {
    pub const TABLE: [Variant; 5] = [
        Variant::Fixed(ReferenceChoice::Under),
        Variant::Fixed(ReferenceChoice::Medium),
        Variant::Fixed(ReferenceChoice::Over),
        Variant::Selective,
        Variant::OracleSelective,
    ];

    pub fn label(&self) -> String {
        match self {
            Variant::Fixed(ReferenceChoice::Under) => "U_ref".into(),
            Variant::Fixed(ReferenceChoice::Medium) => "M_ref".into(),
            Variant::Fixed(ReferenceChoice::Over) => "O_ref".into(),
            Variant::Selective => "S_ref".into(),
            Variant::OracleSelective => "S_ref (oracle)".into(),
        }
    }
}

/// Output of all three paths on one sample, each run on its own
/// reference variant and scored against the shared ground truth.
#[derive(Clone, Debug)]
pub struct PathScores {
    pub records: [MetricRecord; 3],
    pub outputs: [Image; 3],
}

impl PathScores {
    pub fn scores(&self, metric: Metric) -> [f64; 3] {
        std::array::from_fn(|i| self.records[i].metric(metric))
    }
}

/// Runs every path on its matching variant of `sample`.
pub fn score_paths(pipe: &TrainedPipeline, sample: &DatasetSample, id: &str) -> Result<PathScores, PipelineError> {
    let mut records = Vec::with_capacity(3);
    let mut outputs = Vec::with_capacity(3);
    for r in ReferenceChoice::ALL {
        let res = run_sjhdr(pipe, &sample.variant(r), Some(r))?;
        records.push(MetricRecord::measure(id, &res.hdr_linear.0, &sample.ground_truth.0)?);
        outputs.push(res.hdr_linear.0);
    }
    Ok(PathScores { records: records.try_into().expect("3"), outputs: outputs.try_into().expect("3") })
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub reports: Vec<(Variant, MetricReport)>,
    /// Selector choices per sample (when the selective variant was run).
    pub selected: Vec<ReferenceChoice>,
    /// Best path per sample under the selection metric.
    pub oracle: Vec<ReferenceChoice>,
    pub metric: Metric,
}

impl Evaluation {
    pub fn report(&self, v: Variant) -> Option<&MetricReport> {
        self.reports.iter().find(|(k, _)| *k == v).map(|(_, r)| r)
    }

    pub fn table(&self) -> String {
        let rows: Vec<(String, [f64; 4])> = self.reports.iter().map(|(v, r)| (v.label(), r.means())).collect();
        crate::metrics::render_table("variant", &rows)
    }
}

/// Scores each requested variant over `samples`. The selective variant
/// feeds the selector the sample's own bracket.
pub fn evaluate(
    pipe: &TrainedPipeline,
    samples: &[DatasetSample],
    variants: &[Variant],
    metric: Metric,
) -> Result<Evaluation, PipelineError> {
    let mut reports: Vec<(Variant, MetricReport)> = variants.iter().map(|&v| (v, MetricReport::default())).collect();
    let mut selected = Vec::new();
    let mut oracle = Vec::new();
    for (i, sample) in samples.iter().enumerate() {
        let id = format!("sample_{i:04}");
        let ps = score_paths(pipe, sample, &id)?;
        let best = ReferenceChoice::argmax(&ps.scores(metric));
        oracle.push(best);
        let chosen = if variants.contains(&Variant::Selective) {
            let (r, _) = select_reference(pipe, &sample.bracket(), None)?;
            selected.push(r);
            Some(r)
        } else {
            None
        };
        for (v, rep) in reports.iter_mut() {
            let r = match v {
                Variant::Fixed(r) => *r,
                Variant::Selective => chosen.expect("selector ran"),
                Variant::OracleSelective => best,
            };
            rep.push(ps.records[r.index()].clone());
        }
    }
    Ok(Evaluation { reports, selected, oracle, metric })
}
