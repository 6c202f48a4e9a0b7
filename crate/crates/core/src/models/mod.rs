//! The three trainable networks and their weight containers.
//!
//! Forward passes are written once against [`Graph<T>`] so the same code
//! trains in `f32` and is gradient-checked in `f64`.

mod checkpoint;
pub mod gradcheck;
mod layers;
mod pcf;
mod predn;
mod ranet;

use std::collections::BTreeMap;

use jointhdr_autograd::{Graph, GraphError, Scalar, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_weights, read_architecture, save_weights, CHECKPOINT_VERSION};
pub use pcf::{drdb_forward, msa_attention, pcf_forward, pyramid_encode, FeaturePyramid, FrameInput, PcfConfig, FRAME_CHANNELS};
pub use predn::{predn_forward, PreDnConfig};
pub use ranet::{ranet_forward, RaNetConfig, PRIOR_FEATURES, RANET_INPUT};

use crate::image::Image;
use crate::imaging::{ReferenceChoice, ScenePriors, TonemappedImage, ISO_MAX};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("weights are for {found}, expected {expected}")]
    Architecture { expected: String, found: String },
    #[error("path mismatch: weights trained for {weights} reference, called with {requested}")]
    Path { weights: ReferenceChoice, requested: ReferenceChoice },
    #[error("parameter {0} is missing")]
    MissingParam(String),
    #[error("parameter {0} is not finite")]
    NonFinite(String),
    #[error("io error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed checkpoint {path}: {message}")]
    Parse { path: String, message: String },
}

impl From<GraphError> for ModelError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Shape(s) => ModelError::Shape(s),
        }
    }
}

/// Network family and topology of a weight set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Architecture {
    PreDn(PreDnConfig),
    Pcf(PcfConfig),
    RaNet(RaNetConfig),
}

impl Architecture {
    pub fn family(&self) -> &'static str {
        match self {
            Architecture::PreDn(_) => "pre_dn",
            Architecture::Pcf(_) => "pcf",
            Architecture::RaNet(_) => "ra_net",
        }
    }

    /// Declared parameters in a fixed order.
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        match self {
            Architecture::PreDn(c) => c.param_specs(),
            Architecture::Pcf(c) => c.param_specs(),
            Architecture::RaNet(c) => c.param_specs(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_specs().iter().map(|p| p.shape.iter().product::<usize>()).sum()
    }

    /// Name of the size preset this topology was built from, if any.
    pub fn preset(&self) -> &str {
        match self {
            Architecture::PreDn(c) => &c.preset,
            Architecture::Pcf(c) => &c.preset,
            Architecture::RaNet(c) => &c.preset,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform He initialization for leaky-ReLU layers.
    He { fan_in: usize },
    Zeros,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

/// Named parameter arrays bound to an architecture tag and creation seed.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights {
    arch: Architecture,
    seed: u64,
    params: BTreeMap<String, Tensor<f32>>,
}

impl ModelWeights {
    /// Seeded initialization of every declared parameter.
    pub fn init(arch: Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = arch
            .param_specs()
            .into_iter()
            .map(|spec| {
                let n: usize = spec.shape.iter().product();
                let data = match spec.init {
                    Init::Zeros => vec![0.0; n],
                    Init::He { fan_in } => {
                        let bound = (6.0 / (1.04 * fan_in as f64)).sqrt() as f32;
                        (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
                    }
                };
                (spec.name, Tensor::new(&spec.shape, data).expect("spec shape"))
            })
            .collect();
        Self { arch, seed, params }
    }

    /// Builds weights from explicit arrays, validating names, shapes and
    /// finiteness against the architecture.
    pub fn from_params(arch: Architecture, seed: u64, params: BTreeMap<String, Tensor<f32>>) -> Result<Self, ModelError> {
        let specs = arch.param_specs();
        if specs.len() != params.len() {
            return Err(ModelError::Shape(format!("{} parameters for {} declared", params.len(), specs.len())));
        }
        for spec in &specs {
            let t = params.get(&spec.name).ok_or_else(|| ModelError::MissingParam(spec.name.clone()))?;
            if t.shape() != spec.shape.as_slice() {
                return Err(ModelError::Shape(format!("{}: {:?} vs declared {:?}", spec.name, t.shape(), spec.shape)));
            }
            if !t.all_finite() {
                return Err(ModelError::NonFinite(spec.name.clone()));
            }
        }
        Ok(Self { arch, seed, params })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<f32>> {
        self.params.get_mut(name)
    }

    /// Parameters in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<f32>)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor<f32>)> {
        self.params.iter_mut()
    }

    pub fn param_count(&self) -> usize {
        self.params.values().map(|t| t.numel()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.params.values().all(|t| t.all_finite())
    }

    /// Records every parameter on `g`, as trainable leaves or as constants.
    pub fn bind<T: Scalar>(&self, g: &mut Graph<T>, trainable: bool) -> Bound {
        let vars = self
            .params
            .iter()
            .map(|(name, t)| {
                let t = t.cast::<T>();
                let v = if trainable { g.param(t) } else { g.input(t) };
                (name.clone(), v)
            })
            .collect();
        Bound { vars }
    }

    /// Parameters converted to another precision.
    pub fn cast_params<T: Scalar>(&self) -> BTreeMap<String, Tensor<T>> {
        self.params.iter().map(|(k, t)| (k.clone(), t.cast())).collect()
    }
}

/// Graph handles of a bound weight set.
#[derive(Clone, Debug)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    /// Binds explicit arrays (e.g. `f64` copies used for gradient checks).
    pub fn from_tensors<T: Scalar>(g: &mut Graph<T>, params: &BTreeMap<String, Tensor<T>>, trainable: bool) -> Self {
        let vars = params
            .iter()
            .map(|(name, t)| (name.clone(), if trainable { g.param(t.clone()) } else { g.input(t.clone()) }))
            .collect();
        Self { vars }
    }

    pub fn var(&self, name: &str) -> Result<Var, ModelError> {
        self.vars.get(name).copied().ok_or_else(|| ModelError::MissingParam(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.vars.iter()
    }
}

/// A single reference path is selected by this tag on PCF weights.
pub fn pcf_reference(w: &ModelWeights) -> Option<ReferenceChoice> {
    match w.arch() {
        Architecture::Pcf(c) => Some(c.reference),
        _ => None,
    }
}

/// Stacks equally sized images into an `[n, c, h, w]` tensor.
pub fn batch<T: Scalar>(imgs: &[&Image]) -> Result<Tensor<T>, ModelError> {
    let Some(first) = imgs.first() else {
        return Err(ModelError::Shape("empty batch".into()));
    };
    let d = first.dims();
    let mut data = Vec::with_capacity(imgs.len() * d.numel());
    for img in imgs {
        if img.dims() != d {
            return Err(ModelError::Shape(format!("batch mixes {:?} and {:?}", d, img.dims())));
        }
        data.extend(img.data().iter().map(|&v| T::from_f64(v as f64)));
    }
    Ok(Tensor::new(&[imgs.len(), d.channels, d.height, d.width], data)?)
}

/// Splits an `[n, c, h, w]` tensor into images.
pub fn unbatch<T: Scalar>(t: &Tensor<T>) -> Result<Vec<Image>, ModelError> {
    let (n, c, h, w) = t.dims4()?;
    let per = c * h * w;
    Ok((0..n)
        .map(|i| {
            let data = t.data()[i * per..(i + 1) * per].iter().map(|v| v.as_f64() as f32).collect();
            Image::new(c, h, w, data).expect("dims")
        })
        .collect())
}

fn expect_arch<'a, C>(
    w: &'a ModelWeights,
    expected: &str,
    pick: impl Fn(&'a Architecture) -> Option<&'a C>,
) -> Result<&'a C, ModelError> {
    pick(w.arch()).ok_or_else(|| ModelError::Architecture { expected: expected.into(), found: w.arch().family().into() })
}

pub(crate) fn predn_config(w: &ModelWeights) -> Result<&PreDnConfig, ModelError> {
    expect_arch(w, "pre_dn", |a| if let Architecture::PreDn(c) = a { Some(c) } else { None })
}

pub(crate) fn pcf_config(w: &ModelWeights) -> Result<&PcfConfig, ModelError> {
    expect_arch(w, "pcf", |a| if let Architecture::Pcf(c) = a { Some(c) } else { None })
}

pub(crate) fn ranet_config(w: &ModelWeights) -> Result<&RaNetConfig, ModelError> {
    expect_arch(w, "ra_net", |a| if let Architecture::RaNet(c) = a { Some(c) } else { None })
}

/// Constant `iso/3200` plane.
pub fn iso_plane(iso: f64, height: usize, width: usize) -> Image {
    Image::filled(1, height, width, (iso / ISO_MAX) as f32)
}

/// Inference-only denoising of one tone-mapped frame.
pub fn run_predn(w: &ModelWeights, x: &TonemappedImage, iso: f64) -> Result<TonemappedImage, ModelError> {
    let cfg = predn_config(w)?;
    let mut g = Graph::<f32>::new();
    let p = w.bind(&mut g, false);
    let plane = iso_plane(iso, x.pixels.height(), x.pixels.width());
    let xv = g.input(batch(&[&x.pixels])?);
    let iv = g.input(batch(&[&plane])?);
    let y = predn_forward(&mut g, cfg, &p, xv, iv)?;
    let pixels = unbatch(g.value(y))?.remove(0);
    Ok(TonemappedImage { pixels, operator: x.operator })
}

/// Per-frame fusion input as images: `(denoised T(L), T(H))`.
pub type FrameImages = (Image, Image);

/// Inference-only fusion on the path the weights were trained for.
pub fn run_pcf(w: &ModelWeights, frames: &[FrameImages; 3], reference: ReferenceChoice) -> Result<Image, ModelError> {
    let cfg = pcf_config(w)?;
    let mut g = Graph::<f32>::new();
    let p = w.bind(&mut g, false);
    let mut inputs = Vec::with_capacity(3);
    for (ldr, hdr) in frames {
        inputs.push(FrameInput { ldr: g.input(batch(&[ldr])?), hdr: g.input(batch(&[hdr])?) });
    }
    let inputs: [FrameInput; 3] = inputs.try_into().expect("three frames");
    let y = pcf_forward(&mut g, cfg, &p, &inputs, reference)?;
    Ok(unbatch(g.value(y))?.remove(0))
}

/// Selector logits for a 9-channel 224² input.
pub fn run_ranet(w: &ModelWeights, x: &Image, priors: &ScenePriors) -> Result<[f64; 3], ModelError> {
    let cfg = ranet_config(w)?;
    let mut g = Graph::<f32>::new();
    let p = w.bind(&mut g, false);
    let xv = g.input(batch(&[x])?);
    let pv = g.input(Tensor::new(&[1, PRIOR_FEATURES], priors.features().to_vec())?);
    let y = ranet_forward(&mut g, cfg, &p, xv, pv)?;
    let d = g.value(y).data();
    Ok([d[0] as f64, d[1] as f64, d[2] as f64])
}
