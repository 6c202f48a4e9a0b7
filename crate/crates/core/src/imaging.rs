//! Radiometric domain types and the closed-form transforms between them:
//! gamma expansion, exposure alignment, and the tone-mapping family.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::image::Image;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ImagingError {
    #[error("invalid exposure time {0} (must be finite and > 0)")]
    InvalidExposure(f64),
    #[error("value {value} outside the {operator} domain [0, 1]")]
    Domain { operator: &'static str, value: f32 },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub const ISO_MIN: f64 = 50.0;
pub const ISO_MAX: f64 = 3200.0;

/// Default μ-law compression.
pub const DEFAULT_MU: f64 = 5000.0;

/// Encoding exponent of a capture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma {
    /// Display-encoded RGB, γ = 2.2.
    Rgb,
    /// Linear sensor data, γ = 1.
    Raw,
}

impl Gamma {
    pub fn value(self) -> f64 {
        match self {
            Gamma::Rgb => 2.2,
            Gamma::Raw => 1.0,
        }
    }

    /// Quantization depth of the simulated capture.
    pub fn bit_depth(self) -> u32 {
        match self {
            Gamma::Rgb => 8,
            Gamma::Raw => 12,
        }
    }
}

/// Reference frame of a fusion path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceChoice {
    Under = 0,
    Medium = 1,
    Over = 2,
}

impl ReferenceChoice {
    pub const ALL: [ReferenceChoice; 3] = [Self::Under, Self::Medium, Self::Over];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Largest score wins; ties go to the smaller index. NaN never wins.
    pub fn argmax(scores: &[f64; 3]) -> Self {
        let mut best = 0;
        for i in 1..3 {
            if scores[i] > scores[best] || (scores[best].is_nan() && !scores[i].is_nan()) {
                best = i;
            }
        }
        Self::ALL[best]
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Under => "under",
            Self::Medium => "medium",
            Self::Over => "over",
        }
    }
}

impl fmt::Display for ReferenceChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReferenceChoice {
    type Err = ImagingError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "under" | "0" => Ok(Self::Under),
            "medium" | "1" => Ok(Self::Medium),
            "over" | "2" => Ok(Self::Over),
            other => Err(ImagingError::Config(format!("unknown reference '{other}'"))),
        }
    }
}

/// A quantized capture with its exposure metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct LdrImage {
    pixels: Image,
    exposure_time: f64,
    iso: f64,
    ev: f64,
    gamma: Gamma,
}

impl LdrImage {
    pub fn new(pixels: Image, exposure_time: f64, iso: f64, ev: f64, gamma: Gamma) -> Result<Self, ImagingError> {
        check_exposure(exposure_time)?;
        if !(ISO_MIN..=ISO_MAX).contains(&iso) {
            return Err(ImagingError::InvalidImage(format!("iso {iso} outside [{ISO_MIN}, {ISO_MAX}]")));
        }
        if !ev.is_finite() {
            return Err(ImagingError::InvalidImage("non-finite EV".into()));
        }
        if let Some(&v) = pixels.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ImagingError::Domain { operator: "ldr", value: v });
        }
        Ok(Self { pixels, exposure_time, iso, ev, gamma })
    }

    pub fn pixels(&self) -> &Image {
        &self.pixels
    }
    pub fn exposure_time(&self) -> f64 {
        self.exposure_time
    }
    pub fn iso(&self) -> f64 {
        self.iso
    }
    pub fn ev(&self) -> f64 {
        self.ev
    }
    pub fn gamma(&self) -> Gamma {
        self.gamma
    }
}

/// Linear-light capture `I^γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearImage(pub Image);

/// Exposure-normalized radiance `I^γ / t`.
#[derive(Clone, Debug, PartialEq)]
pub struct HdrDomainImage(pub Image);

impl HdrDomainImage {
    /// Divides by the fixed radiance ceiling and clips to `[0, 1]` so the
    /// result is a valid tone-mapping input.
    pub fn normalized(&self, ceiling: f64) -> Image {
        let inv = (1.0 / ceiling) as f32;
        self.0.map(|v| (v * inv).clamp(0.0, 1.0))
    }
}

/// Output of a tone-mapping operator, tagged with the operator.
#[derive(Clone, Debug, PartialEq)]
pub struct TonemappedImage {
    pub pixels: Image,
    pub operator: TmoOperator,
}

/// Scene metadata used by the reference selector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenePriors {
    /// log2 of mean scene radiance.
    pub brightness: f64,
    pub iso: f64,
    pub ev_steps: [f64; 3],
}

impl ScenePriors {
    pub fn validate(&self) -> Result<(), ImagingError> {
        if !self.brightness.is_finite() || self.ev_steps.iter().any(|v| !v.is_finite()) {
            return Err(ImagingError::InvalidImage("non-finite prior".into()));
        }
        if !(ISO_MIN..=ISO_MAX).contains(&self.iso) {
            return Err(ImagingError::InvalidImage(format!("iso {} outside [{ISO_MIN}, {ISO_MAX}]", self.iso)));
        }
        Ok(())
    }

    /// Fixed-scale feature vector fed to the selector head.
    pub fn features(&self) -> [f32; 5] {
        [
            (self.brightness / 8.0) as f32,
            (self.iso / ISO_MAX) as f32,
            (self.ev_steps[0] / 4.0) as f32,
            (self.ev_steps[1] / 4.0) as f32,
            (self.ev_steps[2] / 4.0) as f32,
        ]
    }
}

/// Three captures ordered under / medium / over.
#[derive(Clone, Debug, PartialEq)]
pub struct ExposureBracket {
    frames: [LdrImage; 3],
    priors: ScenePriors,
}

impl ExposureBracket {
    pub fn new(frames: [LdrImage; 3], priors: ScenePriors) -> Result<Self, ImagingError> {
        priors.validate()?;
        let t: Vec<f64> = frames.iter().map(|f| f.exposure_time).collect();
        if !(t[0] < t[1] && t[1] < t[2]) {
            return Err(ImagingError::InvalidImage(format!("exposure times {t:?} not strictly increasing")));
        }
        let d = frames[0].pixels.dims();
        if frames.iter().any(|f| f.pixels.dims() != d || f.gamma != frames[0].gamma) {
            return Err(ImagingError::InvalidImage("bracket frames differ in shape or gamma".into()));
        }
        Ok(Self { frames, priors })
    }

    pub fn frames(&self) -> &[LdrImage; 3] {
        &self.frames
    }

    pub fn frame(&self, r: ReferenceChoice) -> &LdrImage {
        &self.frames[r.index()]
    }

    pub fn priors(&self) -> &ScenePriors {
        &self.priors
    }
}

fn check_exposure(t: f64) -> Result<(), ImagingError> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(ImagingError::InvalidExposure(t))
    }
}

/// `I^γ` elementwise.
pub fn gamma_expand(img: &LdrImage) -> LinearImage {
    let g = img.gamma.value();
    if g == 1.0 {
        return LinearImage(img.pixels.clone());
    }
    LinearImage(img.pixels.map(|v| (v as f64).powf(g) as f32))
}

/// `L / t` elementwise.
pub fn exposure_align(lin: &LinearImage, t: f64) -> Result<HdrDomainImage, ImagingError> {
    check_exposure(t)?;
    Ok(HdrDomainImage(lin.0.map(|v| (v as f64 / t) as f32)))
}

/// Tone-mapping operators; every kind maps `[0,1]` onto `[0,1]` strictly
/// increasingly and has a closed-form inverse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TmoOperator {
    Linear,
    Gamma22,
    /// `2x / (1 + x)`: the global Reinhard curve rescaled so 1 maps to 1.
    Reinhard,
    /// Hable filmic curve evaluated on `[0, W]`, divided by its value at `W`.
    Hable,
    MuLaw { mu: f64 },
}

impl Default for TmoOperator {
    fn default() -> Self {
        TmoOperator::MuLaw { mu: DEFAULT_MU }
    }
}

// Hable filmic shoulder/toe constants and white point.
const HABLE_A: f64 = 0.15;
const HABLE_B: f64 = 0.50;
const HABLE_C: f64 = 0.10;
const HABLE_D: f64 = 0.20;
const HABLE_E: f64 = 0.02;
const HABLE_F: f64 = 0.30;
const HABLE_W: f64 = 11.2;

fn hable_raw(u: f64) -> f64 {
    let num = u * (HABLE_A * u + HABLE_C * HABLE_B) + HABLE_D * HABLE_E;
    let den = u * (HABLE_A * u + HABLE_B) + HABLE_D * HABLE_F;
    num / den - HABLE_E / HABLE_F
}

fn hable_raw_derivative(u: f64) -> f64 {
    let num = u * (HABLE_A * u + HABLE_C * HABLE_B) + HABLE_D * HABLE_E;
    let den = u * (HABLE_A * u + HABLE_B) + HABLE_D * HABLE_F;
    let dnum = 2.0 * HABLE_A * u + HABLE_C * HABLE_B;
    let dden = 2.0 * HABLE_A * u + HABLE_B;
    (dnum * den - num * dden) / (den * den)
}

/// Nonnegative root of `hable_raw(u) = target`.
fn hable_raw_inverse(target: f64) -> f64 {
    let z = target + HABLE_E / HABLE_F;
    let a = HABLE_A * (1.0 - z);
    let b = HABLE_B * (HABLE_C - z);
    let c = HABLE_D * (HABLE_E - z * HABLE_F);
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return 0.0;
    }
    (q / a).max(c / q).max(0.0)
}

impl TmoOperator {
    pub const KINDS: [&'static str; 5] = ["linear", "gamma22", "reinhard", "hable", "mu_law"];

    pub fn mu_law() -> Self {
        Self::default()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Gamma22 => "gamma22",
            Self::Reinhard => "reinhard",
            Self::Hable => "hable",
            Self::MuLaw { .. } => "mu_law",
        }
    }

    /// Builds an operator by kind name; `mu` only applies to `mu_law`.
    pub fn from_kind(kind: &str, mu: f64) -> Result<Self, ImagingError> {
        match kind {
            "linear" => Ok(Self::Linear),
            "gamma22" | "gamma" => Ok(Self::Gamma22),
            "reinhard" => Ok(Self::Reinhard),
            "hable" => Ok(Self::Hable),
            "mu_law" | "mu" => {
                if !(mu.is_finite() && mu > 0.0) {
                    return Err(ImagingError::Config(format!("mu must be > 0, got {mu}")));
                }
                Ok(Self::MuLaw { mu })
            }
            other => Err(ImagingError::Config(format!("unknown tone-mapping operator '{other}'"))),
        }
    }

    pub fn forward(&self, x: f64) -> f64 {
        match *self {
            Self::Linear => x,
            Self::Gamma22 => x.powf(1.0 / 2.2),
            Self::Reinhard => 2.0 * x / (1.0 + x),
            Self::Hable => hable_raw(HABLE_W * x) / hable_raw(HABLE_W),
            Self::MuLaw { mu } => (mu * x).ln_1p() / mu.ln_1p(),
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        match *self {
            Self::Linear => y,
            Self::Gamma22 => y.powf(2.2),
            Self::Reinhard => y / (2.0 - y),
            Self::Hable => hable_raw_inverse(y * hable_raw(HABLE_W)) / HABLE_W,
            Self::MuLaw { mu } => (y * mu.ln_1p()).exp_m1() / mu,
        }
    }

    /// `d forward / dx`; unbounded at 0 for `gamma22`.
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Self::Linear => 1.0,
            Self::Gamma22 => x.powf(1.0 / 2.2 - 1.0) / 2.2,
            Self::Reinhard => 2.0 / ((1.0 + x) * (1.0 + x)),
            Self::Hable => HABLE_W * hable_raw_derivative(HABLE_W * x) / hable_raw(HABLE_W),
            Self::MuLaw { mu } => mu / ((1.0 + mu * x) * mu.ln_1p()),
        }
    }
}

fn check_unit(img: &Image, operator: &'static str) -> Result<(), ImagingError> {
    match img.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(&value) => Err(ImagingError::Domain { operator, value }),
        None => Ok(()),
    }
}

/// Forward tone mapping of a normalized linear image.
pub fn tmo_apply(x: &Image, op: TmoOperator) -> Result<TonemappedImage, ImagingError> {
    check_unit(x, op.name())?;
    Ok(TonemappedImage { pixels: x.map(|v| op.forward(v as f64) as f32), operator: op })
}

/// Inverse tone mapping back to normalized linear values.
pub fn inv_tmo_apply(y: &Image, op: TmoOperator) -> Result<Image, ImagingError> {
    check_unit(y, op.name())?;
    Ok(y.map(|v| op.inverse(v as f64) as f32))
}

/// `log(1 + μx) / log(1 + μ)`.
pub fn tmo_mu_law(x: &Image, mu: f64) -> Result<TonemappedImage, ImagingError> {
    tmo_apply(x, TmoOperator::from_kind("mu_law", mu)?)
}

/// `((1 + μ)^y − 1) / μ`.
pub fn inv_tmo_mu_law(y: &Image, mu: f64) -> Result<Image, ImagingError> {
    inv_tmo_apply(y, TmoOperator::from_kind("mu_law", mu)?)
}
