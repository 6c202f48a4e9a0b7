//! PSNR and SSIM in the μ-law and linear domains.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt::Write as _;

use crate::image::Image;
use crate::imaging::{tmo_mu_law, ImagingError, DEFAULT_MU};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("image {h}×{w} smaller than the {window}×{window} window")]
    TooSmall { h: usize, w: usize, window: usize },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// Where a metric is measured. Inputs are normalized radiance in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricDomain {
    /// After μ-law compression with μ = 5000.
    Mu,
    Linear,
}

fn check(a: &Image, b: &Image) -> Result<(), MetricError> {
    if a.dims() != b.dims() {
        return Err(MetricError::Shape(format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

fn to_domain(img: &Image, domain: MetricDomain) -> Result<Image, MetricError> {
    Ok(match domain {
        MetricDomain::Linear => img.clone(),
        MetricDomain::Mu => tmo_mu_law(img, DEFAULT_MU)?.pixels,
    })
}

pub fn mse(a: &Image, b: &Image) -> Result<f64, MetricError> {
    check(a, b)?;
    let s: f64 = a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
    Ok(s / a.data().len().max(1) as f64)
}

/// `10·log10(1/MSE)` with unit peak; `+∞` on an exact match.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

pub fn psnr(pred: &Image, gt: &Image, domain: MetricDomain) -> Result<f64, MetricError> {
    check(pred, gt)?;
    Ok(psnr_from_mse(mse(&to_domain(pred, domain)?, &to_domain(gt, domain)?)?))
}

pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        *v = (-(i as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable "valid" Gaussian filtering of an `h×w` plane.
fn blur(src: &[f64], h: usize, w: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h + 1 - SSIM_WINDOW, w + 1 - SSIM_WINDOW);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * src[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean local SSIM (11×11 Gaussian window, σ = 1.5, unit dynamic range),
/// averaged over channels.
pub fn ssim(pred: &Image, gt: &Image, domain: MetricDomain) -> Result<f64, MetricError> {
    check(pred, gt)?;
    let (h, w) = (pred.height(), pred.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(MetricError::TooSmall { h, w, window: SSIM_WINDOW });
    }
    let (a, b) = (to_domain(pred, domain)?, to_domain(gt, domain)?);
    let k = gaussian_taps();
    let mut total = 0.0;
    for c in 0..a.channels() {
        let x: Vec<f64> = a.plane(c).iter().map(|&v| v as f64).collect();
        let y: Vec<f64> = b.plane(c).iter().map(|&v| v as f64).collect();
        let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(u, v)| u * v).collect::<Vec<_>>();
        let mx = blur(&x, h, w, &k);
        let my = blur(&y, h, w, &k);
        let sxx = blur(&prod(&x, &x), h, w, &k);
        let syy = blur(&prod(&y, &y), h, w, &k);
        let sxy = blur(&prod(&x, &y), h, w, &k);
        let n = mx.len();
        let s: f64 = (0..n)
            .map(|i| {
                let (ux, uy) = (mx[i], my[i]);
                let vx = sxx[i] - ux * ux;
                let vy = syy[i] - uy * uy;
                let cxy = sxy[i] - ux * uy;
                ((2.0 * ux * uy + C1) * (2.0 * cxy + C2)) / ((ux * ux + uy * uy + C1) * (vx + vy + C2))
            })
            .sum();
        total += s / n as f64;
    }
    Ok(total / a.channels() as f64)
}

/// PSNR values may be infinite; JSON carries them as the string `"inf"`.
mod db {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad dB value '{s}'"))),
        }
    }
}

/// Metrics of one image against its ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub id: String,
    #[serde(with = "db")]
    pub psnr_mu: f64,
    #[serde(with = "db")]
    pub psnr_l: f64,
    pub ssim_mu: f64,
    pub ssim_l: f64,
}

impl MetricRecord {
    /// `pred` and `gt` are normalized linear radiance.
    pub fn measure(id: impl Into<String>, pred: &Image, gt: &Image) -> Result<Self, MetricError> {
        Ok(Self {
            id: id.into(),
            psnr_mu: psnr(pred, gt, MetricDomain::Mu)?,
            psnr_l: psnr(pred, gt, MetricDomain::Linear)?,
            ssim_mu: ssim(pred, gt, MetricDomain::Mu)?,
            ssim_l: ssim(pred, gt, MetricDomain::Linear)?,
        })
    }

    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::PsnrMu => self.psnr_mu,
            Metric::PsnrL => self.psnr_l,
            Metric::SsimMu => self.ssim_mu,
            Metric::SsimL => self.ssim_l,
        }
    }
}

/// A scalar quality score usable as a selection criterion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    PsnrMu,
    PsnrL,
    SsimMu,
    SsimL,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::PsnrMu, Metric::PsnrL, Metric::SsimMu, Metric::SsimL];

    pub fn name(self) -> &'static str {
        match self {
            Metric::PsnrMu => "psnr_mu",
            Metric::PsnrL => "psnr_l",
            Metric::SsimMu => "ssim_mu",
            Metric::SsimL => "ssim_l",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn evaluate(self, pred: &Image, gt: &Image) -> Result<f64, MetricError> {
        match self {
            Metric::PsnrMu => psnr(pred, gt, MetricDomain::Mu),
            Metric::PsnrL => psnr(pred, gt, MetricDomain::Linear),
            Metric::SsimMu => ssim(pred, gt, MetricDomain::Mu),
            Metric::SsimL => ssim(pred, gt, MetricDomain::Linear),
        }
    }
}

/// Per-image records and their means.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub records: Vec<MetricRecord>,
}

impl MetricReport {
    pub fn push(&mut self, r: MetricRecord) {
        self.records.push(r);
    }

    /// Arithmetic mean of one metric (`+∞` if any record is infinite).
    pub fn mean(&self, m: Metric) -> f64 {
        if self.records.is_empty() {
            return f64::NAN;
        }
        self.records.iter().map(|r| r.metric(m)).sum::<f64>() / self.records.len() as f64
    }

    pub fn means(&self) -> [f64; 4] {
        Metric::ALL.map(|m| self.mean(m))
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.records.iter().map(|r| serde_json::to_string(r).expect("record serializes") + "\n").collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let records = text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect::<Result<_, _>>()?;
        Ok(Self { records })
    }
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.2}")
    }
}

/// Plain-text table with one row per labelled report.
pub fn render_table(label: &str, rows: &[(String, [f64; 4])]) -> String {
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(label.len());
    let mut out = format!("{label:<width$}  {:>8}  {:>8}  {:>8}  {:>8}\n", "PSNR-μ", "PSNR-L", "SSIM-μ", "SSIM-L");
    for (name, m) in rows {
        let _ = writeln!(
            out,
            "{name:<width$}  {:>8}  {:>8}  {:>8.4}  {:>8.4}",
            fmt_db(m[0]),
            fmt_db(m[1]),
            m[2],
            m[3]
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured() -> Image {
        Image::from_fn(3, 24, 24, |c, y, x| 0.5 + 0.3 * ((x as f32 * 0.7 + c as f32).sin() * (y as f32 * 0.4).cos()))
    }

    #[test]
    fn psnr_examples() {
        let a = textured();
        assert_eq!(psnr(&a, &a, MetricDomain::Linear).unwrap(), f64::INFINITY);
        assert!((psnr_from_mse(0.01) - 20.0).abs() < 1e-12);
        assert_eq!(psnr_from_mse(1.0), 0.0);
        let z = Image::filled(1, 4, 4, 0.0);
        let o = Image::filled(1, 4, 4, 1.0);
        assert_eq!(psnr(&z, &o, MetricDomain::Linear).unwrap(), 0.0);
        let b = a.map(|v| v + 0.1);
        let ab = psnr(&a, &b, MetricDomain::Mu).unwrap();
        assert_eq!(ab, psnr(&b, &a, MetricDomain::Mu).unwrap());
        assert!((psnr(&a, &b, MetricDomain::Linear).unwrap() - 20.0).abs() < 1e-4);
    }

    #[test]
    fn ssim_examples() {
        let a = textured();
        assert!((ssim(&a, &a, MetricDomain::Linear).unwrap() - 1.0).abs() < 1e-12);
        let inv = a.map(|v| 1.0 - v);
        assert!(ssim(&inv, &a, MetricDomain::Linear).unwrap() < 1.0);
        let g = Image::filled(1, 16, 16, 0.5);
        assert!((ssim(&g, &g, MetricDomain::Mu).unwrap() - 1.0).abs() < 1e-12);
        let s1 = ssim(&a, &inv, MetricDomain::Mu).unwrap();
        let s2 = ssim(&inv, &a, MetricDomain::Mu).unwrap();
        assert!((s1 - s2).abs() < 1e-12 && (-1.0..=1.0).contains(&s1));
        assert!(matches!(ssim(&Image::filled(1, 8, 8, 0.0), &Image::filled(1, 8, 8, 0.0), MetricDomain::Mu), Err(MetricError::TooSmall { .. })));
    }

    #[test]
    fn report_jsonl_round_trip_with_infinity() {
        let a = textured();
        let mut rep = MetricReport::default();
        rep.push(MetricRecord::measure("same", &a, &a).unwrap());
        rep.push(MetricRecord::measure("off", &a, &a.map(|v| v * 0.9)).unwrap());
        let text = rep.to_jsonl();
        assert!(text.contains("\"inf\""));
        let back = MetricReport::from_jsonl(&text).unwrap();
        assert_eq!(back, rep);
        assert_eq!(rep.mean(Metric::PsnrMu), f64::INFINITY);
        let table = render_table("variant", &[("x".into(), rep.means())]);
        assert_eq!(table.lines().count(), 2);
    }
}
