use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::image::Image;
use crate::imaging::{Gamma, LdrImage, LinearImage};

/// Heteroscedastic Gaussian sensor noise referenced to ISO 100.
///
/// Variance at signal `s` (linear, exposure-scaled) and gain `g = iso/100`
/// is `shot_gain0·g·s + (read_sigma0·g)²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub read_sigma0: f64,
    pub shot_gain0: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { read_sigma0: 5e-4, shot_gain0: 2e-4 }
    }
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self { read_sigma0: 0.0, shot_gain0: 0.0 }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.read_sigma0 >= 0.0 && self.shot_gain0 >= 0.0 {
            Ok(())
        } else {
            Err(SimError::Config("noise coefficients must be >= 0".into()))
        }
    }

    pub fn variance(&self, signal: f64, iso: f64) -> f64 {
        let gain = iso / 100.0;
        self.shot_gain0 * gain * signal.max(0.0) + (self.read_sigma0 * gain).powi(2)
    }

    pub fn is_noiseless(&self) -> bool {
        self.read_sigma0 == 0.0 && self.shot_gain0 == 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CaptureSettings {
    pub exposure_time: f64,
    pub iso: f64,
    pub ev: f64,
    pub gamma: Gamma,
    pub noise: NoiseSpec,
    pub seed: u64,
}

/// `scene·t + n` before clipping or encoding.
pub fn sensor_signal(scene: &LinearImage, exposure_time: f64, noise: &NoiseSpec, iso: f64, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = scene.0.map(|s| (s as f64 * exposure_time) as f32);
    if noise.is_noiseless() {
        return out;
    }
    for v in out.data_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        let s = *v as f64;
        *v = (s + z * noise.variance(s, iso).sqrt()) as f32;
    }
    out
}

/// Rounds `[0,1]` values to the nearest of `2^bits` uniform levels.
pub fn quantize(v: f64, bits: u32) -> f64 {
    let levels = ((1u64 << bits) - 1) as f64;
    (v * levels).round() / levels
}

/// Capture model: `quantize(clip(scene·t + n, 0, 1)^(1/γ))`.
pub fn simulate_exposure(scene: &LinearImage, s: &CaptureSettings) -> Result<LdrImage, SimError> {
    s.noise.validate()?;
    let signal = sensor_signal(scene, s.exposure_time, &s.noise, s.iso, s.seed);
    let inv_gamma = 1.0 / s.gamma.value();
    let bits = s.gamma.bit_depth();
    let pixels = signal.map(|v| quantize((v as f64).clamp(0.0, 1.0).powf(inv_gamma), bits) as f32);
    Ok(LdrImage::new(pixels, s.exposure_time, s.iso, s.ev, s.gamma)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(v: f32, n: usize) -> LinearImage {
        LinearImage(Image::filled(1, n, n, v))
    }

    fn settings(t: f64, iso: f64, gamma: Gamma, noise: NoiseSpec, seed: u64) -> CaptureSettings {
        CaptureSettings { exposure_time: t, iso, ev: 0.0, gamma, noise, seed }
    }

    fn residual_variance(level: f32, iso: f64, seed: u64) -> f64 {
        let scene = flat(level, 320);
        let s = settings(1.0, iso, Gamma::Raw, NoiseSpec::default(), seed);
        let out = simulate_exposure(&scene, &s).unwrap();
        let d = out.pixels().data();
        let n = d.len() as f64;
        d.iter().map(|&v| (v as f64 - level as f64).powi(2)).sum::<f64>() / n
    }

    #[test]
    fn noiseless_round_trip_within_quantization() {
        let scene = LinearImage(Image::from_fn(3, 16, 16, |c, y, x| 0.01 + 0.003 * (c + y * 16 + x) as f32));
        for gamma in [Gamma::Rgb, Gamma::Raw] {
            let s = settings(0.5, 100.0, gamma, NoiseSpec::noiseless(), 0);
            let out = simulate_exposure(&scene, &s).unwrap();
            let step = 1.0 / ((1u64 << gamma.bit_depth()) - 1) as f64;
            for (&q, &v) in out.pixels().data().iter().zip(scene.0.data()) {
                let enc = (v as f64 * 0.5).powf(1.0 / gamma.value());
                assert!((q as f64 - enc).abs() <= 0.5 * step + 1e-7);
            }
        }
    }

    #[test]
    fn saturates_to_one() {
        let s = settings(2.0, 800.0, Gamma::Rgb, NoiseSpec::default(), 1);
        let out = simulate_exposure(&flat(1.5, 16), &s).unwrap();
        assert!(out.pixels().data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn iso_variance_ratio_in_shot_regime() {
        let hi = residual_variance(0.3, 3200.0, 5);
        let lo = residual_variance(0.3, 50.0, 6);
        let ratio = hi / lo;
        assert!((ratio - 64.0).abs() <= 0.2 * 64.0, "ratio {ratio}");
    }

    #[test]
    fn variance_affine_in_signal() {
        let levels: Vec<f64> = (1..=10).map(|i| 0.04 * i as f64).collect();
        let vars: Vec<f64> = levels.iter().enumerate().map(|(i, &l)| residual_variance(l as f32, 800.0, 40 + i as u64)).collect();
        let n = levels.len() as f64;
        let (mx, my) = (levels.iter().sum::<f64>() / n, vars.iter().sum::<f64>() / n);
        let sxy: f64 = levels.iter().zip(&vars).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = levels.iter().map(|x| (x - mx).powi(2)).sum();
        let syy: f64 = vars.iter().map(|y| (y - my).powi(2)).sum();
        let r2 = sxy * sxy / (sxx * syy);
        assert!(r2 >= 0.95, "R² {r2}");
        let slope = sxy / sxx;
        let expected = NoiseSpec::default().shot_gain0 * 8.0;
        assert!((slope / expected - 1.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn deterministic_given_seed() {
        let s = settings(1.0, 1600.0, Gamma::Rgb, NoiseSpec::default(), 9);
        let a = simulate_exposure(&flat(0.2, 32), &s).unwrap();
        let b = simulate_exposure(&flat(0.2, 32), &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_noise_rejected() {
        let noise = NoiseSpec { read_sigma0: -1.0, shot_gain0: 0.0 };
        assert!(simulate_exposure(&flat(0.2, 8), &settings(1.0, 100.0, Gamma::Rgb, noise, 0)).is_err());
    }
}
