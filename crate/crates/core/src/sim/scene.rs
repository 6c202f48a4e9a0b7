use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, SimError, PYRAMID_DIVISOR, RADIANCE_CEILING};
use crate::image::Image;
use crate::imaging::LinearImage;

/// Parameters of one synthetic radiance scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    /// log2 span between the darkest and brightest radiance.
    pub dynamic_range_stops: f64,
    /// Amplitude of high-frequency texture, roughly `[0, 1]`.
    pub texture_density: f64,
    pub n_foreground_objects: usize,
}

impl SceneSpec {
    pub fn new(seed: u64, height: usize, width: usize) -> Self {
        Self { seed, height, width, dynamic_range_stops: 16.0, texture_density: 0.5, n_foreground_objects: 2 }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.height < 8 || self.width < 8 {
            return Err(SimError::Config(format!("scene {}×{} is too small", self.height, self.width)));
        }
        if self.height % PYRAMID_DIVISOR != 0 || self.width % PYRAMID_DIVISOR != 0 {
            return Err(SimError::Config(format!(
                "scene {}×{} not divisible by {PYRAMID_DIVISOR}",
                self.height, self.width
            )));
        }
        if !(self.dynamic_range_stops.is_finite() && self.dynamic_range_stops > 0.0) {
            return Err(SimError::Config("dynamic_range_stops must be > 0".into()));
        }
        if !(self.texture_density.is_finite() && self.texture_density >= 0.0) {
            return Err(SimError::Config("texture_density must be >= 0".into()));
        }
        Ok(())
    }
}

/// A foreground layer: full-frame radiance plus a binary coverage mask.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneObject {
    pub radiance: Image,
    pub alpha: Vec<bool>,
    pub center: (usize, usize),
    pub radius: usize,
    /// Per-channel position in the scene's log-radiance range.
    pub level: Vec<f64>,
}

/// Layered scene; [`Scene::radiance`] composites the layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub background: Image,
    pub objects: Vec<SceneObject>,
    /// Centers and plateau radii of the saturated highlight blobs.
    pub highlights: Vec<((usize, usize), usize)>,
    pub spec: SceneSpec,
}

impl Scene {
    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn radiance(&self) -> LinearImage {
        let mut out = self.background.clone();
        for obj in &self.objects {
            composite(&mut out, &obj.radiance, &obj.alpha);
        }
        LinearImage(out)
    }

    /// Re-centers object `index` on the first highlight blob so that anything
    /// moving it will occlude a region saturated in the longer exposures.
    pub fn place_over_highlight(&mut self, index: usize) -> Result<(), SimError> {
        let Some(&(center, plateau)) = self.highlights.first() else {
            return Err(SimError::Config("scene has no highlight".into()));
        };
        let (h, w) = (self.spec.height, self.spec.width);
        let Some(obj) = self.objects.get_mut(index) else {
            return Err(SimError::Config(format!("scene has no object {index}")));
        };
        let radius = ((plateau as f64 * 0.6).round() as usize).max(2);
        let level = obj.level.clone();
        *obj = disk_object(h, w, center, radius, &level, self.spec.dynamic_range_stops);
        Ok(())
    }
}

fn disk_object(h: usize, w: usize, center: (usize, usize), radius: usize, level: &[f64], stops: f64) -> SceneObject {
    let r2 = (radius * radius) as i64;
    let alpha: Vec<bool> = (0..h * w)
        .map(|i| {
            let (y, x) = ((i / w) as i64, (i % w) as i64);
            let (dy, dx) = (y - center.0 as i64, x - center.1 as i64);
            dy * dy + dx * dx <= r2
        })
        .collect();
    // striped interior so displacement is visible inside the object
    let radiance = Image::from_fn(level.len(), h, w, |c, y, x| {
        let stripe = if ((x + y) / 3) % 2 == 0 { 0.0 } else { 0.08 };
        to_radiance((level[c] - stripe).clamp(0.0, 1.0), stops)
    });
    SceneObject { radiance, alpha, center, radius, level: level.to_vec() }
}

pub(crate) fn composite(dst: &mut Image, src: &Image, alpha: &[bool]) {
    let hw = dst.height() * dst.width();
    for c in 0..dst.channels() {
        let s = src.plane(c).to_vec();
        let d = &mut dst.data_mut()[c * hw..(c + 1) * hw];
        for i in 0..hw {
            if alpha[i] {
                d[i] = s[i];
            }
        }
    }
}

fn normalize01(v: &mut [f64]) {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let span = hi - lo;
    for x in v.iter_mut() {
        *x = if span > 0.0 { (*x - lo) / span } else { 0.0 };
    }
}

/// Plateau with a raised-cosine falloff: 1 inside `r0`, 0 beyond `2·r0`.
fn plateau(r: f64, r0: f64) -> f64 {
    if r <= r0 {
        1.0
    } else if r >= 2.0 * r0 {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (r - r0) / r0).cos())
    }
}

fn to_radiance(f: f64, stops: f64) -> f32 {
    (RADIANCE_CEILING * (-stops * (1.0 - f)).exp2()) as f32
}

/// Generates a deterministic layered scene whose background spans exactly
/// `dynamic_range_stops` between its darkest pixel and the radiance ceiling.
///
/// Highlight blobs sit at the ceiling (saturated in every simulated
/// exposure) and the darkest corner lies far below the medium frame's noise
/// floor for spans of 12 stops or more.
pub fn synth_hdr_scene(spec: &SceneSpec) -> Result<Scene, SimError> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0x5ce9e));
    let stops = spec.dynamic_range_stops;

    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (ga, gb) = (angle.cos(), angle.sin());
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(0.0..6.3), rng.gen_range(0.1..0.25)))
        .collect();
    let n_tex = 2 + (spec.texture_density * 4.0).round() as usize;
    let texture: Vec<(f64, f64, f64)> = (0..n_tex)
        .map(|_| (rng.gen_range(4.0..14.0), rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0..6.3)))
        .collect();
    let n_blobs = rng.gen_range(1..=2);
    let min_side = h.min(w) as f64;
    let blobs: Vec<((f64, f64), f64)> = (0..n_blobs)
        .map(|_| {
            let r0 = rng.gen_range(0.09..0.13) * min_side;
            let cy = rng.gen_range(2.0 * r0..h as f64 - 2.0 * r0);
            let cx = rng.gen_range(2.0 * r0..w as f64 - 2.0 * r0);
            ((cy, cx), r0)
        })
        .collect();

    let mut base = vec![0f64; h * w];
    for y in 0..h {
        for x in 0..w {
            let (u, v) = (x as f64 / w as f64, y as f64 / h as f64);
            let mut f = 0.6 * (ga * u + gb * v);
            for &(fx, fy, ph, amp) in &waves {
                f += amp * (std::f64::consts::TAU * (fx * u + fy * v) + ph).sin();
            }
            for &(freq, dir, ph) in &texture {
                let t = dir.cos() * u + dir.sin() * v;
                f += 0.06 * spec.texture_density * (std::f64::consts::TAU * freq * t + ph).sin();
            }
            base[y * w + x] = f;
        }
    }
    normalize01(&mut base);
    let mut field: Vec<f64> = base
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let (y, x) = ((i / w) as f64, (i % w) as f64);
            let blob = blobs
                .iter()
                .map(|&((cy, cx), r0)| plateau(((y - cy).powi(2) + (x - cx).powi(2)).sqrt(), r0))
                .fold(0.0, f64::max);
            (0.85 * b).max(blob)
        })
        .collect();
    normalize01(&mut field);

    let tint: [f64; 3] = [rng.gen_range(-0.08..0.08), rng.gen_range(-0.08..0.08), rng.gen_range(-0.08..0.08)];
    let mut background = Image::filled(3, h, w, 0.0);
    for (c, &tc) in tint.iter().enumerate() {
        let mut fc: Vec<f64> = field
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let (u, v) = ((i % w) as f64 / w as f64, (i / w) as f64 / h as f64);
                let g = 0.5 + 0.5 * (3.0 * u + 2.0 * v + c as f64).sin();
                f + tc * g * (1.0 - f)
            })
            .collect();
        normalize01(&mut fc);
        for (i, &f) in fc.iter().enumerate() {
            background.data_mut()[c * h * w + i] = to_radiance(f, stops);
        }
    }

    // pixels that carry the extreme values must stay uncovered
    let argmin: Vec<usize> = (0..3)
        .map(|c| {
            let p = background.plane(c);
            (0..h * w).min_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap_or(0)
        })
        .collect();
    let highlights: Vec<((usize, usize), usize)> = blobs
        .iter()
        .map(|&((cy, cx), r0)| ((cy.round() as usize, cx.round() as usize), r0.floor() as usize))
        .collect();

    let mut objects = Vec::new();
    let mut attempts = 0;
    while objects.len() < spec.n_foreground_objects && attempts < 200 {
        attempts += 1;
        let radius = rng.gen_range((min_side / 12.0).max(2.0)..(min_side / 7.0).max(3.0)) as usize;
        let cy = rng.gen_range(radius..h - radius);
        let cx = rng.gen_range(radius..w - radius);
        let f_level = rng.gen_range(0.3..0.65);
        let level: Vec<f64> = (0..3).map(|c| f_level + 0.04 * c as f64).collect();
        let obj = disk_object(h, w, (cy, cx), radius, &level, stops);
        let blocks_extreme = argmin.iter().any(|&i| obj.alpha[i])
            || highlights.iter().any(|&((y, x), _)| obj.alpha[y * w + x]);
        if !blocks_extreme {
            objects.push(obj);
        }
    }
    if objects.len() < spec.n_foreground_objects {
        return Err(SimError::Config("could not place foreground objects".into()));
    }
    Ok(Scene { background, objects, highlights, spec: spec.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log2_span(img: &Image) -> f64 {
        let (lo, hi) = img.min_max();
        (hi as f64 / lo as f64).log2()
    }

    #[test]
    fn deterministic_for_seed() {
        let spec = SceneSpec::new(7, 64, 64);
        let a = synth_hdr_scene(&spec).unwrap().radiance();
        let b = synth_hdr_scene(&spec).unwrap().radiance();
        assert_eq!(a, b);
        let c = synth_hdr_scene(&SceneSpec::new(8, 64, 64)).unwrap().radiance();
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_span_is_flat() {
        let spec = SceneSpec { dynamic_range_stops: 0.001, ..SceneSpec::new(3, 32, 48) };
        let img = synth_hdr_scene(&spec).unwrap().radiance().0;
        assert!(log2_span(&img) <= 0.01);
    }

    #[test]
    fn sixteen_stops_and_extremes() {
        for seed in 0..4 {
            let scene = synth_hdr_scene(&SceneSpec::new(seed, 64, 64)).unwrap();
            let img = scene.radiance().0;
            assert!(log2_span(&img) >= 16.0 - 1e-3, "seed {seed}: {}", log2_span(&img));
            let (lo, hi) = img.min_max();
            // above the under frame's clip point (t = 1/8) and below the
            // medium frame's read-noise floor
            assert!(hi as f64 > 8.0);
            assert!((lo as f64) < 5e-4);
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(synth_hdr_scene(&SceneSpec::new(0, 4, 64)).is_err());
        assert!(synth_hdr_scene(&SceneSpec::new(0, 66, 64)).is_err());
        let spec = SceneSpec { dynamic_range_stops: 0.0, ..SceneSpec::new(0, 32, 32) };
        assert!(synth_hdr_scene(&spec).is_err());
    }

    #[test]
    fn occluder_covers_highlight() {
        let mut scene = synth_hdr_scene(&SceneSpec::new(11, 64, 64)).unwrap();
        scene.place_over_highlight(0).unwrap();
        let ((cy, cx), _) = scene.highlights[0];
        assert!(scene.objects[0].alpha[cy * 64 + cx]);
        assert!(scene.background.get(0, cy, cx) as f64 >= RADIANCE_CEILING * 0.99);
    }
}
