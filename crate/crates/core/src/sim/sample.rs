use serde::{Deserialize, Serialize};

use super::capture::{simulate_exposure, CaptureSettings, NoiseSpec};
use super::motion::{apply_motion, MotionSpec};
use super::scene::{synth_hdr_scene, SceneSpec};
use super::{derive_seed, SimError, RADIANCE_CEILING};
use crate::imaging::{ExposureBracket, Gamma, HdrDomainImage, LdrImage, LinearImage, ReferenceChoice, ScenePriors};

/// ±3 EV around a unit medium exposure.
pub const DEFAULT_EXPOSURES: [f64; 3] = [0.125, 1.0, 8.0];

/// Pose multipliers of the dynamic frame at each bracket position.
const DYNAMIC_POSE: [i32; 3] = [-1, 1, 2];

/// Everything needed to regenerate one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub scene: SceneSpec,
    pub motion: MotionSpec,
    pub noise: NoiseSpec,
    pub exposure_times: [f64; 3],
    pub iso: f64,
    pub gamma: Gamma,
    pub reference: ReferenceChoice,
}

impl SampleSpec {
    pub fn new(scene: SceneSpec, iso: f64) -> Self {
        Self {
            scene,
            motion: MotionSpec::none(),
            noise: NoiseSpec::default(),
            exposure_times: DEFAULT_EXPOSURES,
            iso,
            gamma: Gamma::Rgb,
            reference: ReferenceChoice::Medium,
        }
    }

    pub fn ev_steps(&self) -> [f64; 3] {
        let tm = self.exposure_times[1];
        self.exposure_times.map(|t| (t / tm).log2())
    }
}

/// One training/evaluation sample. Static frames are captured from the
/// unmoved scene, dynamic frames from motion-displaced copies; a reference
/// variant combines the static frame at the reference position with the
/// dynamic frames elsewhere, so every variant shares `ground_truth`.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSample {
    pub spec: SampleSpec,
    pub static_frames: [LdrImage; 3],
    pub dynamic_frames: [LdrImage; 3],
    /// Clean static radiance divided by the radiance ceiling.
    pub ground_truth: HdrDomainImage,
    pub priors: ScenePriors,
}

impl DatasetSample {
    pub fn reference(&self) -> ReferenceChoice {
        self.spec.reference
    }

    /// Bracket for the sample's own reference tag.
    pub fn bracket(&self) -> ExposureBracket {
        self.variant(self.spec.reference)
    }

    pub fn variant(&self, r: ReferenceChoice) -> ExposureBracket {
        let frames = std::array::from_fn(|i| {
            if i == r.index() {
                self.static_frames[i].clone()
            } else {
                self.dynamic_frames[i].clone()
            }
        });
        ExposureBracket::new(frames, self.priors).expect("frames validated at construction")
    }

    /// Noise-free, clipped linear capture of the static scene at position `i`.
    pub fn clean_exposure(&self, i: usize) -> LinearImage {
        let scale = (RADIANCE_CEILING * self.spec.exposure_times[i]) as f32;
        LinearImage(self.ground_truth.0.map(|v| (v * scale).clamp(0.0, 1.0)))
    }

    /// Noise-free but quantized capture of the static scene at position `i`:
    /// what the sensor would record with noise switched off.
    pub fn clean_capture(&self, i: usize) -> LdrImage {
        let radiance = LinearImage(self.ground_truth.0.map(|v| v * RADIANCE_CEILING as f32));
        let frame = &self.static_frames[i];
        let settings = CaptureSettings {
            exposure_time: frame.exposure_time(),
            iso: frame.iso(),
            ev: frame.ev(),
            gamma: frame.gamma(),
            noise: NoiseSpec::noiseless(),
            seed: 0,
        };
        simulate_exposure(&radiance, &settings).expect("settings validated at construction")
    }
}

/// Renders and captures a sample described by `spec`.
pub fn make_sample(spec: &SampleSpec) -> Result<DatasetSample, SimError> {
    let t = spec.exposure_times;
    if !(t[0] > 0.0 && t[0] < t[1] && t[1] < t[2]) {
        return Err(SimError::Config(format!("exposure times {t:?} must be positive and increasing")));
    }
    let mut scene = synth_hdr_scene(&spec.scene)?;
    if spec.motion.occlusion {
        scene.place_over_highlight(0)?;
    }
    let clean = scene.radiance();
    let capture = |img: &LinearImage, i: usize, tag: u64| {
        let settings = CaptureSettings {
            exposure_time: t[i],
            iso: spec.iso,
            ev: spec.ev_steps()[i],
            gamma: spec.gamma,
            noise: spec.noise,
            seed: derive_seed(spec.scene.seed, tag + i as u64),
        };
        simulate_exposure(img, &settings)
    };
    let static_frames = [capture(&clean, 0, 100)?, capture(&clean, 1, 100)?, capture(&clean, 2, 100)?];
    let mut dynamic = Vec::with_capacity(3);
    for (i, &k) in DYNAMIC_POSE.iter().enumerate() {
        let moved = if spec.motion.is_static() { clean.clone() } else { apply_motion(&scene, &spec.motion.scaled(k))? };
        dynamic.push(capture(&moved, i, 200)?);
    }
    let dynamic_frames: [LdrImage; 3] = dynamic.try_into().expect("three frames");

    let priors = ScenePriors { brightness: clean.0.mean().log2(), iso: spec.iso, ev_steps: spec.ev_steps() };
    priors.validate()?;
    let inv = (1.0 / RADIANCE_CEILING) as f32;
    Ok(DatasetSample {
        spec: spec.clone(),
        static_frames,
        dynamic_frames,
        ground_truth: HdrDomainImage(clean.0.map(|v| v * inv)),
        priors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{exposure_align, gamma_expand};

    fn spec(seed: u64) -> SampleSpec {
        SampleSpec::new(SceneSpec::new(seed, 32, 32), 400.0)
    }

    fn moving(seed: u64, reference: ReferenceChoice) -> SampleSpec {
        let motion = MotionSpec { global_shift: (2, 1), object_shifts: vec![(3, -2), (-2, 2)], occlusion: false };
        SampleSpec { motion, reference, ..spec(seed) }
    }

    fn inconsistent_fraction(b: &ExposureBracket, i: usize, j: usize) -> f64 {
        let hi = exposure_align(&gamma_expand(&b.frames()[i]), b.frames()[i].exposure_time()).unwrap().0;
        let hj = exposure_align(&gamma_expand(&b.frames()[j]), b.frames()[j].exposure_time()).unwrap().0;
        let (ti, tj) = (b.frames()[i].exposure_time() as f32, b.frames()[j].exposure_time() as f32);
        let mut n = 0;
        let mut bad = 0;
        for (&a, &c) in hi.data().iter().zip(hj.data()) {
            // only where both frames are well exposed
            if (0.05..0.95).contains(&(a * ti)) && (0.05..0.95).contains(&(c * tj)) {
                n += 1;
                if (a - c).abs() > 0.05 * a.max(c) {
                    bad += 1;
                }
            }
        }
        bad as f64 / n.max(1) as f64
    }

    #[test]
    fn static_noiseless_bracket_is_consistent() {
        let s = SampleSpec { noise: NoiseSpec::noiseless(), ..spec(3) };
        let b = make_sample(&s).unwrap().bracket();
        assert_eq!(inconsistent_fraction(&b, 0, 1), 0.0);
        assert_eq!(inconsistent_fraction(&b, 1, 2), 0.0);
    }

    #[test]
    fn variants_share_ground_truth() {
        let a = make_sample(&moving(5, ReferenceChoice::Under)).unwrap();
        let b = make_sample(&moving(5, ReferenceChoice::Medium)).unwrap();
        assert_eq!(a.ground_truth.0.data(), b.ground_truth.0.data());
        assert_eq!(a.variant(ReferenceChoice::Over), b.variant(ReferenceChoice::Over));
        assert_ne!(a.bracket(), b.bracket());
    }

    #[test]
    fn motion_breaks_consistency() {
        let s = SampleSpec { noise: NoiseSpec::noiseless(), ..moving(6, ReferenceChoice::Under) };
        let b = make_sample(&s).unwrap().bracket();
        assert!(inconsistent_fraction(&b, 0, 1) > 0.01);
    }

    #[test]
    fn priors_and_ordering() {
        let s = make_sample(&spec(1)).unwrap();
        assert_eq!(s.priors.ev_steps, [-3.0, 0.0, 3.0]);
        let mean = s.ground_truth.0.mean() * RADIANCE_CEILING;
        assert!((s.priors.brightness - mean.log2()).abs() < 1e-4);
        let bad = SampleSpec { exposure_times: [1.0, 0.5, 8.0], ..spec(1) };
        assert!(matches!(make_sample(&bad), Err(SimError::Config(_))));
    }

    #[test]
    fn clean_exposure_matches_noiseless_capture() {
        let s = SampleSpec { noise: NoiseSpec::noiseless(), gamma: Gamma::Raw, ..spec(2) };
        let sample = make_sample(&s).unwrap();
        let clean = sample.clean_exposure(1);
        let step = 1.0 / 4095.0;
        for (&a, &b) in clean.0.data().iter().zip(sample.static_frames[1].pixels().data()) {
            assert!((a - b).abs() as f64 <= 0.5 * step + 1e-6);
        }
        for i in 0..3 {
            assert_eq!(sample.clean_capture(i), sample.static_frames[i]);
        }
    }
}
