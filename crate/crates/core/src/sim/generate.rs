use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::capture::NoiseSpec;
use super::motion::MotionSpec;
use super::sample::{make_sample, DatasetSample, SampleSpec};
use super::scene::SceneSpec;
use super::{derive_seed, SimError};
use crate::imaging::{Gamma, ReferenceChoice, ISO_MAX};

/// Recipe for a randomized dataset: scenes, motion, ISO and reference tags
/// are drawn per sample from a seeded stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub seed: u64,
    pub train_count: usize,
    pub test_count: usize,
    pub side: usize,
    pub gamma: Gamma,
    pub iso_range: (f64, f64),
    /// Largest per-step camera shift in pixels.
    pub max_shift: i32,
    /// Fraction of samples whose first object covers a highlight.
    pub occlusion_rate: f64,
    pub noise: NoiseSpec,
}

impl DatasetSpec {
    pub fn new(seed: u64, train_count: usize, test_count: usize, side: usize) -> Self {
        Self {
            seed,
            train_count,
            test_count,
            side,
            gamma: Gamma::Rgb,
            iso_range: (100.0, ISO_MAX),
            max_shift: 2,
            occlusion_rate: 0.25,
            noise: NoiseSpec::default(),
        }
    }

    /// Spec of sample `index`; independent of the counts.
    pub fn sample_spec(&self, index: usize) -> SampleSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, 0xda7a_0000 + index as u64));
        let scene = SceneSpec {
            texture_density: rng.gen_range(0.2..0.8),
            n_foreground_objects: rng.gen_range(1..=3),
            ..SceneSpec::new(derive_seed(self.seed, index as u64), self.side, self.side)
        };
        let (lo, hi) = self.iso_range;
        let iso = (lo.log2() + rng.gen::<f64>() * (hi.log2() - lo.log2())).exp2().round().clamp(lo, hi);
        let m = self.max_shift;
        let mut shift = || (rng.gen_range(-m..=m), rng.gen_range(-m..=m));
        let global_shift = shift();
        let object_shifts = (0..scene.n_foreground_objects).map(|_| shift()).collect();
        let motion = MotionSpec { global_shift, object_shifts, occlusion: rng.gen_bool(self.occlusion_rate) };
        let reference = ReferenceChoice::ALL[rng.gen_range(0..3)];
        SampleSpec { motion, noise: self.noise, gamma: self.gamma, reference, ..SampleSpec::new(scene, iso) }
    }

    pub fn generate(&self) -> Result<Vec<DatasetSample>, SimError> {
        if self.max_shift < 0 || self.max_shift * 2 > (self.side / 4) as i32 {
            return Err(SimError::Config(format!("max_shift {} too large for side {}", self.max_shift, self.side)));
        }
        (0..self.train_count + self.test_count).map(|i| make_sample(&self.sample_spec(i))).collect()
    }
}
