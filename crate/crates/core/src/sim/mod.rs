//! Synthetic exposure-bracket generation and the on-disk dataset container.

mod capture;
mod container;
mod generate;
mod motion;
mod sample;
mod scene;

pub use capture::{quantize, sensor_signal, simulate_exposure, CaptureSettings, NoiseSpec};
pub use container::{
    read_dataset, read_image_set, read_manifest, write_dataset, write_dataset_split, write_image_set, DatasetManifest,
    DATASET_VERSION,
};
pub use generate::DatasetSpec;
pub use motion::{apply_motion, MotionSpec};
pub use sample::{make_sample, DatasetSample, SampleSpec, DEFAULT_EXPOSURES};
pub use scene::{synth_hdr_scene, Scene, SceneObject, SceneSpec};

use crate::imaging::ImagingError;

/// Brightest radiance the simulator produces; HDR-domain images are divided
/// by this before tone mapping.
pub const RADIANCE_CEILING: f64 = 16.0;

/// Scene sides must be multiples of this so a 3-level pyramid halves exactly.
pub const PYRAMID_DIVISOR: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error("io error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed sample {index}: {message}")]
    Parse { index: usize, message: String },
}

/// Mixes a stream tag into a base seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
