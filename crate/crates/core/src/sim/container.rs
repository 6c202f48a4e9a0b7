//! Directory-per-sample dataset container.
//!
//! ```text
//! root/
//!   dataset.json              manifest with sample names and the split
//!   sample_0000/
//!     meta.json               capture metadata and shapes
//!     static_under.f32 ...    raw little-endian planar f32
//!     ground_truth.f32
//!     SHA256SUMS              digests of every file above
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::sample::{DatasetSample, SampleSpec};
use super::SimError;
use crate::image::{Dims, Image};
use crate::imaging::{HdrDomainImage, LdrImage, ScenePriors};

pub const DATASET_VERSION: u32 = 1;
const MANIFEST: &str = "dataset.json";
const SUMS: &str = "SHA256SUMS";
const POSITIONS: [&str; 3] = ["under", "medium", "over"];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub samples: Vec<String>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct FrameMeta {
    file: String,
    exposure_time: f64,
    iso: f64,
    ev: f64,
}

#[derive(Serialize, Deserialize)]
struct SampleMeta {
    dims: Dims,
    dtype: String,
    static_frames: Vec<FrameMeta>,
    dynamic_frames: Vec<FrameMeta>,
    ground_truth: String,
    priors: ScenePriors,
    spec: SampleSpec,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io { path: path.display().to_string(), source }
}

fn sample_dir(index: usize) -> String {
    format!("sample_{index:04}")
}

fn to_bytes(img: &Image) -> Vec<u8> {
    img.data().iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes every sample into the training split.
pub fn write_dataset(samples: &[DatasetSample], path: &Path) -> Result<(), SimError> {
    write_dataset_split(samples, path, samples.len())
}

/// Writes samples with the first `n_train` in the training split and the
/// rest in the test split. Existing sample directories are replaced.
pub fn write_dataset_split(samples: &[DatasetSample], path: &Path, n_train: usize) -> Result<(), SimError> {
    if n_train > samples.len() {
        return Err(SimError::Config(format!("train split {n_train} exceeds {} samples", samples.len())));
    }
    fs::create_dir_all(path).map_err(io_err(path))?;
    let mut manifest = DatasetManifest { format_version: DATASET_VERSION, ..Default::default() };
    for (i, sample) in samples.iter().enumerate() {
        let name = sample_dir(i);
        write_sample(sample, &path.join(&name))?;
        manifest.samples.push(name);
        if i < n_train {
            manifest.train.push(i);
        } else {
            manifest.test.push(i);
        }
    }
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let file = path.join(MANIFEST);
    fs::write(&file, json).map_err(io_err(&file))
}

fn write_sample(sample: &DatasetSample, dir: &Path) -> Result<(), SimError> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut frames = |kind: &str, set: &[LdrImage; 3]| -> Vec<FrameMeta> {
        set.iter()
            .zip(POSITIONS)
            .map(|(f, pos)| {
                let file = format!("{kind}_{pos}.f32");
                files.push((file.clone(), to_bytes(f.pixels())));
                FrameMeta { file, exposure_time: f.exposure_time(), iso: f.iso(), ev: f.ev() }
            })
            .collect()
    };
    let static_frames = frames("static", &sample.static_frames);
    let dynamic_frames = frames("dynamic", &sample.dynamic_frames);
    files.push(("ground_truth.f32".into(), to_bytes(&sample.ground_truth.0)));
    let meta = SampleMeta {
        dims: sample.ground_truth.0.dims(),
        dtype: "f32le".into(),
        static_frames,
        dynamic_frames,
        ground_truth: "ground_truth.f32".into(),
        priors: sample.priors,
        spec: sample.spec.clone(),
    };
    files.push(("meta.json".into(), serde_json::to_vec_pretty(&meta).expect("meta serializes")));

    let mut sums = String::new();
    for (name, bytes) in &files {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(io_err(&p))?;
        sums.push_str(&format!("{}  {name}\n", sha_hex(bytes)));
    }
    let p = dir.join(SUMS);
    fs::write(&p, sums).map_err(io_err(&p))
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest, SimError> {
    let file = path.join(MANIFEST);
    let text = fs::read_to_string(&file).map_err(io_err(&file))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| SimError::Config(format!("{}: {e}", file.display())))?;
    if manifest.format_version != DATASET_VERSION {
        return Err(SimError::Config(format!(
            "dataset version {} (expected {DATASET_VERSION})",
            manifest.format_version
        )));
    }
    Ok(manifest)
}

/// Reads all samples in manifest order, verifying every checksum.
pub fn read_dataset(path: &Path) -> Result<Vec<DatasetSample>, SimError> {
    let manifest = read_manifest(path)?;
    manifest
        .samples
        .iter()
        .enumerate()
        .map(|(i, name)| read_sample(&path.join(name), i))
        .collect()
}

struct Verified {
    dir: PathBuf,
    sums: Vec<(String, String)>,
    index: usize,
}

impl Verified {
    fn parse_err(&self, message: impl Into<String>) -> SimError {
        SimError::Parse { index: self.index, message: message.into() }
    }

    fn read(&self, name: &str) -> Result<Vec<u8>, SimError> {
        let Some((expected, _)) = self.sums.iter().find(|(_, n)| n == name) else {
            return Err(self.parse_err(format!("{name} missing from {SUMS}")));
        };
        let p = self.dir.join(name);
        let bytes = fs::read(&p).map_err(io_err(&p))?;
        if &sha_hex(&bytes) != expected {
            return Err(self.parse_err(format!("checksum mismatch in {name}")));
        }
        Ok(bytes)
    }

    fn image(&self, name: &str, dims: Dims) -> Result<Image, SimError> {
        let bytes = self.read(name)?;
        if bytes.len() != dims.numel() * 4 {
            return Err(self.parse_err(format!("{name}: {} bytes for {dims:?}", bytes.len())));
        }
        let data = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        Image::new(dims.channels, dims.height, dims.width, data).ok_or_else(|| self.parse_err("bad dims"))
    }
}

fn read_sample(dir: &Path, index: usize) -> Result<DatasetSample, SimError> {
    let sums_path = dir.join(SUMS);
    let text = fs::read_to_string(&sums_path).map_err(io_err(&sums_path))?;
    let mut sums = Vec::new();
    for line in text.lines() {
        let Some((digest, name)) = line.split_once("  ") else {
            return Err(SimError::Parse { index, message: format!("bad {SUMS} line '{line}'") });
        };
        sums.push((digest.to_string(), name.to_string()));
    }
    let v = Verified { dir: dir.to_path_buf(), sums, index };
    let meta: SampleMeta =
        serde_json::from_slice(&v.read("meta.json")?).map_err(|e| v.parse_err(format!("meta.json: {e}")))?;
    if meta.dtype != "f32le" {
        return Err(v.parse_err(format!("unsupported dtype {}", meta.dtype)));
    }
    let gamma = meta.spec.gamma;
    let frames = |set: &[FrameMeta]| -> Result<[LdrImage; 3], SimError> {
        if set.len() != 3 {
            return Err(v.parse_err("expected three frames"));
        }
        let mut out = Vec::with_capacity(3);
        for f in set {
            let img = v.image(&f.file, meta.dims)?;
            out.push(LdrImage::new(img, f.exposure_time, f.iso, f.ev, gamma).map_err(|e| v.parse_err(e.to_string()))?);
        }
        Ok(out.try_into().expect("three frames"))
    };
    Ok(DatasetSample {
        static_frames: frames(&meta.static_frames)?,
        dynamic_frames: frames(&meta.dynamic_frames)?,
        ground_truth: HdrDomainImage(v.image(&meta.ground_truth, meta.dims)?),
        priors: meta.priors,
        spec: meta.spec,
    })
}

#[derive(Serialize, Deserialize)]
struct ImageEntry {
    file: String,
    dims: Dims,
}

#[derive(Serialize, Deserialize)]
struct ImageSetMeta {
    dtype: String,
    images: Vec<ImageEntry>,
    info: serde_json::Value,
}

/// Writes named images, like a sample directory, with free-form `info`
/// stored in `meta.json`. Used for inference outputs.
pub fn write_image_set(dir: &Path, images: &[(&str, &Image)], info: serde_json::Value) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut entries = Vec::new();
    for (name, img) in images {
        let file = format!("{name}.f32");
        files.push((file.clone(), to_bytes(img)));
        entries.push(ImageEntry { file, dims: img.dims() });
    }
    let meta = ImageSetMeta { dtype: "f32le".into(), images: entries, info };
    files.push(("meta.json".into(), serde_json::to_vec_pretty(&meta).expect("meta serializes")));
    let mut sums = String::new();
    for (name, bytes) in &files {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(io_err(&p))?;
        sums.push_str(&format!("{}  {name}\n", sha_hex(bytes)));
    }
    let p = dir.join(SUMS);
    fs::write(&p, sums).map_err(io_err(&p))
}

/// Reads a directory written by [`write_image_set`], verifying checksums.
pub fn read_image_set(dir: &Path) -> Result<(serde_json::Value, Vec<(String, Image)>), SimError> {
    let sums_path = dir.join(SUMS);
    let text = fs::read_to_string(&sums_path).map_err(io_err(&sums_path))?;
    let sums = text
        .lines()
        .filter_map(|l| l.split_once("  ").map(|(d, n)| (d.to_string(), n.to_string())))
        .collect();
    let v = Verified { dir: dir.to_path_buf(), sums, index: 0 };
    let meta: ImageSetMeta =
        serde_json::from_slice(&v.read("meta.json")?).map_err(|e| v.parse_err(format!("meta.json: {e}")))?;
    let mut out = Vec::with_capacity(meta.images.len());
    for e in &meta.images {
        let name = e.file.trim_end_matches(".f32").to_string();
        out.push((name, v.image(&e.file, e.dims)?));
    }
    Ok((meta.info, out))
}
