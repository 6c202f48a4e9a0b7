//! Pipeline bundle: `manifest.json` plus one checkpoint directory per
//! component (`predn/`, `ranet/`, `pcf_under/`, `pcf_medium/`, `pcf_over/`).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_consistency, PathSlot, PipelineError, TrainedPipeline};
use crate::imaging::{ReferenceChoice, TmoOperator};
use crate::models::{load_weights, read_architecture, save_weights, Architecture};

pub const BUNDLE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    pub tmo: TmoOperator,
    pub ceiling: f64,
    pub preset: String,
    pub has_predn: bool,
    pub has_ranet: bool,
}

fn path_dir(r: ReferenceChoice) -> String {
    format!("pcf_{}", r.name())
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.display().to_string(), source }
}

/// Writes every component (loading lazy paths first).
pub fn save_pipeline(pipe: &TrainedPipeline, dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let medium = pipe.path(ReferenceChoice::Medium)?;
    let manifest = BundleManifest {
        format_version: BUNDLE_VERSION,
        tmo: pipe.tmo,
        ceiling: pipe.ceiling,
        preset: medium.arch().preset().to_string(),
        has_predn: pipe.predn().is_some(),
        has_ranet: pipe.ranet().is_some(),
    };
    for r in ReferenceChoice::ALL {
        save_weights(pipe.path(r)?, &dir.join(path_dir(r)))?;
    }
    if let Some(w) = pipe.predn() {
        save_weights(w, &dir.join("predn"))?;
    }
    if let Some(w) = pipe.ranet() {
        save_weights(w, &dir.join("ranet"))?;
    }
    let p = dir.join("manifest.json");
    fs::write(&p, serde_json::to_vec_pretty(&manifest).expect("manifest serializes")).map_err(io(&p))
}

/// Loads the denoiser and selector eagerly and the fusion paths lazily;
/// tags of all components are checked up front.
pub fn load_pipeline(dir: &Path) -> Result<TrainedPipeline, PipelineError> {
    let p = dir.join("manifest.json");
    let manifest: BundleManifest = serde_json::from_slice(&fs::read(&p).map_err(io(&p))?)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?;
    if manifest.format_version != BUNDLE_VERSION {
        return Err(PipelineError::Version { found: manifest.format_version, expected: BUNDLE_VERSION });
    }
    let mut arches: Vec<Architecture> = Vec::with_capacity(3);
    for r in ReferenceChoice::ALL {
        let d = dir.join(path_dir(r));
        if !d.join("meta.json").exists() || !d.join("params.f32").exists() {
            return Err(PipelineError::MissingPath(r));
        }
        arches.push(read_architecture(&d)?);
    }
    let component = |name: &str, present: bool| -> Result<Option<_>, PipelineError> {
        if !present {
            return Ok(None);
        }
        let d = dir.join(name);
        if !d.exists() {
            return Err(PipelineError::Config(format!("bundle lists {name} but {} is missing", d.display())));
        }
        Ok(Some(load_weights(&d)?))
    };
    let predn = component("predn", manifest.has_predn)?;
    let ranet = component("ranet", manifest.has_ranet)?;
    let arches: [Architecture; 3] = arches.try_into().expect("three paths");
    check_consistency(predn.as_ref().map(|w| w.arch()), &arches, ranet.as_ref().map(|w| w.arch()))?;
    if arches[0].preset() != manifest.preset {
        return Err(PipelineError::Inconsistent(format!(
            "manifest preset {} vs components {}",
            manifest.preset,
            arches[0].preset()
        )));
    }
    let paths = ReferenceChoice::ALL.map(|r| PathSlot::lazy(dir.join(path_dir(r))));
    Ok(TrainedPipeline::from_parts(manifest.tmo, manifest.ceiling, predn, paths, ranet))
}
