use serde::{Deserialize, Serialize};

use crate::imaging::ReferenceChoice;
use crate::metrics::Metric;
use crate::pipeline::{score_paths, TrainedPipeline};
use crate::sim::DatasetSample;

use super::TrainError;

/// Best fusion path for one sample under a metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathLabel {
    pub id: String,
    pub winner: ReferenceChoice,
    /// Per-path score, indexed by reference position.
    pub scores: [f64; 3],
}

/// Runs all three trained paths on every sample and labels each with the
/// highest-scoring one (ties go to the shorter exposure).
pub fn label_paths(
    pipe: &TrainedPipeline,
    samples: &[DatasetSample],
    metric: Metric,
) -> Result<Vec<PathLabel>, TrainError> {
    let mut out = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let id = format!("sample_{i:04}");
        let scores = score_paths(pipe, s, &id)?.scores(metric);
        out.push(PathLabel { id, winner: ReferenceChoice::argmax(&scores), scores });
    }
    Ok(out)
}

/// ISO bands of a deterministic labelling: the selector can learn it from
/// the priors alone, which makes it a capacity check independent of how
/// well the paths themselves were trained.
pub const RULE_ISO_BANDS: [f64; 2] = [400.0, 1600.0];

pub fn rule_labels(samples: &[DatasetSample]) -> Vec<ReferenceChoice> {
    samples
        .iter()
        .map(|s| match s.priors.iso {
            iso if iso < RULE_ISO_BANDS[0] => ReferenceChoice::Under,
            iso if iso < RULE_ISO_BANDS[1] => ReferenceChoice::Over,
            _ => ReferenceChoice::Medium,
        })
        .collect()
}
