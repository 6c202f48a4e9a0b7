use jointhdr_autograd::{Graph, Tensor};

use crate::image::Image;
use crate::imaging::{ReferenceChoice, ScenePriors, TmoOperator};
use crate::models::{batch, ranet_config, ranet_forward, run_ranet, ModelWeights, PRIOR_FEATURES};
use crate::pipeline::selector_input;
use crate::sim::DatasetSample;

use super::trainer::{StepLoss, TrainOutcome, Trainer};
use super::{TrainConfig, TrainError};

/// Precomputed selector input with its target path.
#[derive(Clone, Debug, PartialEq)]
pub struct RaNetExample {
    pub input: Image,
    pub priors: ScenePriors,
    pub label: ReferenceChoice,
}

/// Selector inputs from each sample's own bracket, paired with `labels`.
pub fn ranet_examples(
    samples: &[DatasetSample],
    labels: &[ReferenceChoice],
    tmo: TmoOperator,
) -> Result<Vec<RaNetExample>, TrainError> {
    if samples.len() != labels.len() {
        return Err(TrainError::Data(format!("{} samples but {} labels", samples.len(), labels.len())));
    }
    samples
        .iter()
        .zip(labels)
        .map(|(s, &label)| Ok(RaNetExample { input: selector_input(&s.bracket(), tmo)?, priors: s.priors, label }))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RaNetReport {
    pub train_accuracy: f64,
    pub heldout_accuracy: f64,
    pub heldout_predictions: Vec<ReferenceChoice>,
    /// The training labels name a single path, so accuracy says nothing
    /// about the selector.
    pub degenerate: bool,
}

/// Fraction of `examples` whose argmax matches the label, plus predictions.
pub fn ranet_accuracy(w: &ModelWeights, examples: &[RaNetExample]) -> Result<(f64, Vec<ReferenceChoice>), TrainError> {
    let mut preds = Vec::with_capacity(examples.len());
    for ex in examples {
        preds.push(ReferenceChoice::argmax(&run_ranet(w, &ex.input, &ex.priors)?));
    }
    let hits = preds.iter().zip(examples).filter(|(p, e)| **p == e.label).count();
    Ok((hits as f64 / examples.len().max(1) as f64, preds))
}

/// Cross-entropy training of the selector; no augmentation is applied.
pub fn train_ranet(
    cfg: &TrainConfig,
    init: ModelWeights,
    train: &[RaNetExample],
    heldout: &[RaNetExample],
) -> Result<(TrainOutcome, RaNetReport), TrainError> {
    let arch = ranet_config(&init)?.clone();
    let mut trainer = Trainer::new_or_resume(cfg, init)?;
    trainer.run(train.len(), |g: &mut Graph<f32>, p, idx, _rng| {
        let xs: Vec<&Image> = idx.iter().map(|&i| &train[i].input).collect();
        let pri: Vec<f32> = idx.iter().flat_map(|&i| train[i].priors.features()).collect();
        let targets: Vec<usize> = idx.iter().map(|&i| train[i].label.index()).collect();
        let x = g.input(batch(&xs)?);
        let pv = g.input(Tensor::new(&[idx.len(), PRIOR_FEATURES], pri)?);
        let logits = ranet_forward(g, &arch, p, x, pv)?;
        let loss = g.softmax_cross_entropy(logits, &targets)?;
        Ok(StepLoss { total: loss, recon: None, sobel: None })
    })?;
    let outcome = trainer.finish();
    let (train_accuracy, _) = ranet_accuracy(&outcome.weights, train)?;
    let (heldout_accuracy, heldout_predictions) = ranet_accuracy(&outcome.weights, heldout)?;
    let degenerate = train.windows(2).all(|w| w[0].label == w[1].label);
    Ok((outcome, RaNetReport { train_accuracy, heldout_accuracy, heldout_predictions, degenerate }))
}
