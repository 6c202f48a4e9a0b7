//! Trains the reference selector on ISO-rule labels and reports held-out
//! accuracy.
//!
//!     cargo run --release --example train_selector -- [epochs]

use jointhdr::imaging::{ReferenceChoice, TmoOperator};
use jointhdr::models::{Architecture, ModelWeights, RaNetConfig};
use jointhdr::sim::{make_sample, DatasetSample, SampleSpec, SceneSpec};
use jointhdr::training::{ranet_examples, rule_labels, train_ranet, TrainConfig, RULE_ISO_BANDS};

fn set(seed: u64, n: usize) -> Vec<DatasetSample> {
    // ISO sweeps 100..3200 on a log scale
    (0..n)
        .map(|i| {
            let iso = (100f64.log2() + 5.0 * (i as f64 + 0.5) / n as f64).exp2().round();
            let spec = SampleSpec { reference: ReferenceChoice::ALL[i % 3], ..SampleSpec::new(SceneSpec::new(seed + i as u64, 32, 32), iso) };
            make_sample(&spec).expect("valid spec")
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(80);
    let tmo = TmoOperator::mu_law();
    let (train, test) = (set(500, 48), set(900, 21));
    println!("rule bands at ISO {RULE_ISO_BANDS:?}");
    let ex_train = ranet_examples(&train, &rule_labels(&train), tmo)?;
    let ex_test = ranet_examples(&test, &rule_labels(&test), tmo)?;
    let cfg = TrainConfig { epochs, ..TrainConfig::toy_ranet() };
    let (out, rep) = train_ranet(&cfg, ModelWeights::init(Architecture::RaNet(RaNetConfig::toy()), 0), &ex_train, &ex_test)?;
    println!("{} steps, final loss {:.4}", out.log.len(), out.log.last().map_or(f64::NAN, |r| r.loss));
    println!("train accuracy {:.1}%, held-out {:.1}%", 100.0 * rep.train_accuracy, 100.0 * rep.heldout_accuracy);
    for (s, p) in test.iter().zip(&rep.heldout_predictions).take(7) {
        println!("  ISO {:>5.0} -> {p}", s.spec.iso);
    }
    Ok(())
}
