//! End-to-end selective fusion at toy scale: train three fusion paths,
//! label a separate split with each sample's winning path, train the
//! selector, then run inference and the fixed/selective/oracle comparison.
//!
//!     cargo run --release --example selective_pipeline -- [path_epochs]

use jointhdr::imaging::{ReferenceChoice, TmoOperator};
use jointhdr::metrics::Metric;
use jointhdr::models::{Architecture, ModelWeights, PcfConfig, RaNetConfig};
use jointhdr::pipeline::{evaluate, run_sjhdr, TrainedPipeline, Variant};
use jointhdr::sim::DatasetSpec;
use jointhdr::training::{label_paths, pcf_items, ranet_examples, train_pcf, train_ranet, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(40);
    let tmo = TmoOperator::mu_law();
    let all = DatasetSpec::new(5, 36, 6, 64).generate()?;
    let (train, rest) = all.split_at(12);
    let (label_set, test) = rest.split_at(24);

    let cfg = TrainConfig { epochs, decay_every_epochs: (epochs / 2).max(1), ..TrainConfig::toy_pcf() };
    let mut paths = Vec::new();
    for r in ReferenceChoice::ALL {
        let items = pcf_items(train, None, r, tmo)?;
        let out = train_pcf(&cfg, ModelWeights::init(Architecture::Pcf(PcfConfig::toy(r)), r.index() as u64), &items)?;
        println!("path {r}: {} steps, final loss {:.4}", out.log.len(), out.log.last().map_or(f64::NAN, |l| l.loss));
        paths.push(out.weights);
    }
    let pipe = TrainedPipeline::new(None, paths.try_into().expect("three paths"), None, tmo)?;

    let labels: Vec<ReferenceChoice> = label_paths(&pipe, label_set, Metric::PsnrMu)?.into_iter().map(|l| l.winner).collect();
    println!("winning paths: {}", labels.iter().map(|r| r.name()).collect::<Vec<_>>().join(" "));
    let ex = ranet_examples(label_set, &labels, tmo)?;
    let rcfg = TrainConfig { epochs: 40, ..TrainConfig::toy_ranet() };
    let (sel, rep) = train_ranet(&rcfg, ModelWeights::init(Architecture::RaNet(RaNetConfig::toy()), 9), &ex, &[])?;
    if rep.degenerate {
        println!("all samples favour one path; the selector can only learn that path");
    }
    let pipe = pipe.with_ranet(sel.weights)?;

    let res = run_sjhdr(&pipe, &test[0].bracket(), None)?;
    println!("sample 0: chose {} (logits {:.3?}), timing {:?}", res.chosen, res.ranet_logits.unwrap_or_default(), res.timing);
    let ev = evaluate(&pipe, test, &Variant::TABLE, Metric::PsnrMu)?;
    println!("{}", ev.table());
    Ok(())
}
