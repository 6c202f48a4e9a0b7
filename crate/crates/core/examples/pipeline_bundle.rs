//! Saves a pipeline bundle, reloads it (fusion paths load lazily on first
//! use) and checks that inference is bit-identical.
//!
//!     cargo run --example pipeline_bundle -- [bundle_dir]

use std::path::PathBuf;

use jointhdr::imaging::{ReferenceChoice, TmoOperator};
use jointhdr::models::{Architecture, ModelWeights, PcfConfig, PreDnConfig, RaNetConfig};
use jointhdr::pipeline::{load_pipeline, run_sjhdr, save_pipeline, TrainedPipeline};
use jointhdr::sim::{make_sample, SampleSpec, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("jointhdr_bundle"));
    let paths = ReferenceChoice::ALL.map(|r| ModelWeights::init(Architecture::Pcf(PcfConfig::toy(r)), 10 + r.index() as u64));
    let pipe = TrainedPipeline::new(
        Some(ModelWeights::init(Architecture::PreDn(PreDnConfig::toy()), 1)),
        paths,
        Some(ModelWeights::init(Architecture::RaNet(RaNetConfig::toy()), 2)),
        TmoOperator::mu_law(),
    )?;
    save_pipeline(&pipe, &dir)?;
    println!("saved to {}", dir.display());

    let loaded = load_pipeline(&dir)?;
    let resident = |p: &TrainedPipeline| ReferenceChoice::ALL.map(|r| p.is_resident(r));
    println!("resident paths after load: {:?}", resident(&loaded));

    let bracket = make_sample(&SampleSpec::new(SceneSpec::new(4, 64, 64), 800.0))?.bracket();
    let a = run_sjhdr(&pipe, &bracket, None)?;
    let b = run_sjhdr(&loaded, &bracket, None)?;
    println!("chose {} / {}; resident now {:?}", a.chosen, b.chosen, resident(&loaded));
    assert_eq!(a.hdr_tm.pixels, b.hdr_tm.pixels);
    println!("outputs identical");
    Ok(())
}
