//! Builds the three networks at toy and default sizes and runs one forward
//! pass of each on a synthetic bracket.
//!
//!     cargo run --example model_forward

use jointhdr::imaging::{ReferenceChoice, TmoOperator};
use jointhdr::models::{run_pcf, run_predn, run_ranet, Architecture, ModelWeights, PcfConfig, PreDnConfig, RaNetConfig};
use jointhdr::pipeline::{fusion_inputs, prepare_frames, selector_input};
use jointhdr::sim::{make_sample, SampleSpec, SceneSpec, RADIANCE_CEILING};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r = ReferenceChoice::Over;
    for (name, arches) in [
        ("toy", [Architecture::PreDn(PreDnConfig::toy()), Architecture::Pcf(PcfConfig::toy(r)), Architecture::RaNet(RaNetConfig::toy())]),
        (
            "default",
            [
                Architecture::PreDn(PreDnConfig::default_size()),
                Architecture::Pcf(PcfConfig::default_size(r)),
                Architecture::RaNet(RaNetConfig::default_size()),
            ],
        ),
    ] {
        let counts: Vec<String> = arches.iter().map(|a| format!("{} {}", a.family(), a.param_count())).collect();
        println!("{name:>8}: {}", counts.join(", "));
    }

    let tmo = TmoOperator::mu_law();
    let sample = make_sample(&SampleSpec::new(SceneSpec::new(3, 64, 64), 1600.0))?;
    let bracket = sample.variant(r);
    let predn = ModelWeights::init(Architecture::PreDn(PreDnConfig::toy()), 1);
    let pcf = ModelWeights::init(Architecture::Pcf(PcfConfig::toy(r)), 2);
    let ranet = ModelWeights::init(Architecture::RaNet(RaNetConfig::toy()), 3);

    let stages = prepare_frames(&bracket, None, tmo, RADIANCE_CEILING)?;
    let denoised = run_predn(&predn, &stages[0].ldr_tm, bracket.priors().iso)?;
    println!("predn: {:?} -> {:?}", stages[0].ldr_tm.pixels.dims(), denoised.pixels.dims());
    let fused = run_pcf(&pcf, &fusion_inputs(&stages), r)?;
    println!("pcf/{r}: output {:?}, range {:?}", fused.dims(), fused.min_max());
    let logits = run_ranet(&ranet, &selector_input(&bracket, tmo)?, bracket.priors())?;
    println!("ranet logits {logits:.3?} -> {}", ReferenceChoice::argmax(&logits));
    Ok(())
}
