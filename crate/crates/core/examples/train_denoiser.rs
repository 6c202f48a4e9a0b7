//! Trains the tone-mapping-domain denoiser on a few ISO-varied samples and
//! reports held-out PSNR before and after denoising.
//!
//!     cargo run --release --example train_denoiser -- [epochs]

use jointhdr::imaging::{TmoOperator, TonemappedImage};
use jointhdr::metrics::{psnr, MetricDomain};
use jointhdr::models::{run_predn, Architecture, ModelWeights, PreDnConfig};
use jointhdr::sim::{make_sample, DatasetSample, SampleSpec, SceneSpec};
use jointhdr::training::{denoise_pairs, train_predn, TrainConfig};

fn samples(seed: u64, n: u64, iso: impl Fn(u64) -> f64) -> Vec<DatasetSample> {
    (0..n).map(|i| make_sample(&SampleSpec::new(SceneSpec::new(seed + i, 64, 64), iso(i))).expect("valid spec")).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(160);
    let isos = [100.0, 200.0, 400.0, 800.0, 1600.0, 3200.0];
    let tmo = TmoOperator::mu_law();
    let pairs = denoise_pairs(&samples(1000, 12, |i| isos[i as usize % 6]), tmo)?;

    let cfg = TrainConfig { epochs, lr0: 3e-3, decay_every_epochs: (epochs * 3 / 8).max(1), ..TrainConfig::toy_predn() };
    let out = train_predn(&cfg, ModelWeights::init(Architecture::PreDn(PreDnConfig::toy()), 0), &pairs)?;
    for r in out.log.iter().step_by((out.log.len() / 8).max(1)) {
        println!("step {:>5} epoch {:>4} lr {:.1e} loss {:.5}", r.step, r.epoch, r.lr, r.loss);
    }
    for iso in [400.0, 1600.0, 3200.0] {
        let held = denoise_pairs(&samples(9000, 3, |_| iso), tmo)?;
        let (mut before, mut after) = (0.0, 0.0);
        for p in &held {
            let d = run_predn(&out.weights, &TonemappedImage { pixels: p.input.clone(), operator: tmo }, iso)?;
            before += psnr(&p.input, &p.target, MetricDomain::Linear)? / held.len() as f64;
            after += psnr(&d.pixels, &p.target, MetricDomain::Linear)? / held.len() as f64;
        }
        println!("ISO {iso:>5}: {before:.2} dB -> {after:.2} dB");
    }
    Ok(())
}
