//! Overfits one fusion path on a handful of noiseless static brackets and
//! prints the training-set PSNR-mu.
//!
//! One step per epoch (four samples, batch four); the default 600 steps
//! take a few minutes.
//!
//!     cargo run --release --example train_fusion_path -- [steps] [under|medium|over]

use jointhdr::imaging::{ReferenceChoice, TmoOperator};
use jointhdr::metrics::{psnr, MetricDomain};
use jointhdr::models::{Architecture, ModelWeights, PcfConfig};
use jointhdr::pipeline::{fuse, inverse, prepare_frames};
use jointhdr::sim::{make_sample, NoiseSpec, SampleSpec, SceneSpec, RADIANCE_CEILING};
use jointhdr::training::{pcf_items, train_pcf, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(600);
    let r = match args.next().as_deref() {
        Some("under") => ReferenceChoice::Under,
        Some("over") => ReferenceChoice::Over,
        _ => ReferenceChoice::Medium,
    };
    let tmo = TmoOperator::mu_law();
    let samples: Vec<_> = (0..4)
        .map(|i| make_sample(&SampleSpec { noise: NoiseSpec::noiseless(), ..SampleSpec::new(SceneSpec::new(10 + i, 64, 64), 100.0) }))
        .collect::<Result<_, _>>()?;
    let items = pcf_items(&samples, None, r, tmo)?;
    let cfg = TrainConfig { epochs: steps, lr0: 1e-3, decay_gamma: 0.5, decay_every_epochs: (steps / 3).max(1), patch_size: 64, ..TrainConfig::toy_pcf() };

    let score = |w: &ModelWeights| -> Result<f64, Box<dyn std::error::Error>> {
        let mut acc = 0.0;
        for s in &samples {
            let stages = prepare_frames(&s.variant(r), None, tmo, RADIANCE_CEILING)?;
            let out = inverse(&fuse(w, &stages, r, tmo)?)?;
            acc += psnr(&out.0, &s.ground_truth.0, MetricDomain::Mu)? / samples.len() as f64;
        }
        Ok(acc)
    };
    let init = ModelWeights::init(Architecture::Pcf(PcfConfig::toy(r)), 1);
    println!("path {r}: PSNR-mu at init {:.2} dB", score(&init)?);
    let t = std::time::Instant::now();
    let out = train_pcf(&cfg, init, &items)?;
    println!("{} steps in {:.0}s, PSNR-mu {:.2} dB", out.log.len(), t.elapsed().as_secs_f64(), score(&out.weights)?);
    Ok(())
}
