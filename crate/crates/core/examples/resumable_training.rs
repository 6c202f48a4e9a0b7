//! Interrupts a denoiser run after a few epochs, resumes it from the
//! checkpoint and compares against an uninterrupted run.
//!
//!     cargo run --example resumable_training

use jointhdr::imaging::TmoOperator;
use jointhdr::models::{Architecture, ModelWeights, PreDnConfig};
use jointhdr::sim::DatasetSpec;
use jointhdr::training::{denoise_pairs, train_predn, LogRecord, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = DatasetSpec::new(3, 4, 0, 32).generate()?;
    let pairs = denoise_pairs(&data, TmoOperator::mu_law())?;
    let arch = Architecture::PreDn(PreDnConfig { preset: "toy".into(), base: 4, depth: 2 });
    let ckpt = tempfile_dir()?;
    let base = TrainConfig { epochs: 6, patch_size: 16, batch_size: 2, ..TrainConfig::toy_predn() };

    let full = train_predn(&base, ModelWeights::init(arch.clone(), 1), &pairs)?;

    let staged = TrainConfig { checkpoint_dir: Some(ckpt.clone()), checkpoint_every: 1, stop_after_epoch: Some(3), ..base.clone() };
    let first = train_predn(&staged, ModelWeights::init(arch.clone(), 1), &pairs)?;
    println!("interrupted after {} steps (completed: {})", first.log.len(), first.completed);
    let resumed = train_predn(&TrainConfig { stop_after_epoch: None, ..staged }, ModelWeights::init(arch, 1), &pairs)?;
    println!("resumed to {} steps (completed: {})", resumed.log.len(), resumed.completed);

    let key = |l: &[LogRecord]| l.iter().map(LogRecord::trace_key).collect::<Vec<_>>();
    println!("loss trace identical: {}", key(&full.log) == key(&resumed.log));
    println!("weights identical: {}", full.weights == resumed.weights);
    std::fs::remove_dir_all(&ckpt)?;
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let d = std::env::temp_dir().join(format!("jointhdr_resume_{}", std::process::id()));
    std::fs::create_dir_all(&d)?;
    Ok(d)
}
