//! Generates a small seeded dataset, writes it with a train/test split and
//! reads it back.
//!
//!     cargo run --example generate_dataset -- [out_dir]

use std::path::PathBuf;

use jointhdr::sim::{read_dataset, read_manifest, write_dataset_split, DatasetSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("jointhdr_dataset"));
    let spec = DatasetSpec::new(42, 8, 4, 64);
    let samples = spec.generate()?;
    write_dataset_split(&samples, &out, spec.train_count)?;

    let manifest = read_manifest(&out)?;
    println!("{}: {} samples (json manifest below)", out.display(), samples.len());
    println!("{}", serde_json::to_string_pretty(&manifest)?.lines().take(12).collect::<Vec<_>>().join("\n"));
    for s in &samples {
        let m = &s.spec.motion;
        println!(
            "  iso {:>6.0}  ref {:<6}  shift {:?}  objects {:?}  occlusion {}",
            s.spec.iso,
            s.reference().name(),
            m.global_shift,
            m.object_shifts,
            m.occlusion
        );
    }
    let back = read_dataset(&out)?;
    assert_eq!(back, samples);
    println!("round trip: identical");
    Ok(())
}
