//! Renders one synthetic HDR scene, captures a three-exposure bracket and
//! writes the frames plus the ground truth as an image set.
//!
//!     cargo run --example simulate_bracket -- [out_dir]

use std::path::PathBuf;

use jointhdr::imaging::{gamma_expand, Gamma};
use jointhdr::sim::{make_sample, write_image_set, MotionSpec, SampleSpec, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("jointhdr_bracket"));
    let mut spec = SampleSpec::new(SceneSpec::new(7, 96, 96), 800.0);
    spec.motion = MotionSpec { global_shift: (1, -1), object_shifts: vec![(4, 2)], occlusion: false };

    for gamma in [Gamma::Rgb, Gamma::Raw] {
        let s = make_sample(&SampleSpec { gamma, ..spec.clone() })?;
        println!("{gamma:?}: {} bits, reference {}", gamma.bit_depth(), s.reference());
        for (i, f) in s.dynamic_frames.iter().enumerate() {
            let lin = gamma_expand(f);
            let clipped = f.pixels().data().iter().filter(|&&v| v >= 1.0).count() as f64 / f.pixels().data().len() as f64;
            println!(
                "  frame {i}: t={:<6} ev={:+.0} mean code {:.3}, mean linear {:.4}, clipped {:.1}%",
                f.exposure_time(),
                f.ev(),
                f.pixels().mean(),
                lin.0.mean(),
                100.0 * clipped
            );
        }
        if gamma == Gamma::Rgb {
            let f = &s.dynamic_frames;
            let images = [("under", f[0].pixels()), ("medium", f[1].pixels()), ("over", f[2].pixels()), ("ground_truth", &s.ground_truth.0)];
            write_image_set(&out, &images, serde_json::to_value(&s.spec)?)?;
            println!("  wrote {}", out.display());
        }
    }
    Ok(())
}
