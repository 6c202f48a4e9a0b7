//! Tone-mapping operators: forward/inverse pairs and a few sample values.
//!
//!     cargo run --example tone_mapping

use jointhdr::image::Image;
use jointhdr::imaging::{inv_tmo_apply, tmo_apply, TmoOperator, DEFAULT_MU};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let xs: Vec<f32> = (0..=10).map(|i| i as f32 / 10.0).collect();
    let x = Image::new(1, 1, xs.len(), xs.clone()).expect("dims match");
    println!("{:>10} {}", "x", xs.iter().map(|v| format!("{v:>6.2}")).collect::<String>());
    for kind in TmoOperator::KINDS {
        let op = TmoOperator::from_kind(kind, DEFAULT_MU)?;
        let y = tmo_apply(&x, op)?;
        let back = inv_tmo_apply(&y.pixels, op)?;
        let err = back.zip_map(&x, |a, b| (a - b).abs()).min_max().1;
        let row: String = y.pixels.data().iter().map(|v| format!("{v:>6.3}")).collect();
        println!("{kind:>10} {row}   round-trip err {err:.1e}");
    }
    // mu-law expands the dark end strongly
    let mu = TmoOperator::mu_law();
    println!("mu-law slope at 0: {:.1}, at 1: {:.4}", mu.derivative(0.0), mu.derivative(1.0));
    Ok(())
}
