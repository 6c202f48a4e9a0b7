//! Reconstruction/gradient losses and the PSNR/SSIM metrics in both the
//! linear and mu-law domains.
//!
//!     cargo run --example losses_metrics

use jointhdr::imaging::{tmo_apply, TmoOperator};
use jointhdr::loss::{total_loss, DEFAULT_LAMBDA};
use jointhdr::metrics::{render_table, Metric, MetricRecord, MetricReport};
use jointhdr::sim::{make_sample, SampleSpec, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = make_sample(&SampleSpec::new(SceneSpec::new(11, 64, 64), 400.0))?;
    let gt = &s.ground_truth.0;
    let tmo = TmoOperator::mu_law();
    let gt_tm = tmo_apply(gt, tmo)?.pixels;

    let candidates = [
        ("exact", gt.clone()),
        ("dimmed", gt.map(|v| v * 0.9)),
        ("blurred", gt.resize_area(32, 32).resize_area(64, 64)),
        ("offset", gt.map(|v| (v + 0.01).min(1.0))),
    ];
    let mut rows = Vec::new();
    for (name, pred) in &candidates {
        let l = total_loss(&tmo_apply(pred, tmo)?.pixels, &gt_tm, DEFAULT_LAMBDA)?;
        println!("{name:>8}: loss {:.5} (recon {:.5}, sobel {:.5})", l.total, l.recon, l.sobel);
        let mut rep = MetricReport::default();
        rep.push(MetricRecord::measure(*name, pred, gt)?);
        rows.push((name.to_string(), rep.means()));
    }
    println!("{}", render_table("candidate", &rows));
    println!("metric columns: {:?}", Metric::ALL.map(Metric::name));
    Ok(())
}
