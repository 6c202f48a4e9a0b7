//! Trains one fusion path per tone-mapping operator with an equal budget
//! and prints the comparison table.
//!
//!     cargo run --release --example tmo_ablation -- [epochs]

use jointhdr::imaging::{ReferenceChoice, TmoOperator, DEFAULT_MU};
use jointhdr::metrics::render_table;
use jointhdr::models::PcfConfig;
use jointhdr::sim::DatasetSpec;
use jointhdr::training::{ablate_tmo, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(40);
    let all = DatasetSpec::new(88, 6, 4, 64).generate()?;
    let (train, test) = all.split_at(6);
    let ops = TmoOperator::KINDS.iter().map(|k| TmoOperator::from_kind(k, DEFAULT_MU)).collect::<Result<Vec<_>, _>>()?;
    let cfg = TrainConfig { epochs, decay_every_epochs: (epochs / 2).max(1), ..TrainConfig::toy_pcf() };
    let r = ReferenceChoice::Medium;
    let rows = ablate_tmo(&cfg, &PcfConfig::toy(r), r, &ops, train, test)?;
    let table: Vec<(String, [f64; 4])> = rows.into_iter().map(|r| (r.tmo, r.means)).collect();
    println!("{}", render_table("tmo", &table));
    Ok(())
}
