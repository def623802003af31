//! A reduced sweep over one value of each degradation family, printed as
//! the sweep CSV. Uses short windows so it finishes quickly.
//!
//! `cargo run --release --example degradation_sweep`

use reid_lab::degrade::{Degradation, DimPreset};
use reid_lab::eval::{run_sweep, sweep_csv};
use reid_lab::ingest::{build_dataset, SplitConfig};
use reid_lab::model::TrainConfig;
use reid_lab::synthgen::generate_dataset;

fn main() -> reid_lab::Result<()> {
    let recs = generate_dataset(4, 6, 20.0, 30.0, 2)?;
    let ds = build_dataset(recs, SplitConfig::new(4, 1, 1)?)?;
    let conditions = [
        Degradation::GaussianNoise { sigma: 0.1 },
        Degradation::ReducedFps { fps: 10 },
        Degradation::ReducedPrecision { step: 0.01 },
        Degradation::ReducedDims(DimPreset::HandRotationsOnly),
    ];
    let cfg = TrainConfig { epochs: 25, hidden_sizes: vec![16, 8], seed: 2, ..TrainConfig::default() };
    let outcomes = run_sweep(&ds, &conditions, &cfg, 5.0)?;
    let results: Vec<_> = outcomes.iter().map(|o| o.result.clone()).collect();
    print!("{}", sweep_csv(&results));
    Ok(())
}
