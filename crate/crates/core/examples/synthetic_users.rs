//! Generates a small synthetic population, writes it in the recording
//! format, and splits it chronologically.
//!
//! `cargo run --example synthetic_users -- /tmp/reid-demo`

use std::path::PathBuf;

use reid_lab::ingest::{build_dataset, load_dir, write_recording, Split, SplitConfig};
use reid_lab::synthgen::{generate_dataset, generate_profile};

fn main() -> reid_lab::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("reid-demo"));
    std::fs::create_dir_all(&dir).map_err(|e| reid_lab::Error::Parameter(e.to_string()))?;

    for seed in 1..=3 {
        let p = generate_profile(seed);
        println!(
            "profile {seed}: head {:.3} m, arm scale {:.3}, left rest {:?}, {} left-x components",
            p.head_height,
            p.arm_scale,
            p.hands[0].rest.to_array().map(|v| (v * 1000.0).round() / 1000.0),
            p.hands[0].components[0].len()
        );
    }

    for r in generate_dataset(4, 6, 20.0, 30.0, 1)? {
        write_recording(&dir.join(format!("{}_{}.jsonl", r.user_id, r.session_id)), &r)?;
    }
    let loaded = load_dir(&dir)?;
    let ds = build_dataset(loaded.into_iter().map(|(_, r)| r).collect(), SplitConfig::new(4, 1, 1)?)?;
    println!("{} users in {}", ds.num_users(), dir.display());
    for split in Split::ALL {
        let sessions: Vec<String> = ds.split(split).filter(|(l, _)| *l == 0).map(|(_, r)| r.session_id.clone()).collect();
        println!("  user000 {:<5} {sessions:?}", split.as_str());
    }
    Ok(())
}
