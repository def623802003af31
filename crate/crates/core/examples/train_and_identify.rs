//! Trains a desk-scale funnel on synthetic users and identifies the
//! held-out sessions. Takes about a minute in release mode.
//!
//! `cargo run --release --example train_and_identify`

use reid_lab::degrade::Degradation;
use reid_lab::eval::{evaluate, prepare_condition};
use reid_lab::ingest::{build_dataset, SplitConfig};
use reid_lab::model::{checkpoint, train, TrainConfig};
use reid_lab::synthgen::generate_dataset;

fn main() -> reid_lab::Result<()> {
    let recs = generate_dataset(8, 12, 60.0, 30.0, 0)?;
    let ds = build_dataset(recs, SplitConfig::new(8, 2, 2)?)?;
    let [train_w, val_w, test_w] = prepare_condition(&ds, &Degradation::None, 0, 30.0)?;
    println!("{} train, {} val, {} test windows of {:?}", train_w.len(), val_w.len(), test_w.len(), train_w[0].shape());

    let cfg = TrainConfig::default();
    let (model, log) = train(&train_w, &val_w, ds.user_ids(), &cfg)?;
    for e in &log.epochs {
        println!("epoch {:>2}  train loss {:.4}  val loss {:.4}  val acc {:.3}", e.epoch, e.train_loss, e.val_loss, e.val_accuracy);
    }
    println!("kept epoch {}", log.best_epoch);

    let report = evaluate(&model, &test_w, None)?;
    println!("per-sample {}\nper-session {}\nper-user {}", report.per_sample, report.per_session, report.per_user);
    for s in &report.sessions {
        println!("  {} {} -> {}", model.user_ids[s.truth], s.session_id, model.user_ids[s.predicted]);
    }
    let bytes = checkpoint::encode(&model);
    assert_eq!(checkpoint::decode(&bytes)?, model);
    println!("checkpoint: {} bytes", bytes.len());
    Ok(())
}
