//! Motion re-identification lab.
//!
//! Turns head and hand-controller telemetry into body-relative motion
//! features, trains a stacked-LSTM classifier to identify users, and
//! measures how identification accuracy responds to noise, frame-rate
//! reduction, rounding, and channel removal.
//!
//! The runnable programs under `examples/` walk through each stage; the
//! `reid-lab` binary exposes the same pipeline as subcommands.

pub mod cli;
pub mod degrade;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod model;
pub mod motion;
pub mod synthgen;

pub use error::{Error, Result};
