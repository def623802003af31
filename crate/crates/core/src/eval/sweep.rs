use std::fmt::Write as _;

use rayon::prelude::*;

use super::{evaluate, EvalReport};
use crate::degrade::{recording_seed, Degradation, BASE_FPS};
use crate::error::{Error, Result};
use crate::features::{apply_mask, featurize_sampled, resample, FeatureWindow};
use crate::ingest::{Dataset, Split};
use crate::model::{train, FunnelModel, TrainConfig, TrainLog};
use crate::motion::Recording;

pub const SWEEP_CSV_HEADER: &str =
    "condition,parameter,per_sample_acc,per_session_acc,per_user_acc,num_users,num_sessions,num_windows,seed";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub condition: Degradation,
    pub per_sample_acc: f64,
    pub per_session_acc: f64,
    pub per_user_acc: f64,
    pub num_users: usize,
    pub num_sessions: usize,
    pub num_windows: usize,
    pub seed: u64,
}

impl SweepResult {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{},{},{},{}",
            self.condition.kind(),
            self.condition.parameter(),
            self.per_sample_acc,
            self.per_session_acc,
            self.per_user_acc,
            self.num_users,
            self.num_sessions,
            self.num_windows,
            self.seed
        )
    }
}

pub fn sweep_csv(results: &[SweepResult]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for r in results {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// Everything produced for one condition.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub result: SweepResult,
    pub report: EvalReport,
    pub log: TrainLog,
    pub model: FunnelModel,
}

struct Sampled<'a> {
    split: Split,
    label: usize,
    rec: Recording,
    source: &'a Recording,
}

fn resample_all(dataset: &Dataset) -> Result<Vec<Sampled<'_>>> {
    let mut out = Vec::new();
    for split in [Split::Train, Split::Val, Split::Test] {
        for (label, rec) in dataset.split(split) {
            out.push(Sampled { split, label, rec: resample(rec, BASE_FPS as f64)?, source: rec });
        }
    }
    Ok(out)
}

/// Train, validation and test windows of `dataset` under one condition.
///
/// Recordings are resampled to the base rate, degraded with a seed derived
/// from `seed` and their ids, featurized at the condition's output rate and
/// masked.
pub fn prepare_condition(
    dataset: &Dataset,
    condition: &Degradation,
    seed: u64,
    window_seconds: f64,
) -> Result<[Vec<FeatureWindow>; 3]> {
    prepare(&resample_all(dataset)?, condition, seed, window_seconds, None)
}

fn prepare(
    sampled: &[Sampled<'_>],
    condition: &Degradation,
    seed: u64,
    window_seconds: f64,
    pool: Option<&rayon::ThreadPool>,
) -> Result<[Vec<FeatureWindow>; 3]> {
    condition.validate()?;
    let mask = condition.mask();
    let one = |s: &Sampled<'_>| -> Result<Vec<FeatureWindow>> {
        let rec = condition.apply_raw(&s.rec, recording_seed(seed, &s.source.user_id, &s.source.session_id))?;
        featurize_sampled(&rec, condition.output_fps(), window_seconds, s.label)?
            .iter()
            .map(|w| apply_mask(w, &mask))
            .collect()
    };
    let windows: Vec<Vec<FeatureWindow>> = match pool {
        Some(pool) => pool.install(|| sampled.par_iter().map(one).collect::<Result<_>>())?,
        None => sampled.iter().map(one).collect::<Result<_>>()?,
    };
    let mut out: [Vec<FeatureWindow>; 3] = Default::default();
    for (s, ws) in sampled.iter().zip(windows) {
        let k = match s.split {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        };
        out[k].extend(ws);
    }
    Ok(out)
}

/// Retrains and evaluates once per condition, all from `cfg.seed`.
///
/// A `none` condition is prepended unless the list already contains a
/// neutral condition, so every sweep carries its baseline.
pub fn run_sweep(
    dataset: &Dataset,
    conditions: &[Degradation],
    cfg: &TrainConfig,
    window_seconds: f64,
) -> Result<Vec<SweepOutcome>> {
    cfg.validate()?;
    for c in conditions {
        c.validate()?;
    }
    let mut all = Vec::with_capacity(conditions.len() + 1);
    if !conditions.iter().any(Degradation::is_neutral) {
        all.push(Degradation::None);
    }
    all.extend_from_slice(conditions);

    let pool = if cfg.jobs > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.jobs)
                .build()
                .map_err(|e| Error::Parameter(e.to_string()))?,
        )
    } else {
        None
    };
    let sampled = resample_all(dataset)?;
    let user_ids = dataset.user_ids();
    let mut out = Vec::with_capacity(all.len());
    for condition in all {
        let [train_w, val_w, test_w] = prepare(&sampled, &condition, cfg.seed, window_seconds, pool.as_ref())?;
        if test_w.is_empty() {
            return Err(Error::DegenerateDataset(format!("condition {condition} leaves no test windows")));
        }
        let (model, log) = train(&train_w, &val_w, user_ids.clone(), cfg)?;
        let report = evaluate(&model, &test_w, pool.as_ref())?;
        let result = SweepResult {
            condition,
            per_sample_acc: report.per_sample.value(),
            per_session_acc: report.per_session.value(),
            per_user_acc: report.per_user.value(),
            num_users: report.num_users,
            num_sessions: report.sessions.len(),
            num_windows: report.num_windows,
            seed: cfg.seed,
        };
        out.push(SweepOutcome { result, report, log, model });
    }
    Ok(out)
}
