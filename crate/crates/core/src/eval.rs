//! Identification metrics and the degradation sweep harness.
//!
//! Per-user accuracy sums log-probabilities over all of a user's test
//! windows, across sessions. The alternate reading (per-session correctness
//! averaged per user) is reported alongside as
//! [`EvalReport::per_user_session_mean`].

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureWindow;
use crate::model::{argmax, FunnelModel};

mod sweep;

pub use sweep::{prepare_condition, run_sweep, sweep_csv, SweepOutcome, SweepResult, SWEEP_CSV_HEADER};

/// Name of the per-user definition, written into run metadata.
pub const PER_USER_DEFINITION: &str = "sum_over_all_test_windows";

/// An exact `correct / total` count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    pub fn value(self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    fn count<I: IntoIterator<Item = bool>>(hits: I) -> Self {
        hits.into_iter().fold(Self::default(), |a, hit| Self { correct: a.correct + hit as usize, total: a.total + 1 })
    }
}

impl fmt::Display for Accuracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} ({:.6})", self.correct, self.total, self.value())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionPrediction {
    pub session_id: String,
    pub summed: Vec<f64>,
    pub predicted: usize,
    pub truth: usize,
    pub windows: usize,
}

impl SessionPrediction {
    pub fn correct(&self) -> bool {
        self.predicted == self.truth
    }
}

/// Sums log-probability vectors column by column.
///
/// Each column is summed in ascending order of its values, so the result is
/// bit-identical for any ordering of `vectors`.
pub fn sum_log_probs(vectors: &[&[f64]]) -> Result<Vec<f64>> {
    let first = vectors.first().ok_or_else(|| Error::Parameter("no log-probability vectors".into()))?;
    let n = first.len();
    if vectors.iter().any(|v| v.len() != n) {
        return Err(Error::Shape("log-probability vectors differ in length".into()));
    }
    let mut column = Vec::with_capacity(vectors.len());
    Ok((0..n)
        .map(|k| {
            column.clear();
            column.extend(vectors.iter().map(|v| v[k]));
            column.sort_by(f64::total_cmp);
            column.iter().sum()
        })
        .collect())
}

/// Session decision from per-window log-probabilities.
pub fn classify_log_probs(session_id: &str, truth: usize, vectors: &[&[f64]]) -> Result<SessionPrediction> {
    if vectors.is_empty() {
        return Err(Error::Parameter(format!("session {session_id:?} has no windows")));
    }
    let summed = sum_log_probs(vectors)?;
    Ok(SessionPrediction {
        session_id: session_id.to_string(),
        predicted: argmax(&summed),
        summed,
        truth,
        windows: vectors.len(),
    })
}

/// Classifies one session from all of its windows.
pub fn classify_session(model: &FunnelModel, windows: &[FeatureWindow]) -> Result<SessionPrediction> {
    let first = windows.first().ok_or_else(|| Error::Parameter("session has no windows".into()))?;
    let lps = windows.iter().map(|w| model.forward(w)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[f64]> = lps.iter().map(|v| &v[..]).collect();
    classify_log_probs(&first.session_id, first.label, &refs)
}

/// Model outputs for a set of test windows.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredWindow {
    pub label: usize,
    pub session_id: String,
    pub log_probs: Vec<f64>,
}

/// Runs the model over `windows`, optionally on `pool`; output order
/// follows input order.
pub fn score_windows(model: &FunnelModel, windows: &[FeatureWindow], pool: Option<&rayon::ThreadPool>) -> Result<Vec<ScoredWindow>> {
    let one = |w: &FeatureWindow| {
        model.forward(w).map(|log_probs| ScoredWindow { label: w.label, session_id: w.session_id.clone(), log_probs })
    };
    match pool {
        Some(pool) => pool.install(|| windows.par_iter().map(one).collect()),
        None => windows.iter().map(one).collect(),
    }
}

pub fn per_sample_accuracy(scored: &[ScoredWindow]) -> Result<Accuracy> {
    if scored.is_empty() {
        return Err(Error::Parameter("no windows to evaluate".into()));
    }
    Ok(Accuracy::count(scored.iter().map(|s| argmax(&s.log_probs) == s.label)))
}

/// Window groups keyed by `(user label, session id)`.
fn group_sessions(scored: &[ScoredWindow]) -> BTreeMap<(usize, &str), Vec<&[f64]>> {
    let mut groups: BTreeMap<(usize, &str), Vec<&[f64]>> = BTreeMap::new();
    for s in scored {
        groups.entry((s.label, &s.session_id)).or_default().push(&s.log_probs);
    }
    groups
}

/// Predictions for every session, ordered by user label then session id.
pub fn session_predictions(scored: &[ScoredWindow]) -> Result<Vec<SessionPrediction>> {
    if scored.is_empty() {
        return Err(Error::Parameter("no windows to evaluate".into()));
    }
    group_sessions(scored)
        .into_iter()
        .map(|((label, sid), vs)| classify_log_probs(sid, label, &vs))
        .collect()
}

pub fn per_session_accuracy(sessions: &[SessionPrediction]) -> Result<Accuracy> {
    if sessions.is_empty() {
        return Err(Error::Parameter("no sessions to evaluate".into()));
    }
    Ok(Accuracy::count(sessions.iter().map(SessionPrediction::correct)))
}

/// Per-user decisions from all of each user's windows, ordered by label.
pub fn user_predictions(scored: &[ScoredWindow]) -> Result<Vec<SessionPrediction>> {
    if scored.is_empty() {
        return Err(Error::Parameter("no windows to evaluate".into()));
    }
    let mut groups: BTreeMap<usize, Vec<&[f64]>> = BTreeMap::new();
    for s in scored {
        groups.entry(s.label).or_default().push(&s.log_probs);
    }
    groups
        .into_iter()
        .map(|(label, vs)| classify_log_probs(&format!("user{label}"), label, &vs))
        .collect()
}

pub fn per_user_accuracy(scored: &[ScoredWindow]) -> Result<Accuracy> {
    Ok(Accuracy::count(user_predictions(scored)?.iter().map(SessionPrediction::correct)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_sample: Accuracy,
    pub per_session: Accuracy,
    pub per_user: Accuracy,
    /// Mean over users of each user's per-session accuracy.
    pub per_user_session_mean: f64,
    pub sessions: Vec<SessionPrediction>,
    pub num_users: usize,
    pub num_windows: usize,
}

impl EvalReport {
    pub fn from_scored(scored: &[ScoredWindow]) -> Result<Self> {
        let per_sample = per_sample_accuracy(scored)?;
        let sessions = session_predictions(scored)?;
        let per_session = per_session_accuracy(&sessions)?;
        let per_user = per_user_accuracy(scored)?;
        let mut by_user: BTreeMap<usize, Accuracy> = BTreeMap::new();
        for s in &sessions {
            let a = by_user.entry(s.truth).or_default();
            a.total += 1;
            a.correct += s.correct() as usize;
        }
        let per_user_session_mean = by_user.values().map(|a| a.value()).sum::<f64>() / by_user.len() as f64;
        Ok(Self {
            per_sample,
            per_session,
            per_user,
            per_user_session_mean,
            num_users: by_user.len(),
            num_windows: scored.len(),
            sessions,
        })
    }

    /// Metrics as `key=value` lines.
    pub fn summary(&self) -> String {
        format!(
            "per_sample_acc={:.6}\nper_session_acc={:.6}\nper_user_acc={:.6}\nper_user_session_mean={:.6}\n\
             per_user_definition={PER_USER_DEFINITION}\nnum_users={}\nnum_sessions={}\nnum_windows={}\n",
            self.per_sample.value(),
            self.per_session.value(),
            self.per_user.value(),
            self.per_user_session_mean,
            self.num_users,
            self.sessions.len(),
            self.num_windows,
        )
    }
}

/// Scores `windows` and computes all metrics.
pub fn evaluate(model: &FunnelModel, windows: &[FeatureWindow], pool: Option<&rayon::ThreadPool>) -> Result<EvalReport> {
    EvalReport::from_scored(&score_windows(model, windows, pool)?)
}
