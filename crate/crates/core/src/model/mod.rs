//! Stacked-LSTM ("funnel") user classifier trained from scratch.
//!
//! Forward passes run in 64-bit floats. Training runs either in 64-bit
//! (`Precision::Wide`, bit-reproducible and used for gradient checks) or in
//! 32-bit (`Precision::Narrow`, faster, not bit-identical to wide runs).

use std::fmt::Debug;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::FeatureWindow;

pub mod adam;
pub mod checkpoint;
pub mod lstm;
pub mod network;
mod train;

pub use adam::{adam_step, AdamState};
pub use lstm::{lstm_cell, LstmLayerParams};
pub use network::{argmax, log_softmax, Network};
pub use train::{batch_loss_and_grad, train, EpochRecord, TrainLog};

/// Floating-point type the network can be evaluated in.
pub trait Scalar: num_traits::Float + Send + Sync + Debug + Default + 'static {
    fn of(x: f64) -> Self;
    fn wide(self) -> f64;
}

impl Scalar for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn wide(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn wide(self) -> f64 {
        self as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    Wide,
    Narrow,
}

impl FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wide" | "f64" => Ok(Precision::Wide),
            "narrow" | "f32" => Ok(Precision::Narrow),
            _ => Err(Error::Parameter(format!("unknown precision {s:?}"))),
        }
    }
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::Wide => "wide",
            Precision::Narrow => "narrow",
        }
    }
}

/// Per-channel standardization fitted on training windows.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Channels with zero variance; their std is replaced by 1.
    pub flagged: Vec<bool>,
}

impl NormStats {
    pub fn fit(windows: &[FeatureWindow]) -> Result<Self> {
        let first = windows.first().ok_or_else(|| Error::DegenerateDataset("no training windows".into()))?;
        let ch = first.channels;
        let mut sum = vec![0.0; ch];
        let mut n = 0usize;
        for w in windows {
            if w.channels != ch {
                return Err(Error::Shape("training windows differ in width".into()));
            }
            for row in w.data.chunks_exact(ch) {
                for (s, v) in sum.iter_mut().zip(row) {
                    *s += v;
                }
            }
            n += w.frames;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut sq = vec![0.0; ch];
        for w in windows {
            for row in w.data.chunks_exact(ch) {
                for ((s, v), m) in sq.iter_mut().zip(row).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
        }
        let mut std = Vec::with_capacity(ch);
        let mut flagged = Vec::with_capacity(ch);
        for s in sq {
            let sd = (s / n as f64).sqrt();
            let degenerate = !(sd > 1e-12);
            flagged.push(degenerate);
            std.push(if degenerate { 1.0 } else { sd });
        }
        Ok(Self { mean, std, flagged })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn apply<T: Scalar>(&self, w: &FeatureWindow) -> Vec<T> {
        let ch = self.width();
        w.data
            .chunks_exact(ch)
            .flat_map(|row| {
                row.iter()
                    .zip(&self.mean)
                    .zip(&self.std)
                    .map(|((v, m), s)| T::of((v - m) / s))
            })
            .collect()
    }
}

/// A trained classifier with its input standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct FunnelModel {
    pub network: Network<f64>,
    pub norm: NormStats,
    /// Label `k` is `user_ids[k]`.
    pub user_ids: Vec<String>,
    pub input_frames: usize,
}

impl FunnelModel {
    pub fn new(network: Network<f64>, norm: NormStats, user_ids: Vec<String>, input_frames: usize) -> Result<Self> {
        network.check()?;
        if norm.width() != network.input_width() || user_ids.len() != network.num_users() || input_frames == 0 {
            return Err(Error::Shape("model parts disagree on input width or user count".into()));
        }
        if norm.std.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Shape("standard deviations must be positive".into()));
        }
        Ok(Self { network, norm, user_ids, input_frames })
    }

    pub fn num_users(&self) -> usize {
        self.network.num_users()
    }

    pub fn input_width(&self) -> usize {
        self.network.input_width()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.network.hidden_sizes()
    }

    fn check_window(&self, w: &FeatureWindow) -> Result<()> {
        if w.shape() != (self.input_frames, self.input_width()) {
            return Err(Error::Shape(format!(
                "model expects {} x {}, window is {} x {}",
                self.input_frames,
                self.input_width(),
                w.frames,
                w.channels
            )));
        }
        Ok(())
    }

    /// Log-probability of each user for one window.
    pub fn forward(&self, w: &FeatureWindow) -> Result<Vec<f64>> {
        self.check_window(w)?;
        let xs: Vec<f64> = self.norm.apply(w);
        Ok(self.network.log_probs(&xs, w.frames))
    }

    /// Mean cross-entropy over `batch` and its gradient, in 64-bit.
    pub fn loss_and_gradients(&self, batch: &[FeatureWindow]) -> Result<(f64, Network<f64>)> {
        if batch.is_empty() {
            return Err(Error::Parameter("empty batch".into()));
        }
        let mut inputs = Vec::with_capacity(batch.len());
        for w in batch {
            self.check_window(w)?;
            if w.label >= self.num_users() {
                return Err(Error::InvalidLabel { label: w.label, num_users: self.num_users() });
            }
            inputs.push((self.norm.apply::<f64>(w), w.label));
        }
        let refs: Vec<(&[f64], usize)> = inputs.iter().map(|(x, l)| (&x[..], *l)).collect();
        Ok(batch_loss_and_grad(&self.network, &refs, self.input_frames, None))
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub hidden_sizes: Vec<usize>,
    /// Stop after this many epochs without a better validation score.
    pub patience: Option<usize>,
    pub precision: Precision,
    /// Rescale each batch gradient to at most this global L2 norm.
    pub clip_norm: Option<f64>,
    /// Worker threads for per-sample gradients; results do not depend on it.
    pub jobs: usize,
}

/// Layer widths documented for a full-scale run.
pub const FULL_SCALE_HIDDEN: [usize; 2] = [256, 128];
pub const DESK_SCALE_HIDDEN: [usize; 2] = [32, 16];

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 2,
            learning_rate: adam::DEFAULT_LEARNING_RATE,
            seed: 0,
            hidden_sizes: DESK_SCALE_HIDDEN.to_vec(),
            patience: Some(10),
            precision: Precision::Wide,
            clip_norm: None,
            jobs: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.jobs == 0 {
            return Err(Error::Parameter("epochs, batch size and jobs must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Parameter("learning rate must be positive".into()));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::Parameter("hidden sizes must be positive".into()));
        }
        if self.hidden_sizes.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Parameter("hidden sizes must be non-increasing".into()));
        }
        if self.clip_norm.is_some_and(|c| !(c.is_finite() && c > 0.0)) {
            return Err(Error::Parameter("clip norm must be positive".into()));
        }
        if self.patience == Some(0) {
            return Err(Error::Parameter("patience must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(frames: usize, channels: usize, f: impl Fn(usize, usize) -> f64, label: usize) -> FeatureWindow {
        let data = (0..frames * channels).map(|k| f(k / channels, k % channels)).collect();
        FeatureWindow::new(frames, channels, data, label, "s").unwrap()
    }

    #[test]
    fn standardized_training_data_has_unit_moments() {
        let ws: Vec<_> = (0..3)
            .map(|k| window(20, 3, |t, c| ((t * 7 + c * 3 + k) % 11) as f64 * (c as f64 + 0.5) + c as f64, 0))
            .collect();
        let mut ws2 = ws.clone();
        ws2.push(window(20, 3, |_, _| 0.0, 0));
        let stats = NormStats::fit(&ws2).unwrap();
        assert!(stats.flagged.iter().all(|f| !f));
        let rows: Vec<Vec<f64>> = ws2.iter().map(|w| stats.apply::<f64>(w)).collect();
        for c in 0..3 {
            let vals: Vec<f64> = rows.iter().flat_map(|r| r.chunks(3).map(move |row| row[c])).collect();
            let n = vals.len() as f64;
            let m = vals.iter().sum::<f64>() / n;
            let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            assert!(m.abs() < 1e-6 && (sd - 1.0).abs() < 1e-6);
        }

        let constant = vec![window(5, 2, |_, c| c as f64, 0)];
        let stats = NormStats::fit(&constant).unwrap();
        assert_eq!(stats.flagged, vec![true, true]);
        assert_eq!(stats.std, vec![1.0, 1.0]);
    }

    fn model(users: usize) -> FunnelModel {
        let net = Network::init(3, &[4, 2], users, 1);
        let norm = NormStats { mean: vec![0.0; 3], std: vec![1.0; 3], flagged: vec![false; 3] };
        FunnelModel::new(net, norm, (0..users).map(|u| u.to_string()).collect(), 5).unwrap()
    }

    #[test]
    fn forward_examples() {
        let one = model(1);
        let w = window(5, 3, |t, c| (t + c) as f64, 0);
        assert_eq!(one.forward(&w).unwrap(), vec![0.0]);

        let m = model(4);
        let lp = m.forward(&w).unwrap();
        let s: f64 = lp.iter().map(|v| v.exp()).sum();
        assert!((s - 1.0).abs() < 1e-9);
        assert_eq!(lp, m.forward(&w.clone()).unwrap());
        assert!(m.forward(&window(4, 3, |_, _| 0.0, 0)).is_err());
    }

    #[test]
    fn uniform_model_loss_is_log_users() {
        let mut m = model(5);
        m.network.head_weights.iter_mut().for_each(|w| *w = 0.0);
        let w = window(5, 3, |t, _| t as f64, 2);
        let (loss, _) = m.loss_and_gradients(&[w.clone(), w]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn invalid_label_and_empty_batch() {
        let m = model(3);
        let w = window(5, 3, |_, _| 0.0, 3);
        assert!(matches!(m.loss_and_gradients(&[w]), Err(Error::InvalidLabel { .. })));
        assert!(m.loss_and_gradients(&[]).is_err());
    }

    #[test]
    fn config_validation() {
        TrainConfig::default().validate().unwrap();
        let bad = TrainConfig { hidden_sizes: vec![8, 16], ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(TrainConfig { epochs: 0, ..Default::default() }.validate().is_err());
        assert_eq!("narrow".parse::<Precision>().unwrap(), Precision::Narrow);
    }
}
