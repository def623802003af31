use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::{adam_step, AdamState};
use super::network::{argmax, Network};
use super::{FunnelModel, NormStats, Precision, Scalar, TrainConfig};
use crate::error::{Error, Result};
use crate::features::FeatureWindow;

// Keeps the shuffle stream separate from weight initialization.
const SHUFFLE_STREAM: u64 = 0x5eed_5eed;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
    pub flagged_channels: Vec<usize>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,val_accuracy\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{:.6},{:.6},{:.6}", e.epoch, e.train_loss, e.val_loss, e.val_accuracy);
        }
        out
    }
}

/// Mean loss and gradient over a batch of standardized sequences.
///
/// Per-sample gradients may be computed on `pool`, but they are always
/// summed in batch order, so the result does not depend on thread count.
pub fn batch_loss_and_grad<T: Scalar>(
    net: &Network<T>,
    batch: &[(&[T], usize)],
    steps: usize,
    pool: Option<&rayon::ThreadPool>,
) -> (T, Network<T>) {
    let one = |&(x, label): &(&[T], usize)| net.sample_loss_and_grad(x, steps, label);
    let parts: Vec<(T, Network<T>)> = match pool {
        Some(pool) => pool.install(|| batch.par_iter().map(one).collect()),
        None => batch.iter().map(one).collect(),
    };
    let mut grad = net.zeros_like();
    let mut loss = T::zero();
    for (l, g) in &parts {
        loss = loss + *l;
        grad.accumulate(g);
    }
    let inv = T::one() / T::of(batch.len() as f64);
    grad.scale(inv);
    (loss * inv, grad)
}

fn check_data(train: &[FeatureWindow], val: &[FeatureWindow], num_users: usize) -> Result<(usize, usize)> {
    if num_users < 2 {
        return Err(Error::DegenerateDataset(format!("need at least 2 users, got {num_users}")));
    }
    let first = train.first().ok_or_else(|| Error::DegenerateDataset("no training windows".into()))?;
    let shape = first.shape();
    let mut seen = vec![false; num_users];
    for w in train.iter().chain(val) {
        if w.shape() != shape {
            return Err(Error::Shape(format!("window {:?} differs from {:?}", w.shape(), shape)));
        }
        if w.label >= num_users {
            return Err(Error::InvalidLabel { label: w.label, num_users });
        }
    }
    for w in train {
        seen[w.label] = true;
    }
    if let Some(u) = seen.iter().position(|s| !s) {
        return Err(Error::DegenerateDataset(format!("user {u} has no training windows")));
    }
    Ok(shape)
}

/// Trains a funnel model and keeps the parameters with the best validation
/// per-sample accuracy (ties go to lower validation loss, then earlier).
pub fn train(
    train: &[FeatureWindow],
    val: &[FeatureWindow],
    user_ids: Vec<String>,
    cfg: &TrainConfig,
) -> Result<(FunnelModel, TrainLog)> {
    cfg.validate()?;
    let (frames, width) = check_data(train, val, user_ids.len())?;
    let norm = NormStats::fit(train)?;
    let (network, log) = match cfg.precision {
        Precision::Wide => run::<f64>(train, val, &norm, user_ids.len(), frames, width, cfg)?,
        Precision::Narrow => run::<f32>(train, val, &norm, user_ids.len(), frames, width, cfg)?,
    };
    Ok((FunnelModel::new(network, norm, user_ids, frames)?, log))
}

fn evaluate<T: Scalar>(net: &Network<T>, data: &[(Vec<T>, usize)], steps: usize, pool: Option<&rayon::ThreadPool>) -> (f64, f64) {
    let one = |(x, label): &(Vec<T>, usize)| {
        let lp = net.log_probs(x, steps);
        (-lp[*label].wide(), argmax(&lp) == *label)
    };
    let parts: Vec<(f64, bool)> = match pool {
        Some(pool) => pool.install(|| data.par_iter().map(one).collect()),
        None => data.iter().map(one).collect(),
    };
    let n = parts.len().max(1) as f64;
    let loss = parts.iter().map(|p| p.0).sum::<f64>() / n;
    let correct = parts.iter().filter(|p| p.1).count();
    (loss, correct as f64 / n)
}

fn run<T: Scalar>(
    train: &[FeatureWindow],
    val: &[FeatureWindow],
    norm: &NormStats,
    num_users: usize,
    steps: usize,
    width: usize,
    cfg: &TrainConfig,
) -> Result<(Network<f64>, TrainLog)> {
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
    let pool = pool.as_ref();
    let train_x: Vec<(Vec<T>, usize)> = train.iter().map(|w| (norm.apply::<T>(w), w.label)).collect();
    let val_x: Vec<(Vec<T>, usize)> = val.iter().map(|w| (norm.apply::<T>(w), w.label)).collect();

    let mut net = Network::<T>::init(width, &cfg.hidden_sizes, num_users, cfg.seed);
    let mut adam = AdamState::new(&net, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train_x.len()).collect();

    let mut log = TrainLog {
        flagged_channels: norm.flagged.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| i).collect(),
        ..Default::default()
    };
    let mut best: Option<(f64, f64, Network<T>)> = None;
    let mut since_best = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[T], usize)> = chunk.iter().map(|&i| (&train_x[i].0[..], train_x[i].1)).collect();
            let (loss, mut grad) = batch_loss_and_grad(&net, &batch, steps, pool);
            if let Some(max) = cfg.clip_norm {
                let norm = grad.l2_norm();
                if norm > max {
                    grad.scale(T::of(max / norm));
                }
            }
            let loss = loss.wide();
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("training loss became {loss} in epoch {epoch}")));
            }
            loss_sum += loss * chunk.len() as f64;
            adam_step(&mut net, &grad, &mut adam);
        }
        let train_loss = loss_sum / train_x.len() as f64;
        let (val_loss, val_accuracy) = if val_x.is_empty() { (train_loss, 0.0) } else { evaluate(&net, &val_x, steps, pool) };
        log.epochs.push(EpochRecord { epoch, train_loss, val_loss, val_accuracy });

        let improved = match &best {
            None => true,
            Some((acc, loss, _)) => val_accuracy > *acc || (val_accuracy == *acc && val_loss < *loss),
        };
        if improved {
            best = Some((val_accuracy, val_loss, net.clone()));
            log.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
    }
    let (_, _, best_net) = best.expect("at least one epoch runs");
    Ok((best_net.cast::<f64>(), log))
}
