//! Sweep run configuration: one `key = value` per line, `#` comments.
//!
//! ```text
//! recordings = data/         # or: manifest = data/manifest.tsv
//! split = 8, 2, 2
//! out = runs/sweep
//! seed = 7
//! epochs = 30
//! hidden_sizes = 32, 16
//! gaussian_noise = 0.1, 0.2  # grid keys may repeat; values accumulate
//! gaussian_noise = 0.5
//! reduced_dims = hands_only
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use crate::degrade::Degradation;
use crate::error::{Error, Result};
use crate::ingest::SplitConfig;
use crate::model::{Precision, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// Directory of recording files, split with the configured sizes.
    Recordings(PathBuf),
    /// Manifest that already fixes the split.
    Manifest(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub split: SplitConfig,
    pub train: TrainConfig,
    pub conditions: Vec<Degradation>,
    pub window_seconds: f64,
    pub out: PathBuf,
    pub seed: u64,
}

const GRID_KEYS: [&str; 5] = ["none", "gaussian_noise", "reduced_fps", "reduced_precision", "reduced_dims"];

fn list<T: std::str::FromStr>(value: &str) -> Option<Vec<T>> {
    value.split(',').map(|v| v.trim().parse().ok()).collect()
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut data = None;
        let mut split = SplitConfig::new(8, 2, 2)?;
        let mut train = TrainConfig::default();
        let mut conditions = Vec::new();
        let mut window_seconds = 30.0;
        let mut out = None;
        let mut seed = 0;

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config { line: line_no, msg };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || err(format!("invalid value {value:?} for {key}"));
            if GRID_KEYS.contains(&key) {
                if key == "none" {
                    conditions.push(Degradation::None);
                    continue;
                }
                if value.is_empty() {
                    return Err(err(format!("grid {key} has no values")));
                }
                for v in value.split(',') {
                    let d = Degradation::parse(key, v.trim()).map_err(|e| err(e.to_string()))?;
                    conditions.push(d);
                }
                continue;
            }
            match key {
                "recordings" | "manifest" => {
                    if data.is_some() {
                        return Err(err("only one of recordings / manifest may be given".into()));
                    }
                    let p = base.join(value);
                    if !p.exists() {
                        return Err(err(format!("{} does not exist", p.display())));
                    }
                    data = Some(if key == "recordings" { DataSource::Recordings(p) } else { DataSource::Manifest(p) });
                }
                "split" => {
                    let v: Vec<usize> = list(value).filter(|v: &Vec<usize>| v.len() == 3).ok_or_else(bad)?;
                    split = SplitConfig::new(v[0], v[1], v[2]).map_err(|e| err(e.to_string()))?;
                }
                "out" => out = Some(base.join(value)),
                "seed" => seed = value.parse().map_err(|_| bad())?,
                "epochs" => train.epochs = value.parse().map_err(|_| bad())?,
                "batch_size" => train.batch_size = value.parse().map_err(|_| bad())?,
                "learning_rate" => train.learning_rate = value.parse().map_err(|_| bad())?,
                "hidden_sizes" => train.hidden_sizes = list(value).ok_or_else(bad)?,
                "patience" => {
                    train.patience = match value {
                        "none" => None,
                        v => Some(v.parse().map_err(|_| bad())?),
                    }
                }
                "clip_norm" => {
                    train.clip_norm = match value {
                        "none" => None,
                        v => Some(v.parse().map_err(|_| bad())?),
                    }
                }
                "precision" => train.precision = value.parse::<Precision>().map_err(|_| bad())?,
                "window_seconds" => window_seconds = value.parse().map_err(|_| bad())?,
                _ => return Err(err(format!("unknown key {key:?}"))),
            }
        }
        let data = data.ok_or_else(|| Error::Config { line: 0, msg: "missing recordings or manifest".into() })?;
        let out = out.ok_or_else(|| Error::Config { line: 0, msg: "missing out".into() })?;
        train.seed = seed;
        train.validate()?;
        Ok(Self { data, split, train, conditions, window_seconds, out, seed })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Canonical text of every setting that affects results.
    pub fn canonical(&self) -> String {
        let (kind, path) = match &self.data {
            DataSource::Recordings(p) => ("recordings", p),
            DataSource::Manifest(p) => ("manifest", p),
        };
        let t = &self.train;
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = format!(
            "{kind}={}\nsplit={},{},{}\nseed={}\nepochs={}\nbatch_size={}\nlearning_rate={:e}\nhidden_sizes={}\n\
             patience={}\nclip_norm={}\nprecision={}\nwindow_seconds={}\n",
            path.display(),
            self.split.n_train,
            self.split.n_val,
            self.split.n_test,
            self.seed,
            t.epochs,
            t.batch_size,
            t.learning_rate,
            list(&t.hidden_sizes),
            t.patience.map_or("none".into(), |p| p.to_string()),
            t.clip_norm.map_or("none".into(), |c| format!("{c:e}")),
            t.precision.as_str(),
            self.window_seconds,
        );
        for c in &self.conditions {
            s.push_str(&format!("condition={c}\n"));
        }
        s
    }
}
