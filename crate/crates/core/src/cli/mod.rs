//! The `reid-lab` command line.
//!
//! Exit codes: 0 success, 1 usage or parameter error, 2 data error,
//! 3 numeric failure. No command modifies its inputs.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::degrade::{recording_seed, Degradation, DimPreset, BASE_FPS};
use crate::error::{Error, Result};
use crate::eval::{self, prepare_condition, run_sweep, sweep_csv, PER_USER_DEFINITION};
use crate::features::{apply_mask, featurize, resample, FeatureConfig};
use crate::ingest::{self, build_dataset, read_manifest, write_manifest, Dataset, Split, SplitConfig};
use crate::model::{checkpoint, train, Precision, TrainConfig};
use crate::synthgen;

mod config;

pub use config::{DataSource, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Format versions written into run manifests.
const ARTIFACT_VERSIONS: &str = "recording=1 manifest=1 feature_cache=1 checkpoint=1 sweep_csv=1";

#[derive(Debug, Parser)]
#[command(name = "reid-lab", version, about = "Motion re-identification lab")]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "REID_LAB_JOBS", default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic recordings.
    Synthgen {
        #[arg(long)]
        users: usize,
        #[arg(long)]
        sessions: usize,
        /// Seconds per session.
        #[arg(long)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a directory of recordings chronologically and write a manifest.
    Ingest {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = SplitConfig::FULL_SCALE.n_train)]
        train: usize,
        #[arg(long, default_value_t = SplitConfig::FULL_SCALE.n_val)]
        val: usize,
        #[arg(long, default_value_t = SplitConfig::FULL_SCALE.n_test)]
        test: usize,
        /// Manifest file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write feature-window caches for every recording of a manifest.
    Featurize {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        #[arg(long, default_value_t = 30.0)]
        window_seconds: f64,
        /// Dimension preset applied after the body-relative transform.
        #[arg(long, default_value = "all")]
        dims: DimPreset,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write degraded copies of every recording of a manifest.
    Degrade {
        #[arg(long)]
        manifest: PathBuf,
        /// `kind:param`, e.g. `gaussian_noise:0.5` or `reduced_fps:5`.
        #[arg(long)]
        condition: Degradation,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on the train and validation splits of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on one split of a manifest.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrain and evaluate under every condition of a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long, default_value = "none")]
    pub condition: Degradation,
    /// Seed for noise draws; when training also for initialization and shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 30.0)]
    pub window_seconds: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 2)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    pub learning_rate: f64,
    #[arg(long, value_delimiter = ',', default_value = "32,16")]
    pub hidden_sizes: Vec<usize>,
    /// Epochs without improvement before stopping; 0 disables.
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long, default_value = "wide")]
    pub precision: Precision,
}

impl TrainArgs {
    fn config(&self, seed: u64, jobs: usize) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed,
            hidden_sizes: self.hidden_sizes.clone(),
            patience: (self.patience > 0).then_some(self.patience),
            precision: self.precision,
            clip_norm: self.clip_norm,
            jobs,
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) | Error::Config { .. } => EXIT_USAGE,
        Error::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if cli.jobs == 0 {
        return Err(Error::Parameter("--jobs must be positive".into()));
    }
    match &cli.command {
        Command::Synthgen { users, sessions, duration, seed, fps, out } => {
            cmd_synthgen(*users, *sessions, *duration, *fps, *seed, out)
        }
        Command::Ingest { dir, train, val, test, out } => cmd_ingest(dir, SplitConfig::new(*train, *val, *test)?, out),
        Command::Featurize { manifest, fps, window_seconds, dims, out } => {
            cmd_featurize(manifest, FeatureConfig { fps: *fps, window_seconds: *window_seconds }, *dims, out)
        }
        Command::Degrade { manifest, condition, seed, out } => cmd_degrade(manifest, condition, *seed, out),
        Command::Train { manifest, pipeline, train, out } => {
            cmd_train(manifest, pipeline, &train.config(pipeline.seed, cli.jobs), out)
        }
        Command::Evaluate { checkpoint, manifest, split, pipeline, out } => {
            let split = Split::parse(split).ok_or_else(|| Error::Parameter(format!("unknown split {split:?}")))?;
            cmd_evaluate(checkpoint, manifest, split, pipeline, cli.jobs, out)
        }
        Command::Sweep { config, out } => {
            let mut cfg = RunConfig::load(config)?;
            if let Some(out) = out {
                cfg.out = out.clone();
            }
            cfg.train.jobs = cli.jobs;
            cmd_sweep(&cfg, &fs::read_to_string(config).map_err(|e| Error::io(config, e))?)
        }
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn file_stem(user: &str, session: &str) -> String {
    format!("{user}_{session}")
}

pub fn cmd_synthgen(users: usize, sessions: usize, duration: f64, fps: f64, seed: u64, out: &Path) -> Result<()> {
    if users == 0 || sessions == 0 {
        return Err(Error::Parameter("users and sessions must be positive".into()));
    }
    let recs = synthgen::generate_dataset(users, sessions, duration, fps, seed)?;
    create_dir(out)?;
    for r in &recs {
        let name = format!("{}.{}", file_stem(&r.user_id, &r.session_id), ingest::RECORDING_EXT);
        ingest::write_recording(&out.join(name), r)?;
    }
    eprintln!("wrote {} recordings to {}", recs.len(), out.display());
    Ok(())
}

fn absolute(path: &Path) -> Result<PathBuf> {
    fs::canonicalize(path).map_err(|e| Error::io(path, e))
}

pub fn cmd_ingest(dir: &Path, split: SplitConfig, out: &Path) -> Result<()> {
    let loaded = ingest::load_dir(dir)?;
    let mut sources = HashMap::new();
    let mut recs = Vec::with_capacity(loaded.len());
    for (path, r) in loaded {
        let key = (r.user_id.clone(), r.session_id.clone());
        if let Some(prev) = sources.insert(key, absolute(&path)?) {
            return Err(Error::Format {
                path: path.clone(),
                msg: format!("duplicate user/session, also in {}", prev.display()),
            });
        }
        recs.push(r);
    }
    let ds = build_dataset(recs, split)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_manifest(out, &ds, &sources)?;
    eprintln!("{} users kept, {} dropped", ds.num_users(), ds.dropped_users);
    Ok(())
}

pub fn cmd_featurize(manifest: &Path, cfg: FeatureConfig, dims: DimPreset, out: &Path) -> Result<()> {
    let ds = read_manifest(manifest)?;
    let mask = dims.mask();
    create_dir(out)?;
    let mut index = String::from("split\tuser\tsession\twindows\tfile\n");
    for split in Split::ALL {
        for (label, r) in ds.split(split) {
            let windows = featurize(r, &cfg, label)?
                .iter()
                .map(|w| apply_mask(w, &mask))
                .collect::<Result<Vec<_>>>()?;
            let name = format!("{}.rlfw", file_stem(&r.user_id, &r.session_id));
            crate::features::cache::write(&out.join(&name), &windows)?;
            let _ = writeln!(index, "{}\t{}\t{}\t{}\t{name}", split.as_str(), r.user_id, r.session_id, windows.len());
        }
    }
    write(&out.join("index.tsv"), index)
}

pub fn cmd_degrade(manifest: &Path, condition: &Degradation, seed: u64, out: &Path) -> Result<()> {
    if let Degradation::ReducedDims(_) = condition {
        return Err(Error::Parameter("dimension presets act on features; use `featurize --dims`".into()));
    }
    let ds = read_manifest(manifest)?;
    create_dir(out)?;
    let mut sources = HashMap::new();
    for split in Split::ALL {
        for (_, r) in ds.split(split) {
            let base = resample(r, BASE_FPS as f64)?;
            let degraded = condition.apply_raw(&base, recording_seed(seed, &r.user_id, &r.session_id))?;
            let path = out.join(format!("{}.{}", file_stem(&r.user_id, &r.session_id), ingest::RECORDING_EXT));
            ingest::write_recording(&path, &degraded)?;
            sources.insert((r.user_id.clone(), r.session_id.clone()), PathBuf::from(path.file_name().unwrap()));
        }
    }
    write_manifest(&out.join("manifest.tsv"), &ds, &sources)?;
    write(&out.join("condition.txt"), format!("condition={condition}\nseed={seed}\n"))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn pipeline_text(p: &PipelineArgs) -> String {
    format!("condition={}\nnoise_seed={}\nwindow_seconds={}\n", p.condition, p.seed, p.window_seconds)
}

pub fn cmd_train(manifest: &Path, pipeline: &PipelineArgs, cfg: &TrainConfig, out: &Path) -> Result<()> {
    let ds = read_manifest(manifest)?;
    let [train_w, val_w, _] = prepare_condition(&ds, &pipeline.condition, pipeline.seed, pipeline.window_seconds)?;
    let (model, log) = train(&train_w, &val_w, ds.user_ids(), cfg)?;
    create_dir(out)?;
    checkpoint::save(&out.join("model.rlck"), &model)?;
    write(&out.join("train_log.csv"), log.to_csv())?;
    let manifest_text = format!(
        "command=train\nversion={}\nartifacts={ARTIFACT_VERSIONS}\nmanifest={}\n{}seed={}\nepochs={}\nbatch_size={}\n\
         learning_rate={:e}\nhidden_sizes={:?}\npatience={:?}\nclip_norm={:?}\nprecision={}\nbest_epoch={}\nflagged_channels={:?}\n",
        env!("CARGO_PKG_VERSION"),
        manifest.display(),
        pipeline_text(pipeline),
        cfg.seed,
        cfg.epochs,
        cfg.batch_size,
        cfg.learning_rate,
        cfg.hidden_sizes,
        cfg.patience,
        cfg.clip_norm,
        cfg.precision.as_str(),
        log.best_epoch,
        log.flagged_channels,
    );
    write(&out.join("run_manifest.txt"), manifest_text)?;
    eprintln!("best epoch {} of {}", log.best_epoch, log.epochs.len());
    Ok(())
}

fn pool(jobs: usize) -> Result<Option<rayon::ThreadPool>> {
    if jobs <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map(Some)
        .map_err(|e| Error::Parameter(e.to_string()))
}

fn sessions_csv(report: &eval::EvalReport, user_ids: &[String]) -> String {
    let mut s = String::from("user,session,windows,predicted,correct\n");
    for p in &report.sessions {
        let name = |k: usize| user_ids.get(k).map_or("?", |s| s.as_str());
        let _ = writeln!(s, "{},{},{},{},{}", name(p.truth), p.session_id, p.windows, name(p.predicted), p.correct() as u8);
    }
    s
}

pub fn cmd_evaluate(
    checkpoint_path: &Path,
    manifest: &Path,
    split: Split,
    pipeline: &PipelineArgs,
    jobs: usize,
    out: &Path,
) -> Result<()> {
    let model = checkpoint::load(checkpoint_path)?;
    let ds = read_manifest(manifest)?;
    if ds.user_ids() != model.user_ids {
        return Err(Error::Shape("manifest users differ from the checkpoint's users".into()));
    }
    let [tr, va, te] = prepare_condition(&ds, &pipeline.condition, pipeline.seed, pipeline.window_seconds)?;
    let windows = match split {
        Split::Train => tr,
        Split::Val => va,
        Split::Test => te,
    };
    let report = eval::evaluate(&model, &windows, pool(jobs)?.as_ref())?;
    create_dir(out)?;
    let summary = format!("split={}\n{}{}", split.as_str(), pipeline_text(pipeline), report.summary());
    print!("{summary}");
    write(&out.join("metrics.txt"), summary)?;
    write(&out.join("sessions.csv"), sessions_csv(&report, &model.user_ids))
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.data {
        DataSource::Manifest(p) => read_manifest(p),
        DataSource::Recordings(dir) => {
            build_dataset(ingest::load_dir(dir)?.into_iter().map(|(_, r)| r).collect(), cfg.split)
        }
    }
}

fn condition_dir(index: usize, c: &Degradation) -> String {
    let param = c.parameter();
    if param.is_empty() {
        format!("{index:02}_{}", c.kind())
    } else {
        format!("{index:02}_{}_{param}", c.kind())
    }
}

/// Runs a sweep and writes `sweep.csv`, one directory per condition
/// (training log, checkpoint, metrics) and `run_manifest.txt`.
pub fn cmd_sweep(cfg: &RunConfig, config_text: &str) -> Result<()> {
    let ds = load_dataset(cfg)?;
    let outcomes = run_sweep(&ds, &cfg.conditions, &cfg.train, cfg.window_seconds)?;
    create_dir(&cfg.out)?;
    let results: Vec<_> = outcomes.iter().map(|o| o.result.clone()).collect();
    write(&cfg.out.join("sweep.csv"), sweep_csv(&results))?;
    for (i, o) in outcomes.iter().enumerate() {
        let dir = cfg.out.join("conditions").join(condition_dir(i, &o.result.condition));
        create_dir(&dir)?;
        write(&dir.join("train_log.csv"), o.log.to_csv())?;
        checkpoint::save(&dir.join("model.rlck"), &o.model)?;
        write(&dir.join("metrics.txt"), format!("condition={}\n{}", o.result.condition, o.report.summary()))?;
        write(&dir.join("sessions.csv"), sessions_csv(&o.report, &o.model.user_ids))?;
    }
    let canonical = cfg.canonical();
    let manifest = format!(
        "command=sweep\nversion={}\nartifacts={ARTIFACT_VERSIONS}\nconfig_sha256={}\nconfig_file_sha256={}\nseed={}\n\
         per_user_definition={PER_USER_DEFINITION}\nusers={}\nrows={}\n[config]\n{canonical}",
        env!("CARGO_PKG_VERSION"),
        hex(&Sha256::digest(canonical.as_bytes())),
        hex(&Sha256::digest(config_text.as_bytes())),
        cfg.seed,
        ds.num_users(),
        results.len(),
    );
    write(&cfg.out.join("run_manifest.txt"), manifest)?;
    eprintln!("{} conditions written to {}", results.len(), cfg.out.display());
    Ok(())
}
