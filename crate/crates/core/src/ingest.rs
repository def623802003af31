//! Recording files, validation, and chronological train/val/test splits.
//!
//! A recording file is UTF-8 JSON lines. Line 1 is a header,
//! `{"user": "...", "session": "...", "start": <epoch s>, "fps": <nominal>}`,
//! and every following line is a frame,
//! `{"t": s, "head": {"p": [x,y,z], "q": [w,x,y,z]}, "left": {...}, "right": {...}}`.
//! Reals are written with at most 9 significant digits.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Error, Result};
use crate::motion::{Pose, PoseFrame, Recording, UnitQuat, Vec3};

/// Maximum `|‖q‖ - 1|` accepted in a file before the quaternion is rejected.
pub const INGEST_QUAT_TOLERANCE: f64 = 1e-3;

/// File extension used for recordings.
pub const RECORDING_EXT: &str = "jsonl";

pub fn parse_recording<I, S>(lines: I) -> Result<Recording>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut header: Option<(String, String, i64, f64)> = None;
    let mut frames = Vec::new();
    let mut last_t: Option<f64> = None;
    for (idx, line) in lines.into_iter().enumerate() {
        let lineno = idx + 1;
        let line = line.as_ref().trim();
        if line.is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line)
            .map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
        if header.is_none() {
            header = Some(parse_header(&value, lineno)?);
            continue;
        }
        let frame = parse_frame(&value, lineno)?;
        if let Some(prev) = last_t {
            if frame.t <= prev {
                return Err(Error::Ordering { line: lineno, prev, t: frame.t });
            }
        }
        last_t = Some(frame.t);
        frames.push(frame);
    }
    let (user, session, start, fps) =
        header.ok_or_else(|| Error::Parse { line: 1, msg: "missing header".into() })?;
    Recording::new(user, session, start, fps, frames)
}

fn parse_header(v: &Value, line: usize) -> Result<(String, String, i64, f64)> {
    let perr = |msg: &str| Error::Parse { line, msg: msg.to_string() };
    let user = v.get("user").and_then(Value::as_str).ok_or_else(|| perr("header needs string \"user\""))?;
    let session = v
        .get("session")
        .and_then(Value::as_str)
        .ok_or_else(|| perr("header needs string \"session\""))?;
    let start = v.get("start").and_then(Value::as_i64).ok_or_else(|| perr("header needs integer \"start\""))?;
    let fps = v.get("fps").and_then(Value::as_f64).ok_or_else(|| perr("header needs number \"fps\""))?;
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::Validation { line, msg: format!("nominal fps {fps} must be positive") });
    }
    Ok((user.to_string(), session.to_string(), start, fps))
}

fn parse_frame(v: &Value, line: usize) -> Result<PoseFrame> {
    let perr = |msg: String| Error::Parse { line, msg };
    let t = v.get("t").and_then(Value::as_f64).ok_or_else(|| perr("frame needs number \"t\"".into()))?;
    let mut poses = [Pose::default(); 3];
    for (pose, key) in poses.iter_mut().zip(["head", "left", "right"]) {
        let obj = v.get(key).ok_or_else(|| perr(format!("frame needs \"{key}\"")))?;
        let p: [f64; 3] = reals(obj.get("p"), line, key)?;
        let q: [f64; 4] = reals(obj.get("q"), line, key)?;
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(n.is_finite() && (n - 1.0).abs() <= INGEST_QUAT_TOLERANCE) {
            return Err(Error::Validation { line, msg: format!("{key} quaternion norm {n} is not unit") });
        }
        *pose = Pose::new(Vec3::from_array(p), UnitQuat::from_components(q)?);
    }
    Ok(PoseFrame { t, head: poses[0], left: poses[1], right: poses[2] })
}

fn reals<const N: usize>(v: Option<&Value>, line: usize, key: &str) -> Result<[f64; N]> {
    let perr = || Error::Parse { line, msg: format!("\"{key}\" needs arrays of {N} numbers") };
    let arr = v.and_then(Value::as_array).ok_or_else(perr)?;
    if arr.len() != N {
        return Err(perr());
    }
    let mut out = [0.0; N];
    for (o, x) in out.iter_mut().zip(arr) {
        *o = x.as_f64().ok_or_else(perr)?;
    }
    Ok(out)
}

/// Rounds to 9 significant digits and prints the shortest decimal that
/// parses back to the rounded value.
pub fn format_real(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    format!("{rounded}")
}

pub fn serialize_recording(rec: &Recording) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{{\"user\":{},\"session\":{},\"start\":{},\"fps\":{}}}",
        Value::from(rec.user_id.as_str()),
        Value::from(rec.session_id.as_str()),
        rec.start_time,
        format_real(rec.nominal_fps)
    );
    for f in rec.frames() {
        let _ = write!(out, "{{\"t\":{}", format_real(f.t));
        for (key, pose) in ["head", "left", "right"].iter().zip(f.poses()) {
            let p = pose.position.to_array().map(format_real);
            let q = pose.orientation.to_array().map(format_real);
            let _ = write!(out, ",\"{key}\":{{\"p\":[{}],\"q\":[{}]}}", p.join(","), q.join(","));
        }
        out.push_str("}\n");
    }
    out
}

pub fn read_recording(path: &Path) -> Result<Recording> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let lines = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))?;
    parse_recording(lines).map_err(|e| Error::Format { path: path.to_path_buf(), msg: e.to_string() })
}

pub fn write_recording(path: &Path, rec: &Recording) -> Result<()> {
    fs::write(path, serialize_recording(rec)).map_err(|e| Error::io(path, e))
}

/// Reads every `*.jsonl` file in `dir`, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<(PathBuf, Recording)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == RECORDING_EXT))
        .collect();
    paths.sort();
    paths.into_iter().map(|p| read_recording(&p).map(|r| (p, r))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

impl SplitConfig {
    /// The full-scale split: 400 train, 50 validation, 50 test per user.
    pub const FULL_SCALE: SplitConfig = SplitConfig { n_train: 400, n_val: 50, n_test: 50 };

    pub fn new(n_train: usize, n_val: usize, n_test: usize) -> Result<Self> {
        if n_train == 0 || n_val == 0 || n_test == 0 {
            return Err(Error::Parameter("split sizes must all be positive".into()));
        }
        Ok(Self { n_train, n_val, n_test })
    }

    pub fn min_recordings(&self) -> usize {
        self.n_train + self.n_val + self.n_test
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        Split::ALL.into_iter().find(|x| x.as_str() == s)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UserSplit {
    pub train: Vec<Recording>,
    pub val: Vec<Recording>,
    pub test: Vec<Recording>,
}

impl UserSplit {
    pub fn get(&self, split: Split) -> &[Recording] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    fn get_mut(&mut self, split: Split) -> &mut Vec<Recording> {
        match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }
}

/// Users keyed by id; a user's label is its index in key order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub users: BTreeMap<String, UserSplit>,
    /// Users rejected for having too few recordings.
    pub dropped_users: usize,
}

impl Dataset {
    pub fn user_ids(&self) -> Vec<String> {
        self.users.keys().cloned().collect()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// `(label, recording)` pairs of one split, users in label order.
    pub fn split(&self, split: Split) -> impl Iterator<Item = (usize, &Recording)> {
        self.users
            .values()
            .enumerate()
            .flat_map(move |(label, u)| u.get(split).iter().map(move |r| (label, r)))
    }
}

fn chronological(a: &Recording, b: &Recording) -> std::cmp::Ordering {
    a.start_time.cmp(&b.start_time).then_with(|| a.session_id.cmp(&b.session_id))
}

/// Groups by user, sorts chronologically (ties by session id) and assigns
/// the earliest recordings to train, then val, then test. Users with fewer
/// than `cfg.min_recordings()` recordings are dropped; surplus late
/// recordings are ignored.
pub fn build_dataset(recordings: Vec<Recording>, cfg: SplitConfig) -> Result<Dataset> {
    let mut by_user: BTreeMap<String, Vec<Recording>> = BTreeMap::new();
    for r in recordings {
        by_user.entry(r.user_id.clone()).or_default().push(r);
    }
    let mut ds = Dataset::default();
    for (user, mut recs) in by_user {
        if recs.len() < cfg.min_recordings() {
            ds.dropped_users += 1;
            continue;
        }
        recs.sort_by(chronological);
        let mut it = recs.into_iter();
        let split = UserSplit {
            train: it.by_ref().take(cfg.n_train).collect(),
            val: it.by_ref().take(cfg.n_val).collect(),
            test: it.by_ref().take(cfg.n_test).collect(),
        };
        ds.users.insert(user, split);
    }
    if ds.users.is_empty() {
        return Err(Error::EmptyDataset { dropped: ds.dropped_users });
    }
    Ok(ds)
}

const MANIFEST_MAGIC: &str = "# reid-lab dataset manifest v1";

/// Tab-separated manifest listing split membership:
/// `split user session start path`, one recording per line.
pub fn write_manifest(
    path: &Path,
    ds: &Dataset,
    sources: &HashMap<(String, String), PathBuf>,
) -> Result<()> {
    let mut out = format!("{MANIFEST_MAGIC}\nsplit\tuser\tsession\tstart\tpath\n");
    for split in Split::ALL {
        for (_, r) in ds.split(split) {
            let key = (r.user_id.clone(), r.session_id.clone());
            let src = sources.get(&key).ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                msg: format!("no source file for {}/{}", r.user_id, r.session_id),
            })?;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                split.as_str(),
                r.user_id,
                r.session_id,
                r.start_time,
                src.display()
            );
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads a manifest and every recording it references.
pub fn read_manifest(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::Format { path: path.to_path_buf(), msg };
    let mut lines = text.lines();
    if lines.next() != Some(MANIFEST_MAGIC) {
        return Err(bad("missing manifest header".into()));
    }
    lines.next();
    let base = path.parent().unwrap_or(Path::new("."));
    let mut ds = Dataset::default();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(bad(format!("line {}: expected 5 columns", i + 3)));
        }
        let split = Split::parse(cols[0]).ok_or_else(|| bad(format!("line {}: bad split", i + 3)))?;
        let file = base.join(cols[4]);
        let rec = read_recording(&file)?;
        if rec.user_id != cols[1] || rec.session_id != cols[2] {
            return Err(bad(format!("line {}: {} does not match its entry", i + 3, file.display())));
        }
        ds.users.entry(rec.user_id.clone()).or_default().get_mut(split).push(rec);
    }
    if ds.users.is_empty() {
        return Err(Error::EmptyDataset { dropped: 0 });
    }
    Ok(ds)
}
