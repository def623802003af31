//! Signal degradation operators and their experiment grids.
//!
//! Noise, frame-rate reduction and rounding act on raw telemetry sampled at
//! the base rate; dimension reduction acts on body-relative feature
//! channels.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::features::{ChannelMask, BODY_CHANNELS, LEFT_POS, LEFT_ROT, RIGHT_POS, RIGHT_ROT};
use crate::motion::{PoseFrame, Recording, UnitQuat};

/// Frame rate the subsampling operator expects its input at.
pub const BASE_FPS: u32 = 30;

/// Noise levels swept by default, in meters.
pub const NOISE_GRID: [f64; 8] = [0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 3.0, 5.0];
pub const FPS_GRID: [u32; 5] = [15, 10, 5, 3, 1];
pub const PRECISION_GRID: [f64; 5] = [0.0001, 0.001, 0.01, 0.1, 1.0];

const NOISE_RETRIES: usize = 64;
const MIN_NOISY_QUAT_NORM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DimPreset {
    All,
    HandsOnly,
    HandRotationsOnly,
    LeftRotationOnly,
    LeftRotationWOnly,
}

impl DimPreset {
    /// Presets in nesting order; each selects a strict subset of the one before.
    pub const ALL: [DimPreset; 5] = [
        DimPreset::All,
        DimPreset::HandsOnly,
        DimPreset::HandRotationsOnly,
        DimPreset::LeftRotationOnly,
        DimPreset::LeftRotationWOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DimPreset::All => "all",
            DimPreset::HandsOnly => "hands_only",
            DimPreset::HandRotationsOnly => "hand_rotations_only",
            DimPreset::LeftRotationOnly => "left_rotation_only",
            DimPreset::LeftRotationWOnly => "left_rotation_w_only",
        }
    }

    pub fn mask(self) -> ChannelMask {
        let ranges = match self {
            DimPreset::All => vec![0..BODY_CHANNELS],
            DimPreset::HandsOnly => vec![LEFT_POS, LEFT_ROT, RIGHT_POS, RIGHT_ROT],
            DimPreset::HandRotationsOnly => vec![LEFT_ROT, RIGHT_ROT],
            DimPreset::LeftRotationOnly => vec![LEFT_ROT],
            DimPreset::LeftRotationWOnly => vec![LEFT_ROT.start..LEFT_ROT.start + 1],
        };
        ChannelMask::from_ranges(&ranges).expect("presets select at least one channel")
    }
}

impl FromStr for DimPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DimPreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown dimension preset {s:?}")))
    }
}

pub fn preset_mask(name: &str) -> Result<ChannelMask> {
    Ok(name.parse::<DimPreset>()?.mask())
}

/// One degradation condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Degradation {
    None,
    /// Standard deviation in meters.
    GaussianNoise { sigma: f64 },
    ReducedFps { fps: u32 },
    /// Rounding step in meters.
    ReducedPrecision { step: f64 },
    ReducedDims(DimPreset),
}

impl Degradation {
    pub fn kind(&self) -> &'static str {
        match self {
            Degradation::None => "none",
            Degradation::GaussianNoise { .. } => "gaussian_noise",
            Degradation::ReducedFps { .. } => "reduced_fps",
            Degradation::ReducedPrecision { .. } => "reduced_precision",
            Degradation::ReducedDims(_) => "reduced_dims",
        }
    }

    /// Parameter as written in configs and result tables; empty for `none`.
    pub fn parameter(&self) -> String {
        match self {
            Degradation::None => String::new(),
            Degradation::GaussianNoise { sigma } => format!("{sigma}"),
            Degradation::ReducedFps { fps } => format!("{fps}"),
            Degradation::ReducedPrecision { step } => format!("{step}"),
            Degradation::ReducedDims(p) => p.name().to_string(),
        }
    }

    /// Builds a condition from a kind name and its parameter text.
    pub fn parse(kind: &str, param: &str) -> Result<Self> {
        let num = || -> Result<f64> {
            param
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Parameter(format!("{kind}: bad parameter {param:?}")))
        };
        let d = match kind {
            "none" => Degradation::None,
            "gaussian_noise" => Degradation::GaussianNoise { sigma: num()? },
            "reduced_fps" => {
                let f = num()?;
                if f.fract() != 0.0 || f < 1.0 {
                    return Err(Error::Parameter(format!("reduced_fps: {param} is not a positive integer")));
                }
                Degradation::ReducedFps { fps: f as u32 }
            }
            "reduced_precision" => Degradation::ReducedPrecision { step: num()? },
            "reduced_dims" => Degradation::ReducedDims(param.trim().parse()?),
            other => return Err(Error::Parameter(format!("unknown degradation kind {other:?}"))),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Degradation::GaussianNoise { sigma } if !(sigma.is_finite() && sigma >= 0.0) => {
                Err(Error::Parameter(format!("noise sigma must be >= 0, got {sigma}")))
            }
            Degradation::ReducedFps { fps } if fps == 0 || fps > BASE_FPS || BASE_FPS % fps != 0 => Err(
                Error::Parameter(format!("target fps {fps} must divide {BASE_FPS}")),
            ),
            Degradation::ReducedPrecision { step } if !(step.is_finite() && step > 0.0) => {
                Err(Error::Parameter(format!("rounding step must be > 0, got {step}")))
            }
            _ => Ok(()),
        }
    }

    /// True when the condition leaves its input unchanged.
    pub fn is_neutral(&self) -> bool {
        match *self {
            Degradation::None => true,
            Degradation::GaussianNoise { sigma } => sigma == 0.0,
            Degradation::ReducedFps { fps } => fps == BASE_FPS,
            Degradation::ReducedDims(p) => p == DimPreset::All,
            Degradation::ReducedPrecision { .. } => false,
        }
    }

    /// Frame rate of the telemetry after the condition is applied.
    pub fn output_fps(&self) -> f64 {
        match *self {
            Degradation::ReducedFps { fps } => fps as f64,
            _ => BASE_FPS as f64,
        }
    }

    pub fn mask(&self) -> ChannelMask {
        match *self {
            Degradation::ReducedDims(p) => p.mask(),
            _ => ChannelMask::ALL,
        }
    }

    /// Applies the raw-telemetry part of the condition to a recording
    /// sampled at [`BASE_FPS`]. `seed` drives the noise draw only.
    pub fn apply_raw(&self, rec: &Recording, seed: u64) -> Result<Recording> {
        match *self {
            Degradation::None | Degradation::ReducedDims(_) => Ok(rec.clone()),
            Degradation::GaussianNoise { sigma } => add_noise(rec, sigma, seed),
            Degradation::ReducedFps { fps } => subsample_fps(rec, fps),
            Degradation::ReducedPrecision { step } => Ok(quantize(rec, step).0),
        }
    }
}

impl fmt::Display for Degradation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degradation::None => f.write_str("none"),
            d => write!(f, "{}:{}", d.kind(), d.parameter()),
        }
    }
}

/// Parses `kind:param` (or just `none`).
impl FromStr for Degradation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, param) = s.split_once(':').unwrap_or((s, ""));
        Degradation::parse(kind.trim(), param)
    }
}

/// Per-recording seed: 64-bit FNV-1a over the global seed (8 bytes LE),
/// the user id, a `0xff` separator, and the session id.
pub fn recording_seed(global: u64, user_id: &str, session_id: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let bytes = global
        .to_le_bytes()
        .into_iter()
        .chain(user_id.bytes())
        .chain([0xff])
        .chain(session_id.bytes());
    bytes.fold(OFFSET, |h, b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// Adds independent zero-mean Gaussian noise to all 21 raw scalars of every
/// frame and renormalizes the quaternions.
pub fn add_noise(rec: &Recording, sigma: f64, seed: u64) -> Result<Recording> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Parameter(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(rec.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = rec.frames().to_vec();
    for f in &mut frames {
        let t = f.t;
        for pose in f.poses_mut() {
            let p = &mut pose.position;
            p.x += normal.sample(&mut rng);
            p.y += normal.sample(&mut rng);
            p.z += normal.sample(&mut rng);
            let q = pose.orientation.to_array();
            let mut attempt = 0;
            pose.orientation = loop {
                let noisy = q.map(|c| c + normal.sample(&mut rng));
                let n = noisy.iter().map(|c| c * c).sum::<f64>().sqrt();
                if n >= MIN_NOISY_QUAT_NORM {
                    break UnitQuat::normalize(noisy[0], noisy[1], noisy[2], noisy[3])?;
                }
                attempt += 1;
                if attempt >= NOISE_RETRIES {
                    return Err(Error::Numeric(format!(
                        "noisy quaternion collapsed {NOISE_RETRIES} times at t={t}"
                    )));
                }
            };
        }
    }
    Recording::new(rec.user_id.clone(), rec.session_id.clone(), rec.start_time, rec.nominal_fps, frames)
}

/// Keeps every `(30 / target)`-th frame, counted from `t = 0`.
pub fn subsample_fps(rec: &Recording, target: u32) -> Result<Recording> {
    Degradation::ReducedFps { fps: target }.validate()?;
    let stride = (BASE_FPS / target) as i64;
    let mut kept: Vec<PoseFrame> = Vec::with_capacity(rec.len() / stride as usize + 1);
    for f in rec.frames() {
        let k = f.t * BASE_FPS as f64;
        let idx = k.round();
        if (k - idx).abs() > 1e-6 {
            return Err(Error::Parameter(format!(
                "frame at t={} is not on the {BASE_FPS} fps grid",
                f.t
            )));
        }
        if (idx as i64) % stride == 0 {
            kept.push(*f);
        }
    }
    if kept.len() < 2 {
        return Err(Error::Length { needed: 2, got: kept.len() });
    }
    Ok(rec.with_frames(kept, target as f64))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QuantizeReport {
    /// Quaternions that rounded to all zeros and were replaced by identity.
    pub collapsed_quaternions: usize,
}

fn round_to(x: f64, step: f64) -> f64 {
    let inv = 1.0 / step;
    let inv_int = inv.round();
    // Decimal steps divide by an exact integer so that values already on
    // the grid come back bit-identical.
    if inv_int >= 1.0 && (inv - inv_int).abs() < 1e-9 * inv_int {
        (x * inv_int).round() / inv_int
    } else {
        (x / step).round() * step
    }
}

const QUAT_LATTICE_ITERS: usize = 8;

/// Rounds a quaternion onto the `step` lattice and renormalizes, repeating
/// until the rounded lattice point is stable under renormalization. The
/// fixed point makes quantization idempotent. `None` if it rounds to zero.
fn quantize_quat(q: UnitQuat, step: f64) -> Option<UnitQuat> {
    let mut lattice = q.to_array().map(|c| round_to(c, step));
    let mut unit = UnitQuat::from_components(lattice).ok()?;
    for _ in 0..QUAT_LATTICE_ITERS {
        let again = unit.to_array().map(|c| round_to(c, step));
        if again == lattice {
            break;
        }
        lattice = again;
        unit = UnitQuat::from_components(lattice).ok()?;
    }
    Some(unit)
}

/// Rounds every raw scalar to the nearest multiple of `step`, half away
/// from zero. Quaternions off unit norm by more than 1e-9 afterwards are
/// renormalized.
pub fn quantize(rec: &Recording, step: f64) -> (Recording, QuantizeReport) {
    let mut report = QuantizeReport::default();
    let mut frames = rec.frames().to_vec();
    for f in &mut frames {
        for pose in f.poses_mut() {
            let p = &mut pose.position;
            p.x = round_to(p.x, step);
            p.y = round_to(p.y, step);
            p.z = round_to(p.z, step);
            match quantize_quat(pose.orientation, step) {
                Some(q) => pose.orientation = q,
                None => {
                    report.collapsed_quaternions += 1;
                    pose.orientation = UnitQuat::IDENTITY;
                }
            }
        }
    }
    (rec.with_frames(frames, rec.nominal_fps), report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{Pose, Vec3};

    fn rec(n: usize) -> Recording {
        let frames = (0..n)
            .map(|i| {
                let t = i as f64 / 30.0;
                let q = UnitQuat::from_axis_angle(Vec3::new(0.2, 1.0, 0.1), 0.01 * i as f64).unwrap();
                let p = Pose::new(Vec3::new(0.123, 1.5 + 0.001 * i as f64, -0.25), q);
                PoseFrame { t, head: p, left: p, right: p }
            })
            .collect();
        Recording::new("u", "s", 0, 30.0, frames).unwrap()
    }

    #[test]
    fn presets_nest_and_have_expected_widths() {
        let counts: Vec<usize> = DimPreset::ALL.iter().map(|p| p.mask().count()).collect();
        assert_eq!(counts, vec![18, 14, 8, 4, 1]);
        for w in DimPreset::ALL.windows(2) {
            assert!(w[1].mask().is_subset_of(&w[0].mask()));
            assert_ne!(w[1].mask(), w[0].mask());
        }
        let hands = preset_mask("hands_only").unwrap().selected();
        assert_eq!(hands, (4..18).collect::<Vec<_>>());
        assert_eq!(preset_mask("left_rotation_w_only").unwrap().selected(), vec![LEFT_ROT.start]);
        assert!(preset_mask("feet").is_err());
    }

    #[test]
    fn neutral_parameters_are_identity() {
        let r = rec(60);
        assert_eq!(add_noise(&r, 0.0, 9).unwrap(), r);
        assert_eq!(subsample_fps(&r, 30).unwrap(), r);
        assert!(Degradation::GaussianNoise { sigma: 0.0 }.is_neutral());
        assert!(!Degradation::ReducedPrecision { step: 1e-4 }.is_neutral());
    }

    #[test]
    fn noise_is_seeded() {
        let r = rec(30);
        let a = add_noise(&r, 0.3, 5).unwrap();
        assert_eq!(a, add_noise(&r, 0.3, 5).unwrap());
        assert_ne!(a, add_noise(&r, 0.3, 6).unwrap());
        assert!(add_noise(&r, -1.0, 0).is_err());
        for f in a.frames() {
            for p in f.poses() {
                assert!((p.orientation.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn subsample_keeps_every_kth_frame() {
        let r = rec(61);
        let s = subsample_fps(&r, 15).unwrap();
        assert_eq!(s.len(), 31);
        for (k, f) in s.frames().iter().enumerate() {
            assert_eq!(*f, r.frames()[2 * k]);
        }
        let one = subsample_fps(&r, 1).unwrap();
        assert_eq!(one.len(), 3);
        assert_eq!(one.frames()[1], r.frames()[30]);
        assert!(subsample_fps(&r, 7).is_err());
        assert!(subsample_fps(&r, 0).is_err());
        assert!(subsample_fps(&r, 60).is_err());
    }

    #[test]
    fn rounding_examples() {
        assert_eq!(round_to(0.2499, 0.01), 0.25);
        assert_eq!(round_to(-0.005, 0.01), -0.01);
        assert_eq!(round_to(0.123, 0.0001), 0.123);
        assert_eq!(round_to(2.5, 1.0), 3.0);
        assert_eq!(round_to(0.7, 0.25), 0.75);
    }

    #[test]
    fn quantize_fine_step_is_identity_on_coarse_values() {
        let frames = (0..3)
            .map(|i| {
                let p = Pose::new(Vec3::new(0.123, -1.5, 0.001 * i as f64), UnitQuat::IDENTITY);
                PoseFrame { t: i as f64, head: p, left: p, right: p }
            })
            .collect();
        let r = Recording::new("u", "s", 0, 1.0, frames).unwrap();
        let (q, report) = quantize(&r, 0.0001);
        assert_eq!(q, r);
        assert_eq!(report.collapsed_quaternions, 0);
    }

    #[test]
    fn quantize_is_idempotent() {
        let r = rec(40);
        for step in PRECISION_GRID {
            let once = quantize(&r, step).0;
            assert_eq!(quantize(&once, step).0, once, "step {step}");
        }
    }

    #[test]
    fn parse_and_display() {
        let d: Degradation = "gaussian_noise:0.5".parse().unwrap();
        assert_eq!(d, Degradation::GaussianNoise { sigma: 0.5 });
        assert_eq!(d.to_string(), "gaussian_noise:0.5");
        let d: Degradation = "reduced_dims:hands_only".parse().unwrap();
        assert_eq!(d.mask().count(), 14);
        assert_eq!("none".parse::<Degradation>().unwrap(), Degradation::None);
        assert!("reduced_fps:7".parse::<Degradation>().is_err());
        assert!("reduced_fps:2.5".parse::<Degradation>().is_err());
        assert!("reduced_precision:0".parse::<Degradation>().is_err());
        assert!("gaussian_noise:-1".parse::<Degradation>().is_err());
        assert!("blur:1".parse::<Degradation>().is_err());
    }

    #[test]
    fn recording_seed_is_stable_and_separates_ids() {
        assert_eq!(recording_seed(1, "a", "b"), recording_seed(1, "a", "b"));
        assert_ne!(recording_seed(1, "a", "b"), recording_seed(2, "a", "b"));
        assert_ne!(recording_seed(1, "ab", ""), recording_seed(1, "a", "b"));
        // FNV-1a of the empty suffix chain is fixed; guard the documented hash.
        assert_eq!(recording_seed(0, "", ""), {
            let mut h: u64 = 0xcbf2_9ce4_8422_2325;
            for b in [0u8; 8].into_iter().chain([0xff]) {
                h = (h ^ b as u64).wrapping_mul(0x100_0000_01b3);
            }
            h
        });
    }
}
