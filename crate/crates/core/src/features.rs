//! Feature pipeline: fixed-rate resampling, body-relative transform
//! (21 raw scalars to 18 channels), backward differences (18 to 36), and
//! fixed-length windows.

use crate::error::{Error, Result};
use crate::motion::{
    hemisphere_align, horizontal_yaw, rotate_vec, slerp, PoseFrame, Recording, UnitQuat,
};

pub mod cache;

/// Channels of one [`BodyFrame`].
pub const BODY_CHANNELS: usize = 18;
/// Channels of one differentiated frame: velocity then acceleration.
pub const FEATURE_CHANNELS: usize = 2 * BODY_CHANNELS;

pub const HEAD_ROT: std::ops::Range<usize> = 0..4;
pub const LEFT_POS: std::ops::Range<usize> = 4..7;
pub const LEFT_ROT: std::ops::Range<usize> = 7..11;
pub const RIGHT_POS: std::ops::Range<usize> = 11..14;
pub const RIGHT_ROT: std::ops::Range<usize> = 14..18;

/// Body-relative pose: `head_rot(4) left_pos(3) left_rot(4) right_pos(3) right_rot(4)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyFrame(pub [f64; BODY_CHANNELS]);

impl BodyFrame {
    fn quat(&self, r: std::ops::Range<usize>) -> UnitQuat {
        let c = &self.0[r];
        UnitQuat::from_components([c[0], c[1], c[2], c[3]]).unwrap_or_default()
    }

    pub fn head_rot(&self) -> UnitQuat {
        self.quat(HEAD_ROT)
    }
    pub fn left_rot(&self) -> UnitQuat {
        self.quat(LEFT_ROT)
    }
    pub fn right_rot(&self) -> UnitQuat {
        self.quat(RIGHT_ROT)
    }
}

/// Resamples at `t = k / fps` over the span of the input, interpolating
/// positions linearly and orientations by slerp. Never extrapolates.
pub fn resample(rec: &Recording, fps: f64) -> Result<Recording> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::Parameter(format!("fps must be positive, got {fps}")));
    }
    let src = rec.frames();
    let (first, last) = match (src.first(), src.last()) {
        (Some(a), Some(b)) if src.len() >= 2 => (a.t, b.t),
        _ => return Err(Error::Length { needed: 2, got: src.len() }),
    };
    let span_eps = 1e-9 * last.abs().max(1.0);
    let mut k = (first * fps - 1e-9).ceil().max(0.0) as u64;
    let mut j = 0;
    let mut out = Vec::with_capacity(((last - first) * fps) as usize + 2);
    loop {
        let t = k as f64 / fps;
        if t > last + span_eps {
            break;
        }
        while j + 1 < src.len() && src[j + 1].t <= t {
            j += 1;
        }
        let mut f = if j + 1 >= src.len() {
            src[src.len() - 1]
        } else {
            let (a, b) = (&src[j], &src[j + 1]);
            let u = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
            interpolate(a, b, u)
        };
        f.t = t;
        out.push(f);
        k += 1;
    }
    Recording::new(rec.user_id.clone(), rec.session_id.clone(), rec.start_time, fps, out)
}

fn interpolate(a: &PoseFrame, b: &PoseFrame, u: f64) -> PoseFrame {
    let mut f = *a;
    for (out, (pa, pb)) in f.poses_mut().into_iter().zip(a.poses().into_iter().zip(b.poses())) {
        out.position = pa.position.lerp(pb.position, u);
        out.orientation = slerp(pa.orientation, pb.orientation, u);
    }
    f
}

/// Moves the head to the origin and removes its horizontal heading.
///
/// Returns the body frame and the yaw that was removed. Quaternion
/// channels are aligned to `prev` when given, otherwise canonicalized to
/// `w >= 0`.
pub fn to_body_relative(
    frame: &PoseFrame,
    prev_yaw: Option<f64>,
    prev: Option<&BodyFrame>,
) -> (BodyFrame, f64) {
    let yaw = horizontal_yaw(frame.head.orientation, prev_yaw);
    let derot = UnitQuat::from_yaw(-yaw);
    let head_p = frame.head.position;

    let mut rots = [
        derot * frame.head.orientation,
        derot * frame.left.orientation,
        derot * frame.right.orientation,
    ];
    match prev {
        Some(p) => {
            rots[0] = hemisphere_align(p.head_rot(), rots[0]);
            rots[1] = hemisphere_align(p.left_rot(), rots[1]);
            rots[2] = hemisphere_align(p.right_rot(), rots[2]);
        }
        None => rots = rots.map(UnitQuat::canonical),
    }
    let left = rotate_vec(derot, frame.left.position - head_p);
    let right = rotate_vec(derot, frame.right.position - head_p);

    let mut c = [0.0; BODY_CHANNELS];
    c[HEAD_ROT].copy_from_slice(&rots[0].to_array());
    c[LEFT_POS].copy_from_slice(&left.to_array());
    c[LEFT_ROT].copy_from_slice(&rots[1].to_array());
    c[RIGHT_POS].copy_from_slice(&right.to_array());
    c[RIGHT_ROT].copy_from_slice(&rots[2].to_array());
    (BodyFrame(c), yaw)
}

/// Applies [`to_body_relative`] across a frame sequence, threading the
/// previous yaw and hemisphere through.
pub fn body_relative_sequence(frames: &[PoseFrame]) -> Vec<BodyFrame> {
    let mut out: Vec<BodyFrame> = Vec::with_capacity(frames.len());
    let mut yaw = None;
    for f in frames {
        let (b, y) = to_body_relative(f, yaw, out.last());
        yaw = Some(y);
        out.push(b);
    }
    out
}

/// Backward first and second differences scaled by `fps`.
///
/// Velocity at index 0 and acceleration at index 0 are zero; acceleration
/// at index 1 is taken against the zero velocity at index 0.
pub fn differentiate(frames: &[BodyFrame], fps: f64) -> Result<Vec<[f64; FEATURE_CHANNELS]>> {
    if frames.len() < 3 {
        return Err(Error::Length { needed: 3, got: frames.len() });
    }
    let mut out = vec![[0.0; FEATURE_CHANNELS]; frames.len()];
    for t in 1..frames.len() {
        let (head, tail) = out.split_at_mut(t);
        let prev = &head[t - 1];
        let cur = &mut tail[0];
        for c in 0..BODY_CHANNELS {
            let v = (frames[t].0[c] - frames[t - 1].0[c]) * fps;
            cur[c] = v;
            cur[BODY_CHANNELS + c] = (v - prev[c]) * fps;
        }
    }
    Ok(out)
}

/// One model input: `frames × channels`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub frames: usize,
    pub channels: usize,
    pub data: Vec<f64>,
    pub label: usize,
    pub session_id: String,
}

impl FeatureWindow {
    pub fn new(frames: usize, channels: usize, data: Vec<f64>, label: usize, session_id: impl Into<String>) -> Result<Self> {
        if data.len() != frames * channels || frames == 0 || channels == 0 {
            return Err(Error::Shape(format!(
                "{} values for a {frames} x {channels} window",
                data.len()
            )));
        }
        Ok(Self { frames, channels, data, label, session_id: session_id.into() })
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.channels..(t + 1) * self.channels]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.frames, self.channels)
    }
}

/// Number of frames in a window, if `window_seconds * fps` is a positive integer.
pub fn frames_per_window(fps: f64, window_seconds: f64) -> Result<usize> {
    let n = window_seconds * fps;
    let r = n.round();
    if !(r >= 1.0 && (n - r).abs() < 1e-9) {
        return Err(Error::Parameter(format!(
            "window of {window_seconds} s at {fps} fps is not a whole number of frames"
        )));
    }
    Ok(r as usize)
}

/// Cuts consecutive non-overlapping windows; a short tail is dropped.
pub fn windowize(
    vectors: &[[f64; FEATURE_CHANNELS]],
    fps: f64,
    window_seconds: f64,
    label: usize,
    session_id: &str,
) -> Result<Vec<FeatureWindow>> {
    let n = frames_per_window(fps, window_seconds)?;
    Ok(vectors
        .chunks_exact(n)
        .map(|chunk| FeatureWindow {
            frames: n,
            channels: FEATURE_CHANNELS,
            data: chunk.iter().flatten().copied().collect(),
            label,
            session_id: session_id.to_string(),
        })
        .collect())
}

/// Selection over the 18 body channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelMask([bool; BODY_CHANNELS]);

impl ChannelMask {
    pub const ALL: ChannelMask = ChannelMask([true; BODY_CHANNELS]);

    pub fn new(flags: [bool; BODY_CHANNELS]) -> Result<Self> {
        if !flags.iter().any(|&f| f) {
            return Err(Error::Parameter("channel mask selects nothing".into()));
        }
        Ok(Self(flags))
    }

    pub fn from_ranges(ranges: &[std::ops::Range<usize>]) -> Result<Self> {
        let mut flags = [false; BODY_CHANNELS];
        for r in ranges {
            for i in r.clone() {
                flags[i] = true;
            }
        }
        Self::new(flags)
    }

    pub fn flags(&self) -> &[bool; BODY_CHANNELS] {
        &self.0
    }

    pub fn selected(&self) -> Vec<usize> {
        (0..BODY_CHANNELS).filter(|&i| self.0[i]).collect()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&f| f).count()
    }

    pub fn is_subset_of(&self, other: &ChannelMask) -> bool {
        self.0.iter().zip(other.0).all(|(&a, b)| !a || b)
    }
}

/// Keeps the velocity and acceleration columns of the selected body
/// channels, in their original order.
pub fn apply_mask(window: &FeatureWindow, mask: &ChannelMask) -> Result<FeatureWindow> {
    if mask.count() == 0 {
        return Err(Error::Parameter("channel mask selects nothing".into()));
    }
    if window.channels != FEATURE_CHANNELS {
        return Err(Error::Shape(format!(
            "mask expects {FEATURE_CHANNELS} channels, window has {}",
            window.channels
        )));
    }
    if *mask == ChannelMask::ALL {
        return Ok(window.clone());
    }
    let sel = mask.selected();
    let cols: Vec<usize> = sel.iter().copied().chain(sel.iter().map(|c| c + BODY_CHANNELS)).collect();
    let mut data = Vec::with_capacity(window.frames * cols.len());
    for t in 0..window.frames {
        let row = window.row(t);
        data.extend(cols.iter().map(|&c| row[c]));
    }
    FeatureWindow::new(window.frames, cols.len(), data, window.label, window.session_id.clone())
}

/// Sampling rate and window length of the feature pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    pub fps: f64,
    pub window_seconds: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { fps: 30.0, window_seconds: 30.0 }
    }
}

/// Body-relative transform, differentiation and windowing for a recording
/// already sampled at `fps`.
pub fn featurize_sampled(rec: &Recording, fps: f64, window_seconds: f64, label: usize) -> Result<Vec<FeatureWindow>> {
    let body = body_relative_sequence(rec.frames());
    let vectors = differentiate(&body, fps)?;
    windowize(&vectors, fps, window_seconds, label, &rec.session_id)
}

/// Full pipeline from a raw recording.
pub fn featurize(rec: &Recording, cfg: &FeatureConfig, label: usize) -> Result<Vec<FeatureWindow>> {
    let resampled = resample(rec, cfg.fps)?;
    featurize_sampled(&resampled, cfg.fps, cfg.window_seconds, label)
}
