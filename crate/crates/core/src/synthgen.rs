//! Deterministic synthetic telemetry with distinguishable users.
//!
//! Each user is a mixture of sinusoids around a personal posture. All
//! oscillation frequencies sit on a 0.25 Hz grid, so with jitter and yaw
//! drift switched off every channel repeats with a period of
//! [`MOTION_PERIOD`] seconds.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::degrade::recording_seed;
use crate::error::{Error, Result};
use crate::motion::{Pose, PoseFrame, Recording, UnitQuat, Vec3};

pub const FREQ_STEP: f64 = 0.25;
pub const MIN_FREQ: f64 = 0.5;
pub const MAX_FREQ: f64 = 4.0;
pub const MIN_AMP: f64 = 0.05;
pub const MAX_AMP: f64 = 0.4;
/// Common period of every oscillation, `1 / FREQ_STEP`.
pub const MOTION_PERIOD: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    pub freq: f64,
    pub amp: f64,
    pub phase: f64,
}

impl Sinusoid {
    fn value(&self, t: f64, shift: f64) -> f64 {
        self.amp * (TAU * self.freq * t + self.phase + shift).sin()
    }

    fn rate(&self, t: f64, shift: f64) -> f64 {
        self.amp * TAU * self.freq * (TAU * self.freq * t + self.phase + shift).cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandProfile {
    /// Resting position relative to the head, in the head's yaw frame.
    pub rest: Vec3,
    pub rest_orientation: UnitQuat,
    /// 2-4 components per positional axis.
    pub components: [Vec<Sinusoid>; 3],
    /// Radians of tilt per m/s of hand velocity.
    pub orientation_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub seed: u64,
    pub head_height: f64,
    pub arm_scale: f64,
    pub head_bob: Sinusoid,
    pub head_sway: Sinusoid,
    pub head_pitch: Sinusoid,
    pub pitch_offset: f64,
    /// Radians per second.
    pub yaw_drift: f64,
    /// Standard deviation of per-frame positional jitter, meters.
    pub jitter: f64,
    pub hands: [HandProfile; 2],
}

fn grid_freq(rng: &mut ChaCha8Rng) -> f64 {
    let lo = (MIN_FREQ / FREQ_STEP) as u32;
    let hi = (MAX_FREQ / FREQ_STEP) as u32;
    rng.random_range(lo..=hi) as f64 * FREQ_STEP
}

fn sinusoid(rng: &mut ChaCha8Rng, amp: std::ops::Range<f64>) -> Sinusoid {
    Sinusoid { freq: grid_freq(rng), amp: rng.random_range(amp), phase: rng.random_range(0.0..TAU) }
}

fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> UnitQuat {
    let axis = Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let angle = rng.random_range(0.0..max_angle);
    UnitQuat::from_axis_angle(axis, angle).unwrap_or_default()
}

fn hand(rng: &mut ChaCha8Rng, side: f64) -> HandProfile {
    let rest = Vec3::new(
        side * rng.random_range(0.15..0.4),
        rng.random_range(-0.6..-0.3),
        rng.random_range(-0.5..-0.2),
    );
    let components = [0, 1, 2].map(|_| {
        let n = rng.random_range(2..=4);
        (0..n).map(|_| sinusoid(rng, MIN_AMP..MAX_AMP)).collect()
    });
    HandProfile {
        rest,
        rest_orientation: random_rotation(rng, 1.5),
        components,
        orientation_gain: rng.random_range(0.02..0.08),
    }
}

/// Draws a user profile; identical seeds give identical profiles.
pub fn generate_profile(seed: u64) -> UserProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    UserProfile {
        seed,
        head_height: rng.random_range(1.5..1.9),
        arm_scale: rng.random_range(0.85..1.15),
        head_bob: sinusoid(&mut rng, 0.01..0.04),
        head_sway: sinusoid(&mut rng, 0.05..0.3),
        head_pitch: sinusoid(&mut rng, 0.02..0.15),
        pitch_offset: rng.random_range(-0.3..0.1),
        yaw_drift: rng.random_range(-0.05..0.05),
        jitter: rng.random_range(0.0001..0.0004),
        hands: [hand(&mut rng, -1.0), hand(&mut rng, 1.0)],
    }
}

/// Largest per-component phase perturbation between sessions, radians.
pub const SESSION_PHASE_SPREAD: f64 = 0.3;

/// Per-session randomness: where in the motion cycle the session starts,
/// small per-component phase perturbations, start heading and location.
struct Session {
    hand_shift: [[Vec<f64>; 3]; 2],
    head_shift: [f64; 3],
    yaw0: f64,
    origin: Vec3,
}

fn draw_session(profile: &UserProfile, rng: &mut ChaCha8Rng) -> Session {
    let offset = rng.random_range(0.0..MOTION_PERIOD);
    let mut shift = |s: &Sinusoid| {
        TAU * s.freq * offset + rng.random_range(-SESSION_PHASE_SPREAD..SESSION_PHASE_SPREAD)
    };
    let hand_shift = [0, 1].map(|h| [0, 1, 2].map(|a| profile.hands[h].components[a].iter().map(&mut shift).collect()));
    let head_shift = [&profile.head_sway, &profile.head_pitch, &profile.head_bob].map(&mut shift);
    Session {
        hand_shift,
        head_shift,
        yaw0: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        origin: Vec3::new(rng.random_range(-2.0..2.0), 0.0, rng.random_range(-2.0..2.0)),
    }
}

/// Hand offset and velocity in the head's yaw frame.
fn hand_motion(h: &HandProfile, shift: &[Vec<f64>; 3], t: f64, scale: f64) -> (Vec3, Vec3) {
    let mut pos = [0.0; 3];
    let mut vel = [0.0; 3];
    for a in 0..3 {
        for (s, d) in h.components[a].iter().zip(&shift[a]) {
            pos[a] += s.value(t, *d);
            vel[a] += s.rate(t, *d);
        }
    }
    let pos = (h.rest + Vec3::from_array(pos)).scale(scale);
    (pos, Vec3::from_array(vel).scale(scale))
}

/// Generates one session. Frame times are `i / fps`.
pub fn generate_recording(
    profile: &UserProfile,
    user_id: &str,
    session_id: &str,
    start_time: i64,
    duration_s: f64,
    fps: f64,
    session_seed: u64,
) -> Result<Recording> {
    if !(duration_s >= 1.0 && fps.is_finite() && fps > 0.0) {
        return Err(Error::Parameter(format!(
            "need duration >= 1 s and positive fps, got {duration_s} s at {fps} fps"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(session_seed);
    let session = draw_session(profile, &mut rng);
    let jitter = Normal::new(0.0, profile.jitter).map_err(|e| Error::Parameter(e.to_string()))?;
    let n = (duration_s * fps).round() as usize;
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fps;
        let yaw = session.yaw0 + profile.yaw_drift * t + profile.head_sway.value(t, session.head_shift[0]);
        let heading = UnitQuat::from_yaw(yaw);
        let pitch = UnitQuat::from_axis_angle(
            Vec3::new(1.0, 0.0, 0.0),
            profile.pitch_offset + profile.head_pitch.value(t, session.head_shift[1]),
        )?;
        let head_pos = session.origin
            + Vec3::new(0.0, profile.head_height + profile.head_bob.value(t, session.head_shift[2]), 0.0);

        let mut noise = || Vec3::new(jitter.sample(&mut rng), jitter.sample(&mut rng), jitter.sample(&mut rng));
        let mut hands = [Pose::default(); 2];
        for (k, out) in hands.iter_mut().enumerate() {
            let hp = &profile.hands[k];
            let (local, vel) = hand_motion(hp, &session.hand_shift[k], t, profile.arm_scale);
            let tilt = Vec3::new(vel.y, -vel.x, 0.5 * vel.z).scale(hp.orientation_gain);
            let wobble = noise().scale(0.5);
            let track = rotation_vector(tilt + wobble);
            let position = head_pos + crate::motion::rotate_vec(heading, local) + noise();
            *out = Pose::new(position, heading * hp.rest_orientation * track);
        }
        frames.push(PoseFrame {
            t,
            head: Pose::new(head_pos, heading * pitch),
            left: hands[0],
            right: hands[1],
        });
    }
    Recording::new(user_id, session_id, start_time, fps, frames)
}

fn rotation_vector(v: Vec3) -> UnitQuat {
    let angle = v.norm();
    if angle < 1e-15 {
        return UnitQuat::IDENTITY;
    }
    UnitQuat::from_axis_angle(v, angle).unwrap_or_default()
}

pub fn user_id(u: usize) -> String {
    format!("user{u:03}")
}

pub fn session_id(s: usize) -> String {
    format!("s{s:03}")
}

/// `users × sessions` recordings. Profiles and sessions are seeded from
/// `seed` and the ids; session `s` starts `s` hours after a fixed epoch.
pub fn generate_dataset(users: usize, sessions: usize, duration_s: f64, fps: f64, seed: u64) -> Result<Vec<Recording>> {
    let mut out = Vec::with_capacity(users * sessions);
    for u in 0..users {
        let uid = user_id(u);
        let profile = generate_profile(recording_seed(seed, &uid, ""));
        for s in 0..sessions {
            let sid = session_id(s);
            let start = 1_700_000_000 + 3600 * s as i64;
            out.push(generate_recording(
                &profile,
                &uid,
                &sid,
                start,
                duration_s,
                fps,
                recording_seed(seed, &uid, &sid),
            )?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{body_relative_sequence, BODY_CHANNELS, LEFT_POS, RIGHT_POS};
    use crate::ingest::{parse_recording, serialize_recording};

    #[test]
    fn profiles_are_deterministic_and_distinct() {
        assert_eq!(generate_profile(3), generate_profile(3));
        let rests: Vec<Vec3> = (1..=8).map(|s| generate_profile(s).hands[0].rest).collect();
        for i in 0..rests.len() {
            for j in i + 1..rests.len() {
                assert_ne!(rests[i], rests[j]);
            }
        }
    }

    #[test]
    fn amplitudes_and_frequencies_in_range() {
        for seed in 0..1000 {
            let p = generate_profile(seed);
            for h in &p.hands {
                for axis in &h.components {
                    assert!((2..=4).contains(&axis.len()));
                    for s in axis {
                        assert!((MIN_AMP..=MAX_AMP).contains(&s.amp));
                        assert!((MIN_FREQ..=MAX_FREQ).contains(&s.freq));
                        assert_eq!((s.freq / FREQ_STEP).fract(), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn recording_shape_and_validity() {
        let p = generate_profile(1);
        let r = generate_recording(&p, "u", "s", 0, 60.0, 30.0, 7).unwrap();
        assert_eq!(r.len(), 1800);
        for (i, f) in r.frames().iter().enumerate() {
            assert_eq!(f.t, i as f64 / 30.0);
        }
        let text = serialize_recording(&r);
        let back = parse_recording(text.lines()).unwrap();
        assert_eq!(back.len(), 1800);
        assert!(generate_recording(&p, "u", "s", 0, 0.5, 30.0, 7).is_err());
    }

    #[test]
    fn noiseless_motion_is_periodic() {
        let mut p = generate_profile(11);
        p.jitter = 0.0;
        p.yaw_drift = 0.0;
        let r = generate_recording(&p, "u", "s", 0, 12.0, 30.0, 2).unwrap();
        let lag = (MOTION_PERIOD * 30.0) as usize;
        let raw: Vec<[f64; 21]> = r.frames().iter().map(|f| f.raw()).collect();
        for c in 0..21 {
            let x: Vec<f64> = raw.iter().map(|v| v[c]).collect();
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
            if var < 1e-18 {
                continue;
            }
            let n = x.len() - lag;
            let num: f64 = (0..n).map(|i| (x[i] - mean) * (x[i + lag] - mean)).sum();
            let den: f64 = (0..n).map(|i| (x[i] - mean).powi(2)).sum();
            assert!((num / den - 1.0).abs() < 1e-9, "channel {c}: {}", num / den);
        }
    }

    fn body_means(r: &Recording) -> [f64; BODY_CHANNELS] {
        let body = body_relative_sequence(r.frames());
        let mut m = [0.0; BODY_CHANNELS];
        for b in &body {
            for c in 0..BODY_CHANNELS {
                m[c] += b.0[c] / body.len() as f64;
            }
        }
        m
    }

    #[test]
    fn sessions_differ_but_share_posture() {
        let p = generate_profile(5);
        let a = generate_recording(&p, "u", "a", 0, 20.0, 30.0, 1).unwrap();
        let b = generate_recording(&p, "u", "b", 0, 20.0, 30.0, 2).unwrap();
        assert_ne!(a.frames()[10], b.frames()[10]);
        let (ma, mb) = (body_means(&a), body_means(&b));
        for c in LEFT_POS.chain(RIGHT_POS) {
            assert!((ma[c] - mb[c]).abs() <= 0.1 * ma[c].abs().max(mb[c].abs()), "channel {c}");
        }
    }

    #[test]
    fn between_user_variance_dominates() {
        let recs = generate_dataset(8, 10, 8.0, 30.0, 42).unwrap();
        let means: Vec<[f64; BODY_CHANNELS]> = recs.iter().map(body_means).collect();
        let mut ratios = Vec::new();
        for c in LEFT_POS.chain(RIGHT_POS) {
            let grand = means.iter().map(|m| m[c]).sum::<f64>() / means.len() as f64;
            let mut within = 0.0;
            let mut between = 0.0;
            for u in 0..8 {
                let user = &means[u * 10..(u + 1) * 10];
                let um = user.iter().map(|m| m[c]).sum::<f64>() / 10.0;
                between += (um - grand).powi(2) / 8.0;
                within += user.iter().map(|m| (m[c] - um).powi(2)).sum::<f64>() / 80.0;
            }
            ratios.push(between / within);
        }
        assert!(ratios.iter().all(|&r| r > 2.0), "{ratios:?}");
    }

    #[test]
    fn dataset_is_deterministic() {
        let a = generate_dataset(2, 2, 2.0, 30.0, 9).unwrap();
        assert_eq!(a, generate_dataset(2, 2, 2.0, 30.0, 9).unwrap());
        assert_eq!(a.len(), 4);
        assert_eq!(a[3].user_id, "user001");
        assert_eq!(a[3].session_id, "s001");
    }
}
