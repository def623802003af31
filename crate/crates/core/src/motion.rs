//! Geometry and pose types shared by the whole pipeline.
//!
//! Conventions: right-handed coordinates, `y` is up, and the identity
//! orientation looks down `-z`. Quaternions are scalar-first `(w, x, y, z)`.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Tolerance on `|q| - 1` that every [`UnitQuat`] satisfies.
pub const UNIT_TOLERANCE: f64 = 1e-9;

const SLERP_PARALLEL_EPS: f64 = 1e-9;
const YAW_DEGENERATE_NORM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    /// `self + (other - self) * u`.
    pub fn lerp(self, other: Vec3, u: f64) -> Vec3 {
        Vec3::new(
            self.x + (other.x - self.x) * u,
            self.y + (other.y - self.y) * u,
            self.z + (other.z - self.z) * u,
        )
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A rotation stored as a unit quaternion, scalar first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuat {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for UnitQuat {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Divides `(w, x, y, z)` by its norm.
    pub fn normalize(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n <= 1e-12 {
            return Err(Error::DegenerateQuaternion { norm: n });
        }
        Ok(Self { w: w / n, x: x / n, y: y / n, z: z / n })
    }

    /// Accepts the components as-is when already unit within
    /// [`UNIT_TOLERANCE`], otherwise normalizes.
    pub fn from_components(c: [f64; 4]) -> Result<Self> {
        let n2 = c.iter().map(|v| v * v).sum::<f64>();
        if c.iter().all(|v| v.is_finite()) && (n2.sqrt() - 1.0).abs() <= UNIT_TOLERANCE {
            Ok(Self { w: c[0], x: c[1], y: c[2], z: c[3] })
        } else {
            Self::normalize(c[0], c[1], c[2], c[3])
        }
    }

    /// Rotation of `angle` radians about `axis` (need not be unit).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self> {
        let n = axis.norm();
        if n <= 1e-12 {
            return Err(Error::DegenerateQuaternion { norm: n });
        }
        let (s, c) = (angle * 0.5).sin_cos();
        let a = axis.scale(1.0 / n);
        Ok(Self { w: c, x: a.x * s, y: a.y * s, z: a.z * s })
    }

    /// Rotation about the vertical axis.
    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = (yaw * 0.5).sin_cos();
        Self { w: c, x: 0.0, y: s, z: 0.0 }
    }

    pub fn w(self) -> f64 {
        self.w
    }
    pub fn x(self) -> f64 {
        self.x
    }
    pub fn y(self) -> f64 {
        self.y
    }
    pub fn z(self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(self, o: UnitQuat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn conjugate(self) -> UnitQuat {
        UnitQuat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Same rotation, `w >= 0`.
    pub fn canonical(self) -> UnitQuat {
        if self.w < 0.0 {
            -self
        } else {
            self
        }
    }

    /// Rotation angle between two orientations, in `[0, π]`.
    pub fn angle_to(self, o: UnitQuat) -> f64 {
        let d = self.dot(o).abs().min(1.0);
        2.0 * d.acos()
    }
}

impl Neg for UnitQuat {
    type Output = UnitQuat;
    fn neg(self) -> UnitQuat {
        UnitQuat { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
    }
}

/// Hamilton product; `a * b` applies `b` first.
impl Mul for UnitQuat {
    type Output = UnitQuat;
    fn mul(self, b: UnitQuat) -> UnitQuat {
        let a = self;
        UnitQuat {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }
}

/// Normalizes a raw quadruple.
pub fn quat_normalize(q: [f64; 4]) -> Result<UnitQuat> {
    UnitQuat::normalize(q[0], q[1], q[2], q[3])
}

/// Returns `cur` or `-cur`, whichever lies in the same hemisphere as `prev`.
pub fn hemisphere_align(prev: UnitQuat, cur: UnitQuat) -> UnitQuat {
    if prev.dot(cur) < 0.0 {
        -cur
    } else {
        cur
    }
}

/// Spherical linear interpolation along the shortest arc from `a` to `b`.
pub fn slerp(a: UnitQuat, b: UnitQuat, u: f64) -> UnitQuat {
    let b = hemisphere_align(a, b);
    if u == 0.0 {
        return a;
    }
    let d = a.dot(b).min(1.0);
    let (wa, wb) = if d > 1.0 - SLERP_PARALLEL_EPS {
        (1.0 - u, u)
    } else {
        let theta = d.acos();
        let s = theta.sin();
        (((1.0 - u) * theta).sin() / s, (u * theta).sin() / s)
    };
    let q = [
        wa * a.w + wb * b.w,
        wa * a.x + wb * b.x,
        wa * a.y + wb * b.y,
        wa * a.z + wb * b.z,
    ];
    // The weights are never both zero for u in [0, 1], so this cannot fail.
    UnitQuat::normalize(q[0], q[1], q[2], q[3]).unwrap_or(a)
}

/// Rotates `v` by `q`.
pub fn rotate_vec(q: UnitQuat, v: Vec3) -> Vec3 {
    // v' = v + 2w (u × v) + 2 u × (u × v), u = vector part.
    let u = Vec3::new(q.x, q.y, q.z);
    let t = u.cross(v).scale(2.0);
    v + t.scale(q.w) + u.cross(t)
}

/// Yaw of the forward (`-z`) direction projected onto the horizontal plane.
///
/// When the forward vector is nearly vertical the projection is degenerate
/// and `prev_yaw` (or zero) is returned.
pub fn horizontal_yaw(head: UnitQuat, prev_yaw: Option<f64>) -> f64 {
    let f = rotate_vec(head, Vec3::new(0.0, 0.0, -1.0));
    if f.x.hypot(f.z) < YAW_DEGENERATE_NORM {
        return prev_yaw.unwrap_or(0.0);
    }
    // A yaw of α about +y maps -z to (-sin α, 0, -cos α).
    (-f.x).atan2(-f.z)
}

/// Position and orientation of one tracked device.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: UnitQuat,
}

impl Pose {
    pub fn new(position: Vec3, orientation: UnitQuat) -> Self {
        Self { position, orientation }
    }
}

/// Number of raw scalars in one [`PoseFrame`].
pub const RAW_CHANNELS: usize = 21;

/// One timestamped sample of head and both hand controllers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseFrame {
    pub t: f64,
    pub head: Pose,
    pub left: Pose,
    pub right: Pose,
}

impl PoseFrame {
    pub fn poses(&self) -> [&Pose; 3] {
        [&self.head, &self.left, &self.right]
    }

    pub fn poses_mut(&mut self) -> [&mut Pose; 3] {
        [&mut self.head, &mut self.left, &mut self.right]
    }

    /// Raw scalars in order: for head, left, right: `p.x p.y p.z q.w q.x q.y q.z`.
    pub fn raw(&self) -> [f64; RAW_CHANNELS] {
        let mut out = [0.0; RAW_CHANNELS];
        for (k, pose) in self.poses().iter().enumerate() {
            out[k * 7..k * 7 + 3].copy_from_slice(&pose.position.to_array());
            out[k * 7 + 3..k * 7 + 7].copy_from_slice(&pose.orientation.to_array());
        }
        out
    }
}

/// One recorded session for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub user_id: String,
    pub session_id: String,
    /// Epoch seconds; only used for chronological ordering.
    pub start_time: i64,
    pub nominal_fps: f64,
    frames: Vec<PoseFrame>,
}

impl Recording {
    /// Validates the frame sequence and aligns every orientation channel to
    /// the hemisphere of its predecessor (the first frame gets `w >= 0`).
    pub fn new(
        user_id: impl Into<String>,
        session_id: impl Into<String>,
        start_time: i64,
        nominal_fps: f64,
        mut frames: Vec<PoseFrame>,
    ) -> Result<Self> {
        validate_frames(&frames)?;
        align_orientations(&mut frames);
        Ok(Self::from_parts(user_id, session_id, start_time, nominal_fps, frames))
    }

    /// Builds a recording from frames that are already validated and
    /// aligned; used by operators that must not touch values.
    pub(crate) fn from_parts(
        user_id: impl Into<String>,
        session_id: impl Into<String>,
        start_time: i64,
        nominal_fps: f64,
        frames: Vec<PoseFrame>,
    ) -> Self {
        Self {
            user_id: user_id.into(),
            session_id: session_id.into(),
            start_time,
            nominal_fps,
            frames,
        }
    }

    /// Same metadata, different frames.
    pub(crate) fn with_frames(&self, frames: Vec<PoseFrame>, fps: f64) -> Self {
        Self::from_parts(
            self.user_id.clone(),
            self.session_id.clone(),
            self.start_time,
            fps,
            frames,
        )
    }

    pub fn frames(&self) -> &[PoseFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.frames.last().map_or(0.0, |f| f.t) - self.frames.first().map_or(0.0, |f| f.t)
    }
}

fn validate_frames(frames: &[PoseFrame]) -> Result<()> {
    if frames.len() < 2 {
        return Err(Error::Length { needed: 2, got: frames.len() });
    }
    for (i, f) in frames.iter().enumerate() {
        if !(f.t.is_finite() && f.t >= 0.0) {
            return Err(Error::Validation {
                line: i + 2,
                msg: format!("timestamp {} is not a finite non-negative value", f.t),
            });
        }
        if i > 0 && f.t <= frames[i - 1].t {
            return Err(Error::Ordering { line: i + 2, prev: frames[i - 1].t, t: f.t });
        }
        if f.poses().iter().any(|p| !p.position.is_finite()) {
            return Err(Error::Validation { line: i + 2, msg: "non-finite position".into() });
        }
    }
    Ok(())
}

fn align_orientations(frames: &mut [PoseFrame]) {
    let mut prev: Option<[UnitQuat; 3]> = None;
    for f in frames.iter_mut() {
        let mut cur = [f.head.orientation, f.left.orientation, f.right.orientation];
        for (k, q) in cur.iter_mut().enumerate() {
            *q = match prev {
                Some(p) => hemisphere_align(p[k], *q),
                None => q.canonical(),
            };
        }
        f.head.orientation = cur[0];
        f.left.orientation = cur[1];
        f.right.orientation = cur[2];
        prev = Some(cur);
    }
}
