//! Resamples an irregularly timed recording onto a 30 fps grid: positions
//! are interpolated linearly and orientations along the shortest arc.

use reid_lab::features::resample;
use reid_lab::motion::{slerp, Pose, PoseFrame, Recording, UnitQuat, Vec3};

fn main() -> reid_lab::Result<()> {
    let up = Vec3::new(0.0, 1.0, 0.0);
    let quarter = UnitQuat::from_axis_angle(up, std::f64::consts::FRAC_PI_2)?;
    let half = slerp(UnitQuat::IDENTITY, quarter, 0.5);
    println!("slerp(identity, 90 deg about y, 0.5) = {:?}", half.to_array());
    println!("angle to identity: {:.6} rad", half.angle_to(UnitQuat::IDENTITY));

    // A head that turns steadily while the timestamps jitter around 45 Hz.
    let times = [0.0, 0.021, 0.047, 0.066, 0.090, 0.113, 0.131, 0.158, 0.180, 0.199, 0.224];
    let frames: Vec<PoseFrame> = times
        .iter()
        .map(|&t| {
            let q = UnitQuat::from_yaw(2.0 * t);
            let head = Pose::new(Vec3::new(t, 1.7, 0.0), q);
            let hand = Pose::new(Vec3::new(t + 0.3, 1.2, -0.3), q);
            PoseFrame { t, head, left: hand, right: hand }
        })
        .collect();
    let rec = Recording::new("demo", "s0", 0, 45.0, frames)?;
    let grid = resample(&rec, 30.0)?;
    println!("{} source frames -> {} frames at 30 fps", rec.len(), grid.len());
    for f in grid.frames() {
        let yaw = reid_lab::motion::horizontal_yaw(f.head.orientation, None);
        println!("t={:.4}  x={:.4}  yaw={:.4} (expected {:.4})", f.t, f.head.position.x, yaw, 2.0 * f.t);
    }
    Ok(())
}
