//! Applies each degradation operator to one recording and reports how far
//! the raw channels moved.

use reid_lab::degrade::{add_noise, quantize, subsample_fps, Degradation, NOISE_GRID, PRECISION_GRID};
use reid_lab::motion::Recording;
use reid_lab::synthgen::{generate_profile, generate_recording};

fn rms_change(a: &Recording, b: &Recording) -> f64 {
    let mut sum = 0.0;
    let mut n = 0.0;
    for (x, y) in a.frames().iter().zip(b.frames()) {
        for (p, q) in x.raw().iter().zip(y.raw()) {
            sum += (p - q) * (p - q);
            n += 1.0;
        }
    }
    (sum / n).sqrt()
}

fn main() -> reid_lab::Result<()> {
    let rec = generate_recording(&generate_profile(3), "user000", "s000", 0, 30.0, 30.0, 1)?;
    println!("{} frames at 30 fps", rec.len());

    for sigma in NOISE_GRID.iter().take(4) {
        let noisy = add_noise(&rec, *sigma, 11)?;
        println!("noise sigma={sigma:<4} rms change {:.4}", rms_change(&rec, &noisy));
    }
    for fps in [15, 5, 1] {
        println!("reduced to {fps:>2} fps: {} frames", subsample_fps(&rec, fps)?.len());
    }
    for step in PRECISION_GRID {
        let (q, report) = quantize(&rec, step);
        println!(
            "rounded to {step:<6} rms change {:.6}, collapsed quaternions {}",
            rms_change(&rec, &q),
            report.collapsed_quaternions
        );
    }
    for spec in ["none", "gaussian_noise:0", "reduced_fps:30", "reduced_dims:all", "reduced_dims:hands_only"] {
        let d: Degradation = spec.parse()?;
        println!("{spec:<24} neutral={} mask width {}", d.is_neutral(), d.mask().count());
    }
    Ok(())
}
