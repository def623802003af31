//! Featurizes one synthetic session: body-relative transform, velocity and
//! acceleration channels, 30 s windows, and the dimension presets.

use reid_lab::degrade::DimPreset;
use reid_lab::features::{apply_mask, body_relative_sequence, featurize, resample, FeatureConfig};
use reid_lab::synthgen::{generate_profile, generate_recording};

fn main() -> reid_lab::Result<()> {
    let profile = generate_profile(42);
    let rec = generate_recording(&profile, "user000", "s000", 0, 65.0, 30.0, 7)?;
    let body = body_relative_sequence(resample(&rec, 30.0)?.frames());
    let first = &body[0];
    println!("body frame 0: head rot {:?}", first.head_rot().to_array());
    println!("              left hand {:?}", &first.0[4..7]);

    let windows = featurize(&rec, &FeatureConfig::default(), 0)?;
    println!("{} s at 30 fps -> {} windows of {:?}", rec.duration().round(), windows.len(), windows[0].shape());
    for preset in [
        DimPreset::All,
        DimPreset::HandsOnly,
        DimPreset::HandRotationsOnly,
        DimPreset::LeftRotationOnly,
        DimPreset::LeftRotationWOnly,
    ] {
        let w = apply_mask(&windows[0], &preset.mask())?;
        println!("{:<22} {} body channels -> window {:?}", preset.name(), preset.mask().count(), w.shape());
    }
    Ok(())
}
