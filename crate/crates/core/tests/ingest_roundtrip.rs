use proptest::prelude::*;
use reid_lab::ingest::{format_real, parse_recording, serialize_recording};
use reid_lab::motion::{Pose, PoseFrame, Recording, UnitQuat, Vec3};

fn quat() -> impl Strategy<Value = UnitQuat> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("non-degenerate", |c| c.iter().map(|v| v * v).sum::<f64>() > 0.01)
        .prop_map(|c| UnitQuat::normalize(c[0], c[1], c[2], c[3]).unwrap())
}

fn pose() -> impl Strategy<Value = Pose> {
    (prop::array::uniform3(-1e3f64..1e3), quat()).prop_map(|(p, q)| Pose::new(Vec3::from_array(p), q))
}

fn recording() -> impl Strategy<Value = Recording> {
    (prop::collection::vec((1e-4f64..0.5, pose(), pose(), pose()), 2..12), "[a-z0-9_]{1,8}", -5i64..2_000_000_000)
        .prop_map(|(steps, session, start)| {
            let mut t = 0.0;
            let frames = steps
                .into_iter()
                .map(|(dt, head, left, right)| {
                    t += dt;
                    PoseFrame { t, head, left, right }
                })
                .collect();
            Recording::new("user \"q\"", session, start, 29.97, frames).unwrap()
        })
}

proptest! {
    #[test]
    fn serialized_form_is_a_fixed_point(rec in recording()) {
        let text = serialize_recording(&rec);
        let back = parse_recording(text.lines()).unwrap();
        prop_assert_eq!(&back.user_id, &rec.user_id);
        prop_assert_eq!(&back.session_id, &rec.session_id);
        prop_assert_eq!(back.start_time, rec.start_time);
        prop_assert_eq!(back.len(), rec.len());
        let again = serialize_recording(&back);
        prop_assert_eq!(&again, &text);
        prop_assert_eq!(parse_recording(again.lines()).unwrap(), back);
    }

    #[test]
    fn parsed_values_are_nine_digit_roundings(rec in recording()) {
        let back = parse_recording(serialize_recording(&rec).lines()).unwrap();
        for (a, b) in rec.frames().iter().zip(back.frames()) {
            for (x, y) in a.raw().iter().zip(b.raw()) {
                prop_assert!((x - y).abs() <= 1e-8 * x.abs().max(1e-9) + 2e-9);
            }
            prop_assert_eq!(format_real(a.t), format_real(b.t));
        }
    }
}

#[test]
fn format_keeps_nine_significant_digits() {
    assert_eq!(format_real(0.1), "0.1");
    assert_eq!(format_real(1.0 / 3.0), "0.333333333");
    assert_eq!(format_real(-123456.789012), "-123456.789");
    assert_eq!(format_real(2.0), "2");
}
