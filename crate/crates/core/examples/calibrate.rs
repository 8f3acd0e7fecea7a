//! Rotates one synthetic scene per source into the common ego frame and
//! prints the rotation applied and where the first object ends up.
//!
//! Run with `cargo run -p sceneqa --example calibrate`.

use sceneqa::calibration::{alpha_for_source, calibrate_auto};
use sceneqa::schema::Source;
use sceneqa::synthetic::{SceneSpec, SyntheticScene};

fn main() {
    for (k, source) in Source::ALL.into_iter().enumerate() {
        let raw = SyntheticScene::build(&SceneSpec::new(format!("demo-{k}"), source, k as u64));
        let cal = calibrate_auto(&raw).expect("synthetic scenes start uncalibrated");
        let (before, after) = (&raw.frames[0].objects[0], &cal.frames[0].objects[0]);
        println!(
            "{:<11} alpha {:>+8.4}  center {:>+7.2} {:>+7.2} -> {:>+7.2} {:>+7.2}  yaw {:>+6.3} -> {:>+6.3}",
            source.as_str(),
            alpha_for_source(source),
            before.center[0],
            before.center[1],
            after.center[0],
            after.center[1],
            before.yaw,
            after.yaw
        );
    }
}
