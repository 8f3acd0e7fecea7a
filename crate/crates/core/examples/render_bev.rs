//! Renders a BEV map and a multi-view grid for one synthetic scene.
//!
//! Run with `cargo run -p sceneqa --example render_bev [out_dir]`.

use std::path::PathBuf;

use sceneqa::calibration::calibrate_auto;
use sceneqa::render::{
    render_bev, render_multiview, write_png, BevStyle, Highlight, MultiviewStyle,
};
use sceneqa::schema::{SceneType, Source, TimeOfDay, Weather};
use sceneqa::synthetic::{SceneSpec, SyntheticScene, SyntheticTruth};

fn main() -> std::io::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "target/render_bev".into()),
    );
    let spec = SceneSpec::new("demo", Source::Nuscenes, 3).truth(SyntheticTruth {
        weather: Weather::Clear,
        time_of_day: TimeOfDay::Daytime,
        scene_type: SceneType::CrossIntersection,
    });
    let scene = calibrate_auto(&SyntheticScene::build(&spec)).expect("fresh scene");
    let bev = BevStyle {
        highlight: vec![Highlight::new(0, "(1)"), Highlight::new(1, "(2)")],
        ..Default::default()
    };
    write_png(
        &render_bev(&scene, 0, &bev).expect("frame 0 exists"),
        &out.join("bev.png"),
    )?;
    let grid = render_multiview(&scene, 0, &bev.highlight, &MultiviewStyle::default())
        .expect("placeholder tiles");
    write_png(&grid, &out.join("multiview.png"))?;
    println!("wrote {}", out.display());
    Ok(())
}
