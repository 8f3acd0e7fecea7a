//! Fills weather, time of day and scene type for the fixture pool from
//! table-backed classifier stubs and prints the result with its provenance.
//!
//! Run with `cargo run -p sceneqa --example complete_metadata`.

use sceneqa::calibration::calibrate_auto;
use sceneqa::metadata::{complete_metadata, MetadataClients};
use sceneqa::synthetic::{bev_ref, fixture_pool, truth_clients};

fn main() {
    let pool = fixture_pool(7);
    let (similarity, map_label) = truth_clients(&pool);
    let clients = MetadataClients {
        similarity: &similarity,
        map_label: &map_label,
    };
    for (scene, _) in &pool {
        let scene = calibrate_auto(scene).expect("fixture scenes are uncalibrated");
        let done = complete_metadata(&scene, &clients, Some(&bev_ref(&scene.scene_id)));
        let m = &done.scene.metadata;
        println!(
            "{:<16} {:<9} {:<8} {:<12} {:?}",
            scene.scene_id,
            m.weather.as_ref().map_or("-", |w| w.value.as_str()),
            m.time_of_day.as_ref().map_or("-", |t| t.value.as_str()),
            m.scene_type.as_ref().map_or("-", |s| s.value.as_str()),
            m.weather.as_ref().map(|w| w.provenance),
        );
        for e in &done.errors {
            println!("  unresolved: {e}");
        }
    }
}
