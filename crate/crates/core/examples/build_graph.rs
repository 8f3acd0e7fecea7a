//! Builds scene graphs for the synthetic fixture pool and prints label counts.
//!
//! Run with `cargo run -p sceneqa --example build_graph [seed]`.

use std::collections::BTreeMap;

use sceneqa::calibration::calibrate_auto;
use sceneqa::graph::{build_graph, ThresholdSet};
use sceneqa::synthetic::fixture_pool;

fn main() {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(7);
    let th = ThresholdSet::default();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (scene, _) in fixture_pool(seed) {
        let scene = calibrate_auto(&scene).expect("fixture scenes are uncalibrated");
        let graph = build_graph(&scene, &th).expect("fixture scenes are valid");
        println!(
            "{:<16} nodes {:>4}  relations {:>5}  actions {:>4}  interactions {:>4}  temporal {:>4}",
            graph.scene_id,
            graph.nodes.len(),
            graph.relations.len(),
            graph.actions.len(),
            graph.interactions.len(),
            graph.temporal.len()
        );
        for e in graph.actions.iter().chain(&graph.interactions) {
            *counts
                .entry(format!("{}:{}", e.label.kind(), e.label.name()))
                .or_default() += 1;
        }
    }
    println!();
    for (label, n) in counts {
        println!("{label:<32} {n}");
    }
}
