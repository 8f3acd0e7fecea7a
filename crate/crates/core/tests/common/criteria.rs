//! One check per headline acceptance criterion; each panics on failure and returns a summary.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use nalgebra::Vector3;
use sceneqa::calibration::{alpha_for_source, calibrate_auto, rotate_scene};
use sceneqa::geometry::Pose;
use sceneqa::graph::{
    adaptive_threshold, build_graph, classify_interaction, classify_relation, estimate_velocity,
    Action, Interaction, Relation, ThresholdSet,
};
use sceneqa::qa::{Answer, QAItem, TaskId};
use sceneqa::schema::{ObjectAnnotation, Scene, Source};
use sceneqa::scoring::{
    ability_average, cohen_kappa, rescale_rmse_for_plot, KappaBand, PredictionRecord,
    COUNTING_TOLERANCE, DISTANCE_TOLERANCE,
};
use sceneqa::synthetic::{car, manual_scene, SceneSpec, SyntheticScene};

use super::interaction_table::{oracle_interaction, random_agent_pair};
use super::{apply, oracle_relation, pose_matrix, rigid_inverse, wrap_angle};

pub fn small_scene(source: Source, seed: u64) -> Scene {
    SyntheticScene::build(
        &SceneSpec::new(format!("s{seed}"), source, seed)
            .frames(2)
            .agents(6),
    )
}

/// Every number in the document with the key it sits under.
fn numbers(v: &Value, key: &str, out: &mut Vec<(String, f64)>) {
    match v {
        Value::Number(n) => out.push((key.to_string(), n.as_f64().unwrap())),
        Value::Array(a) => a.iter().for_each(|x| numbers(x, key, out)),
        Value::Object(m) => m.iter().for_each(|(k, x)| numbers(x, k, out)),
        _ => {}
    }
}

fn max_numeric_gap(a: &Scene, b: &Scene) -> f64 {
    let (mut na, mut nb) = (Vec::new(), Vec::new());
    numbers(&serde_json::to_value(a).unwrap(), "", &mut na);
    numbers(&serde_json::to_value(b).unwrap(), "", &mut nb);
    assert_eq!(na.len(), nb.len());
    na.iter()
        .zip(&nb)
        .map(|((k, x), (_, y))| {
            if k == "yaw" {
                wrap_angle(x - y).abs()
            } else {
                (x - y).abs()
            }
        })
        .fold(0.0, f64::max)
}

pub fn calibration_isometry() -> String {
    let sources = [
        Source::Nuscenes,
        Source::Av2,
        Source::Waymo,
        Source::Once,
        Source::Truckscenes,
    ];
    let expected = [
        0.0,
        std::f64::consts::FRAC_PI_2,
        std::f64::consts::FRAC_PI_2,
        std::f64::consts::PI,
        3.0 * std::f64::consts::FRAC_PI_4,
    ];
    let mut elapsed = Duration::ZERO;
    for (source, alpha) in sources.into_iter().zip(expected) {
        assert_eq!(alpha_for_source(source), alpha);
        for seed in 0..1000u64 {
            let scene = small_scene(source, seed);
            let start = Instant::now();
            let cal = calibrate_auto(&scene).unwrap();
            for (f0, f1) in scene.frames.iter().zip(&cal.frames) {
                for i in 0..f0.objects.len() {
                    assert_eq!(f0.objects[i].size, f1.objects[i].size);
                    for j in i + 1..f0.objects.len() {
                        let d0 = (f0.objects[i].center_vec() - f0.objects[j].center_vec()).norm();
                        let d1 = (f1.objects[i].center_vec() - f1.objects[j].center_vec()).norm();
                        assert!((d0 - d1).abs() < 1e-9, "{source} seed {seed}");
                    }
                }
            }
            let mut back = rotate_scene(&cal, -alpha);
            back.calibrated = false;
            assert!(
                max_numeric_gap(&back, &scene) < 1e-9,
                "{source} seed {seed}"
            );
            elapsed += start.elapsed();
        }
    }
    assert!(
        elapsed < Duration::from_secs(10),
        "calibration took {elapsed:?}"
    );
    format!(
        "{} sources x 1000 scenes, distances and round trip within 1e-9, {:.2} s",
        sources.len(),
        elapsed.as_secs_f64()
    )
}

pub fn random_trajectory(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, [f64; 2])> {
    let (mut x, mut y, mut yaw) = (
        rng.random_range(-100.0..100.0),
        rng.random_range(-100.0..100.0),
        rng.random_range(-PI..PI),
    );
    (0..n)
        .map(|_| {
            let pose = (yaw, [x, y]);
            let step = rng.random_range(0.0..8.0);
            yaw = sceneqa::geometry::normalize_angle(yaw + rng.random_range(-0.4..0.4));
            x += step * yaw.cos();
            y += step * yaw.sin();
            pose
        })
        .collect()
}

pub fn world_to_ego(pose: (f64, [f64; 2]), world: [f64; 3]) -> [f64; 3] {
    let m = pose_matrix(&Pose::from_yaw_translation(
        pose.0,
        Vector3::new(pose.1[0], pose.1[1], 0.0),
    ));
    apply(&rigid_inverse(&m), &Vector3::from(world)).into()
}

pub fn ego_compensation_zero() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for _ in 0..100 {
        let poses = random_trajectory(&mut rng, 8);
        let world: Vec<([f64; 3], f64)> = (0..6)
            .map(|_| {
                (
                    [
                        rng.random_range(-150.0..150.0),
                        rng.random_range(-150.0..150.0),
                        0.8,
                    ],
                    rng.random_range(-PI..PI),
                )
            })
            .collect();
        let frames: Vec<Vec<ObjectAnnotation>> = poses
            .iter()
            .map(|&p| {
                world
                    .iter()
                    .enumerate()
                    .map(|(k, (w, yaw))| {
                        let mut o = car(
                            &format!("t{k}"),
                            [0.0, 0.0],
                            sceneqa::geometry::normalize_angle(yaw - p.0),
                        );
                        o.center = world_to_ego(p, *w);
                        o
                    })
                    .collect()
            })
            .collect();
        let scene = manual_scene(&poses, &frames);
        for t in 1..poses.len() {
            for k in 0..world.len() {
                let v = estimate_velocity(&scene, t, &format!("t{k}")).unwrap();
                assert!(v.norm() < 1e-9, "{v:?}");
                checked += 1;
            }
        }
        let graph = build_graph(&scene, &ThresholdSet::default()).unwrap();
        for node in graph
            .nodes
            .iter()
            .filter(|n| !n.is_ego() && n.key.frame > 0)
        {
            assert!(node.speed() < 1e-9);
            assert_eq!(graph.actions(node.key), BTreeSet::from([Action::Stopped]));
        }
    }
    assert_eq!(checked, 100 * 7 * 6);
    format!("100 trajectories, {checked} velocity checks below 1e-9")
}

pub fn relation_oracle() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut seen: BTreeMap<Option<Relation>, usize> = BTreeMap::new();
    for _ in 0..10_000 {
        let src = [
            rng.random_range(-50.0..50.0),
            rng.random_range(-50.0..50.0),
            rng.random_range(-1.0..2.0),
        ];
        let yaw = rng.random_range(-PI..PI);
        let size = [rng.random_range(0.3..12.0), rng.random_range(0.3..4.0), 1.5];
        let floor = rng.random_range(0.2..2.0);
        let delta = adaptive_threshold(size, floor);
        let reach = if rng.random_bool(0.5) {
            3.0 * delta
        } else {
            60.0
        };
        let (r, a) = (rng.random_range(0.0..reach), rng.random_range(-PI..PI));
        let dst = [
            src[0] + r * a.cos(),
            src[1] + r * a.sin(),
            src[2] + rng.random_range(-2.0..2.0),
        ];
        let got = classify_relation(&Vector3::from(src), yaw, size, &Vector3::from(dst), floor);
        assert_eq!(
            got,
            oracle_relation(src, yaw, size, dst, floor),
            "src {src:?} yaw {yaw} size {size:?} dst {dst:?}"
        );
        *seen.entry(got).or_default() += 1;
    }
    assert_eq!(
        seen.len(),
        9,
        "every label and the dead zone exercised: {seen:?}"
    );
    "10000 triples, 100% agreement, 9 outcomes exercised".to_string()
}

pub fn interaction_table() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let th = ThresholdSet::default();
    let mut seen: BTreeMap<Option<Interaction>, usize> = BTreeMap::new();
    for n in 0..5000 {
        let (i, j, prev) = random_agent_pair(&mut rng);
        let got = classify_interaction(&i, &j, prev, &th).map(|c| (c.label, c.reciprocal_yield));
        assert_eq!(
            got,
            oracle_interaction(&i, &j, prev),
            "sample {n}: {i:?} {j:?} {prev:?}"
        );
        *seen.entry(got.map(|g| g.0)).or_default() += 1;
    }
    for label in Interaction::ALL
        .into_iter()
        .filter(|l| *l != Interaction::Yielding)
    {
        assert!(
            seen.get(&Some(label)).copied().unwrap_or(0) >= 20,
            "{label:?} rarely exercised: {seen:?}"
        );
    }
    format!(
        "5000 configurations, 100% agreement, {} outcomes exercised",
        seen.len()
    )
}

/// Published leaderboard rows: Avg, Const acc, Unders acc, Unders RMSE, Reas acc.
pub const LEADERBOARD: [(&str, f64, f64, f64, Option<f64>, f64); 18] = [
    ("Random", 26.33, 25.37, 28.24, None, 25.39),
    ("Frequency", 32.45, 32.94, 33.89, None, 30.51),
    ("Human", 83.39, 86.20, 85.62, Some(10.62), 88.96),
    ("GPT-4o", 51.37, 48.22, 59.84, Some(12.71), 58.76),
    ("GPT-5", 54.98, 55.20, 62.45, Some(10.41), 57.69),
    ("Gemini-2 Pro", 47.26, 44.09, 58.51, Some(13.20), 52.38),
    (
        "LLaVA-Onevision-7B",
        28.65,
        33.73,
        27.64,
        Some(15.76),
        40.34,
    ),
    (
        "DeepSeek-VL2-Small",
        24.88,
        23.92,
        26.60,
        Some(15.15),
        39.26,
    ),
    ("Gemma-3-12B-it", 35.25, 35.55, 44.05, Some(14.65), 40.80),
    ("InternVL-3.5 8B", 36.73, 39.00, 44.15, Some(14.26), 41.31),
    ("InternVL-3 8B", 24.20, 30.63, 27.26, Some(15.95), 30.65),
    ("Qwen3-VL 8B", 42.24, 42.76, 50.62, Some(14.32), 47.66),
    ("LongVA-7B", 25.91, 26.84, 35.90, Some(20.26), 35.25),
    ("LLaVA-Video-7B", 25.24, 26.94, 27.57, Some(15.68), 36.89),
    ("RoboTron-Drive", 23.14, 24.31, 21.03, Some(15.49), 39.56),
    ("Ego3D", 26.48, 30.21, 30.67, Some(15.95), 34.53),
    ("SpaceThinker", 24.53, 27.16, 31.74, Some(16.96), 31.65),
    ("SenseNova-SI", 30.54, 37.91, 36.25, Some(15.25), 32.73),
];

pub fn item(id: &str, task: TaskId, scene: &str, n_options: usize, answer: Answer) -> QAItem {
    let options: Option<Vec<String>> =
        (n_options > 0).then(|| (0..n_options).map(|k| format!("option {k}")).collect());
    let ability = task.ability();
    serde_json::from_value(json!({
        "item_id": id, "task_id": task, "ability": ability, "scene_id": scene, "assets": [],
        "frames": [0], "question": "q <image>", "answer": answer, "options": options,
        "certificate": {"constraint": "none", "objects": []}, "seed": 0, "rng_seed": 0
    }))
    .unwrap()
}

pub fn pick(it: &QAItem, who: &str, k: usize) -> PredictionRecord {
    PredictionRecord::from_answer(it, who, Answer::Index(k))
}

/// Predictions for two responders reproducing a contingency table
/// (rows = responder a's choice, columns = responder b's).
pub fn from_table(
    table: &[Vec<usize>],
) -> (Vec<QAItem>, Vec<PredictionRecord>, Vec<PredictionRecord>) {
    let k = table.len();
    let (mut items, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
    for (i, row) in table.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            for _ in 0..n {
                let it = item(
                    &format!("q{}", items.len()),
                    TaskId::DepthAwareness,
                    "s",
                    k,
                    Answer::Index(0),
                );
                a.push(pick(&it, "a", i));
                b.push(pick(&it, "b", j));
                items.push(it);
            }
        }
    }
    (items, a, b)
}

pub fn metric_reproduction() -> String {
    let mut worst: f64 = 0.0;
    for (name, avg, c, u, r, reas) in LEADERBOARD {
        let got = ability_average(c, u, r, reas);
        assert!((got - avg).abs() <= 0.01, "{name}: {got:.4} vs {avg}");
        worst = worst.max((got - avg).abs());
    }
    assert_eq!(ability_average(0.0, 0.0, Some(0.0), 0.0), 0.0);

    assert_eq!(COUNTING_TOLERANCE, 10.0);
    assert_eq!(DISTANCE_TOLERANCE, 25.0);
    assert_eq!(rescale_rmse_for_plot(12.5, 25.0), 50.0);
    assert_eq!(rescale_rmse_for_plot(0.0, 25.0), 100.0);
    assert_eq!(rescale_rmse_for_plot(10.0, 10.0), 0.0);
    assert_eq!(rescale_rmse_for_plot(2.5, 10.0), 75.0);

    // p_o = 35/50, p_e = (25·30 + 25·20)/50² = 0.5
    let (_, a, b) = from_table(&[vec![20, 5], vec![10, 15]]);
    let k = cohen_kappa(&a, &b).unwrap();
    assert!((k.kappa - 0.4).abs() < 1e-9);
    assert_eq!(k.band, KappaBand::Fair);
    assert_eq!(k.shared, 50);

    // p_o = 0.79, p_e = (30·30 + 30·27 + 40·43)/100² = 0.343
    let (_, a, b) = from_table(&[vec![25, 2, 3], vec![4, 20, 6], vec![1, 5, 34]]);
    let k = cohen_kappa(&a, &b).unwrap();
    assert!((k.kappa - 447.0 / 657.0).abs() < 1e-9);
    assert_eq!(k.band, KappaBand::Substantial);

    // agreement below chance: p_o = 0.2, p_e = 0.5
    let (_, a, b) = from_table(&[vec![5, 20], vec![20, 5]]);
    assert!((cohen_kappa(&a, &b).unwrap().kappa - (-0.6)).abs() < 1e-9);

    format!(
        "{} leaderboard rows (max gap {worst:.4}), 3 kappa tables within 1e-9, tolerances 10/25",
        LEADERBOARD.len()
    )
}

pub fn generator_validity() -> String {
    let (items, report) = super::reevaluate::corpus();
    let scenes = super::pool().len();
    assert!(scenes >= 20, "{scenes} scenes");
    for task in TaskId::ALL {
        let n = items.iter().filter(|i| i.task_id == task).count();
        assert!(
            n >= super::reevaluate::PER_TASK,
            "{task}: {:?}",
            report.tasks[&task]
        );
    }
    let failures: Vec<String> = items
        .iter()
        .filter_map(|i| {
            super::reevaluate::evaluate(i)
                .err()
                .map(|e| format!("{}: {e}", i.item_id))
        })
        .collect();
    assert!(
        failures.is_empty(),
        "{} failures: {:?}",
        failures.len(),
        &failures[..failures.len().min(5)]
    );
    let rate = super::reevaluate::multiview_yes_rate();
    assert!((rate - 0.75).abs() <= 0.02, "yes rate {rate}");
    format!(
        "{scenes} scenes, {} items ({} per task) all re-evaluated, multiview yes rate {rate:.4}",
        items.len(),
        super::reevaluate::PER_TASK
    )
}
