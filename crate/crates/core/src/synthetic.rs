//! Deterministic synthetic driving scenes.
//!
//! Scenes are simulated in the reference convention (world frame, kinematic
//! agents, a camera rig per source) and then rotated back into the source's
//! native convention, so the calibration stage has real work to do. The
//! ground-truth scene-level labels are returned alongside for table-driven
//! classifier stubs.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calibration::{alpha_for_source, calibrate_auto, rotate_scene};
use crate::camera::{camera_depth, camera_order, front_camera};
use crate::geometry::{normalize_angle, yaw_rotation, Pose};
use crate::metadata::{
    complete_metadata, MetadataClients, TableMapLabelClient, TableSimilarityClient,
};
use crate::schema::{
    Attributed, CameraCalibration, Category, EgoType, Frame, FrameConvention, ObjectAnnotation,
    Projection, Provenance, Scene, SceneMetadata, SceneType, Source, TimeOfDay, Weather,
    FORMAT_VERSION,
};

/// Image size used for every synthetic camera.
pub const IMAGE_SIZE: [u32; 2] = [800, 450];

/// Which scene-level labels each source ships natively (weather, time of day, scene type).
pub fn native_availability(source: Source) -> [bool; 3] {
    match source {
        Source::Nuscenes => [false, true, false],
        Source::Av2 => [false, false, false],
        Source::Once => [true, true, false],
        Source::Truckscenes => [true, true, false],
        Source::Waymo => [true, true, false],
    }
}

/// Hidden labels a synthetic scene was generated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticTruth {
    pub weather: Weather,
    pub time_of_day: TimeOfDay,
    pub scene_type: SceneType,
}

#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub scene_id: String,
    pub source: Source,
    pub seed: u64,
    pub n_frames: usize,
    pub dt: f64,
    pub n_agents: usize,
    pub truth: SyntheticTruth,
    pub with_native_velocity: bool,
}

impl SceneSpec {
    pub fn new(scene_id: impl Into<String>, source: Source, seed: u64) -> Self {
        SceneSpec {
            scene_id: scene_id.into(),
            source,
            seed,
            n_frames: 20,
            dt: 0.5,
            n_agents: 18,
            truth: SyntheticTruth {
                weather: Weather::Clear,
                time_of_day: TimeOfDay::Daytime,
                scene_type: SceneType::StraightRoad,
            },
            with_native_velocity: source == Source::Nuscenes,
        }
    }

    pub fn frames(mut self, n: usize) -> Self {
        self.n_frames = n;
        self
    }

    pub fn agents(mut self, n: usize) -> Self {
        self.n_agents = n;
        self
    }

    pub fn truth(mut self, truth: SyntheticTruth) -> Self {
        self.truth = truth;
        self
    }
}

#[derive(Debug, Clone, Copy)]
enum Behaviour {
    Cruise,
    Accelerate(f64),
    Turn { start: usize, rate: f64 },
    LaneChange { start: usize, rate: f64 },
}

#[derive(Debug, Clone)]
struct Agent {
    category: Category,
    size: [f64; 3],
    x: f64,
    y: f64,
    heading: f64,
    speed: f64,
    behaviour: Behaviour,
    alive: (usize, usize),
    base_visibility: f64,
    occlusion: Option<(usize, usize)>,
}

fn category_size(category: Category, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let j = |rng: &mut ChaCha8Rng, v: f64| v * rng.random_range(0.9..1.1);
    match category {
        Category::Car => [j(rng, 4.5), j(rng, 1.9), j(rng, 1.6)],
        Category::Truck => [j(rng, 9.0), j(rng, 2.6), j(rng, 3.4)],
        Category::Pedestrian => [j(rng, 0.7), j(rng, 0.7), j(rng, 1.75)],
        Category::Cyclist => [j(rng, 1.8), j(rng, 0.7), j(rng, 1.7)],
        Category::TrafficCone => [j(rng, 0.4), j(rng, 0.4), j(rng, 0.8)],
        Category::Barrier => [j(rng, 2.0), j(rng, 0.5), j(rng, 1.0)],
        Category::Other => [j(rng, 1.5), j(rng, 1.5), j(rng, 1.5)],
    }
}

/// Builds the camera rig for a source in the reference convention.
fn rig(source: Source) -> Vec<CameraCalibration> {
    let ego_from_camera_storage = matches!(source, Source::Waymo | Source::Av2);
    camera_order(source)
        .iter()
        .map(|slot| {
            let yaw = slot.mount_yaw_deg.to_radians();
            let fx = f64::from(IMAGE_SIZE[0]) / 2.0 / (slot.hfov_deg.to_radians() / 2.0).tan();
            let forward = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
            let right = Vector3::new(yaw.sin(), -yaw.cos(), 0.0);
            let down = Vector3::new(0.0, 0.0, -1.0);
            let mount = Vector3::new(1.0 * yaw.cos(), 0.5 * yaw.sin(), 1.6);
            let rot = Matrix3::from_columns(&[right, down, forward]);
            let mut ego_from_cam = Matrix4::identity();
            ego_from_cam.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
            ego_from_cam.fixed_view_mut::<3, 1>(0, 3).copy_from(&mount);
            let ego_from_cam = Pose(ego_from_cam);
            let (extrinsic, frame_convention) = if ego_from_camera_storage {
                (ego_from_cam, FrameConvention::EgoFromCamera)
            } else {
                (ego_from_cam.inverse(), FrameConvention::CameraFromEgo)
            };
            CameraCalibration {
                camera_name: slot.name.to_string(),
                intrinsics: [
                    [fx, 0.0, f64::from(IMAGE_SIZE[0]) / 2.0],
                    [0.0, fx, f64::from(IMAGE_SIZE[1]) / 2.0],
                    [0.0, 0.0, 1.0],
                ],
                extrinsic,
                frame_convention,
                image_size: IMAGE_SIZE,
            }
        })
        .collect()
}

fn box_corners(center: &Vector3<f64>, size: [f64; 3], yaw: f64) -> Vec<Vector3<f64>> {
    let r = yaw_rotation(yaw);
    let mut out = Vec::with_capacity(8);
    for sx in [-0.5, 0.5] {
        for sy in [-0.5, 0.5] {
            for sz in [-0.5, 0.5] {
                out.push(center + r * Vector3::new(sx * size[0], sy * size[1], sz * size[2]));
            }
        }
    }
    out
}

/// Projects a box into a camera; `None` when nothing lands in the image.
///
/// The visibility fraction is the clipped share of the unclipped 2D box.
pub fn box_projection(
    center: &Vector3<f64>,
    size: [f64; 3],
    yaw: f64,
    calib: &CameraCalibration,
) -> Option<([f64; 4], f64)> {
    if camera_depth(center, calib) <= 0.3 {
        return None;
    }
    let k = calib.intrinsics_matrix();
    let cfe = calib.camera_from_ego();
    let mut bb = [
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    ];
    for corner in box_corners(center, size, yaw) {
        let p = cfe.transform_point(&corner);
        let z = p.z.max(0.3);
        let uvw = k * Vector3::new(p.x, p.y, z);
        let (u, v) = (uvw.x / uvw.z, uvw.y / uvw.z);
        bb = [bb[0].min(u), bb[1].min(v), bb[2].max(u), bb[3].max(v)];
    }
    let [w, h] = calib.image_size;
    let full = (bb[2] - bb[0]) * (bb[3] - bb[1]);
    let clipped = [
        bb[0].max(0.0),
        bb[1].max(0.0),
        bb[2].min(f64::from(w)),
        bb[3].min(f64::from(h)),
    ];
    if clipped[2] <= clipped[0] || clipped[3] <= clipped[1] || full <= 0.0 {
        return None;
    }
    let area = (clipped[2] - clipped[0]) * (clipped[3] - clipped[1]);
    Some((clipped, (area / full).clamp(0.0, 1.0)))
}

pub struct SyntheticScene;

impl SyntheticScene {
    /// Simulates a scene and returns it in its source-native (uncalibrated) convention.
    pub fn build(spec: &SceneSpec) -> Scene {
        Self::build_with_truth(spec).0
    }

    pub fn build_with_truth(spec: &SceneSpec) -> (Scene, SyntheticTruth) {
        let reference = Self::build_reference(spec);
        let mut native = rotate_scene(&reference, -alpha_for_source(spec.source));
        native.calibrated = false;
        (native, spec.truth)
    }

    /// Simulates a scene directly in the reference convention, flagged calibrated.
    pub fn build_reference(spec: &SceneSpec) -> Scene {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let cameras = rig(spec.source);
        let ego_speed = if rng.random_bool(0.2) {
            0.0
        } else {
            rng.random_range(3.0..11.0)
        };
        let ego_yaw_rate = match rng.random_range(0..10) {
            0..=4 => 0.0,
            5..=7 => rng.random_range(-0.12..0.12),
            _ => rng.random_range(-0.5..0.5),
        };
        let ego_heading0 = rng.random_range(-PI..PI);
        let with_tracks = spec.source != Source::Once;

        let mut agents: Vec<Agent> = (0..spec.n_agents)
            .map(|i| Self::spawn_agent(i, spec, ego_speed, &mut rng))
            .collect();

        let lanes = Self::lanes(spec.truth.scene_type, ego_heading0);
        let mut frames = Vec::with_capacity(spec.n_frames);
        let (mut ex, mut ey, mut eh) = (0.0f64, 0.0f64, ego_heading0);
        for t in 0..spec.n_frames {
            let ego_pose = Pose::from_yaw_translation(eh, Vector3::new(ex, ey, 0.0));
            let ego_from_world = ego_pose.inverse();
            let mut objects = Vec::new();
            for (ai, agent) in agents.iter().enumerate() {
                if t < agent.alive.0 || t >= agent.alive.1 {
                    continue;
                }
                let world = Vector3::new(agent.x, agent.y, agent.size[2] / 2.0);
                let center = ego_from_world.transform_point(&world);
                if center.xy().norm() > 70.0 {
                    continue;
                }
                let yaw = normalize_angle(agent.heading - eh);
                let occluded = agent.occlusion.is_some_and(|(a, b)| t >= a && t < b);
                let vis_scale = if occluded {
                    0.35
                } else {
                    agent.base_visibility
                };
                let projections = cameras
                    .iter()
                    .filter_map(|cam| {
                        box_projection(&center, agent.size, yaw, cam).map(|(bbox, frac)| {
                            Projection {
                                camera_name: cam.camera_name.clone(),
                                bbox,
                                visibility: round6(frac * vis_scale),
                            }
                        })
                    })
                    .collect();
                let world_v =
                    Vector3::new(agent.heading.cos(), agent.heading.sin(), 0.0) * agent.speed;
                let velocity = spec
                    .with_native_velocity
                    .then(|| ego_from_world.transform_vector(&world_v).into());
                objects.push(ObjectAnnotation {
                    track_id: with_tracks.then(|| format!("trk-{ai:03}")),
                    category: agent.category,
                    center: center.into(),
                    size: agent.size,
                    yaw,
                    velocity,
                    projections,
                });
            }
            let image_refs = cameras
                .iter()
                .map(|c| {
                    (
                        c.camera_name.clone(),
                        format!("placeholder://{}/{t}/{}", spec.scene_id, c.camera_name),
                    )
                })
                .collect::<BTreeMap<_, _>>();
            frames.push(Frame {
                frame_index: t as u32,
                timestamp: 1_000.0 + t as f64 * spec.dt,
                ego_pose,
                cameras: cameras.clone(),
                objects,
                image_refs: Some(image_refs),
            });
            for agent in &mut agents {
                Self::step(agent, t, spec.dt);
            }
            eh = normalize_angle(eh + ego_yaw_rate * spec.dt);
            ex += ego_speed * spec.dt * eh.cos();
            ey += ego_speed * spec.dt * eh.sin();
        }

        let avail = native_availability(spec.source);
        let truth = spec.truth;
        Scene {
            format_version: FORMAT_VERSION.to_string(),
            scene_id: spec.scene_id.clone(),
            calibrated: true,
            metadata: SceneMetadata {
                source: spec.source,
                ego_type: if spec.source == Source::Truckscenes {
                    EgoType::Truck
                } else {
                    EgoType::Car
                },
                weather: avail[0].then(|| Attributed::new(truth.weather, Provenance::SourceNative)),
                time_of_day: avail[1]
                    .then(|| Attributed::new(truth.time_of_day, Provenance::SourceNative)),
                scene_type: avail[2]
                    .then(|| Attributed::new(truth.scene_type, Provenance::SourceNative)),
            },
            lanes,
            frames,
        }
    }

    fn spawn_agent(i: usize, spec: &SceneSpec, ego_speed: f64, rng: &mut ChaCha8Rng) -> Agent {
        // Road-aligned placement relative to the initial ego pose.
        let n = spec.n_frames;
        let role = i % 9;
        let (category, along, lateral, rel_heading, speed) = match role {
            // same-direction traffic in the ego lane and its neighbours
            0 | 1 => (
                Category::Car,
                rng.random_range(-30.0..40.0),
                [0.0, 3.5, -3.5][rng.random_range(0..3)] + rng.random_range(-0.3..0.3),
                rng.random_range(-0.05..0.05),
                (ego_speed + rng.random_range(-2.0..3.0)).max(0.0),
            ),
            // opposite-direction traffic
            2 => (
                if rng.random_bool(0.3) {
                    Category::Truck
                } else {
                    Category::Car
                },
                rng.random_range(-10.0..50.0),
                [7.0, 10.5][rng.random_range(0..2)],
                PI + rng.random_range(-0.05..0.05),
                rng.random_range(4.0..12.0),
            ),
            // cross traffic
            3 => (
                Category::Car,
                rng.random_range(15.0..35.0),
                rng.random_range(-25.0..25.0),
                if rng.random_bool(0.5) {
                    PI / 2.0
                } else {
                    -PI / 2.0
                },
                rng.random_range(2.0..9.0),
            ),
            // parked vehicles along the curb
            4 => (
                if rng.random_bool(0.2) {
                    Category::Truck
                } else {
                    Category::Car
                },
                rng.random_range(-35.0..45.0),
                -7.5 + rng.random_range(-0.3..0.3),
                rng.random_range(-0.1..0.1),
                0.0,
            ),
            // pedestrians and cyclists on the sides
            5 => (
                if rng.random_bool(0.6) {
                    Category::Pedestrian
                } else {
                    Category::Cyclist
                },
                rng.random_range(-25.0..35.0),
                if rng.random_bool(0.5) { 12.0 } else { -11.0 } + rng.random_range(-1.0..1.0),
                if rng.random_bool(0.5) { 0.0 } else { PI },
                rng.random_range(0.0..4.0),
            ),
            // static furniture
            6 => (
                if rng.random_bool(0.5) {
                    Category::TrafficCone
                } else {
                    Category::Barrier
                },
                rng.random_range(-20.0..30.0),
                -5.5 + rng.random_range(-1.0..1.0),
                rng.random_range(-PI..PI),
                0.0,
            ),
            // lateral traffic far out, mixed categories
            7 => (
                [Category::Car, Category::Other, Category::Truck][rng.random_range(0..3)],
                rng.random_range(-40.0..40.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(-PI..PI),
                rng.random_range(0.0..6.0),
            ),
            // vehicles spread around the ego
            _ => {
                let bearing = rng.random_range(-PI..PI);
                let range = rng.random_range(8.0..35.0);
                (
                    Category::Car,
                    range * bearing.cos(),
                    range * bearing.sin(),
                    [0.0, PI][rng.random_range(0..2)],
                    rng.random_range(0.0..8.0),
                )
            }
        };
        let behaviour = if speed < 0.5 || category.is_static() {
            Behaviour::Cruise
        } else {
            match rng.random_range(0..8) {
                0 | 1 => Behaviour::Accelerate(if rng.random_bool(0.5) { 1.6 } else { -1.4 }),
                2 => Behaviour::Turn {
                    start: rng.random_range(0..n.max(2) - 1),
                    rate: if rng.random_bool(0.5) { 0.6 } else { -0.6 },
                },
                3 if matches!(category, Category::Car | Category::Truck) => Behaviour::LaneChange {
                    start: rng.random_range(1..n.max(3) - 1),
                    rate: if rng.random_bool(0.5) { 3.0 } else { -3.0 },
                },
                _ => Behaviour::Cruise,
            }
        };
        let alive = if rng.random_bool(0.25) {
            let start = rng.random_range(0..n / 2 + 1);
            let end = rng.random_range((start + 2).min(n)..=n);
            (start, end.max(start + 1))
        } else {
            (0, n)
        };
        let occlusion = rng.random_bool(0.2).then(|| {
            let a = rng.random_range(0..n);
            (a, (a + rng.random_range(2..8)).min(n))
        });
        Agent {
            category,
            size: category_size(category, rng),
            x: along,
            y: lateral,
            heading: rel_heading,
            speed,
            behaviour,
            alive,
            base_visibility: rng.random_range(0.7..1.0),
            occlusion,
        }
    }

    fn step(agent: &mut Agent, t: usize, dt: f64) {
        match agent.behaviour {
            Behaviour::Cruise => {}
            Behaviour::Accelerate(a) => agent.speed = (agent.speed + a * dt).max(0.0),
            Behaviour::Turn { start, rate } => {
                if t >= start && t < start + 5 {
                    agent.heading = normalize_angle(agent.heading + rate * dt);
                }
            }
            Behaviour::LaneChange { start, rate } => {
                if t >= start && t < start + 2 {
                    let left = agent.heading + PI / 2.0;
                    agent.x += rate * dt * left.cos();
                    agent.y += rate * dt * left.sin();
                }
            }
        }
        agent.x += agent.speed * dt * agent.heading.cos();
        agent.y += agent.speed * dt * agent.heading.sin();
    }

    fn lanes(scene_type: SceneType, heading: f64) -> Vec<Vec<[f64; 2]>> {
        let dir = [heading.cos(), heading.sin()];
        let perp = [-heading.sin(), heading.cos()];
        let line = |lat: f64, from: f64, to: f64, d: [f64; 2], p: [f64; 2], origin: [f64; 2]| {
            (0..=20)
                .map(|k| {
                    let s = from + (to - from) * k as f64 / 20.0;
                    [
                        origin[0] + d[0] * s + p[0] * lat,
                        origin[1] + d[1] * s + p[1] * lat,
                    ]
                })
                .collect::<Vec<_>>()
        };
        let mut out: Vec<Vec<[f64; 2]>> = [-5.25, -1.75, 1.75, 5.25, 8.75, 12.25]
            .iter()
            .map(|&lat| line(lat, -60.0, 120.0, dir, perp, [0.0, 0.0]))
            .collect();
        if matches!(
            scene_type,
            SceneType::CrossIntersection
                | SceneType::TIntersection
                | SceneType::YIntersection
                | SceneType::SkewedIntersection
                | SceneType::MultiLegIntersection
        ) {
            let skew = if scene_type == SceneType::SkewedIntersection {
                0.4
            } else {
                0.0
            };
            let h2 = heading + PI / 2.0 + skew;
            let d2 = [h2.cos(), h2.sin()];
            let p2 = [-h2.sin(), h2.cos()];
            let origin = [dir[0] * 25.0, dir[1] * 25.0];
            let from = if scene_type == SceneType::TIntersection {
                0.0
            } else {
                -60.0
            };
            for lat in [-5.25, -1.75, 1.75, 5.25] {
                out.push(line(lat, from, 60.0, d2, p2, origin));
            }
        }
        out
    }
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// The shipped fixture pool: five scenes per source, one scene type per source.
pub fn fixture_pool(seed: u64) -> Vec<(Scene, SyntheticTruth)> {
    let plan: [(Source, SceneType, Weather, TimeOfDay); 5] = [
        (
            Source::Nuscenes,
            SceneType::CrossIntersection,
            Weather::Rain,
            TimeOfDay::Daytime,
        ),
        (
            Source::Waymo,
            SceneType::StraightRoad,
            Weather::Sunny,
            TimeOfDay::Daytime,
        ),
        (
            Source::Av2,
            SceneType::TIntersection,
            Weather::Cloudy,
            TimeOfDay::Nighttime,
        ),
        (
            Source::Truckscenes,
            SceneType::StraightRoad,
            Weather::Snow,
            TimeOfDay::Twilight,
        ),
        (
            Source::Once,
            SceneType::SCurveRoad,
            Weather::Overcast,
            TimeOfDay::Daytime,
        ),
    ];
    let mut out = Vec::new();
    for (si, (source, scene_type, weather, time_of_day)) in plan.into_iter().enumerate() {
        for k in 0..5u64 {
            let id = format!("{}-{:02}", source.as_str(), k);
            let spec = SceneSpec::new(
                id,
                source,
                seed.wrapping_mul(1000).wrapping_add(si as u64 * 100 + k),
            )
            .truth(SyntheticTruth {
                weather,
                time_of_day,
                scene_type,
            });
            out.push(SyntheticScene::build_with_truth(&spec));
        }
    }
    out
}

/// Placeholder BEV reference handed to the map-label client for a scene.
pub fn bev_ref(scene_id: &str) -> String {
    format!("bev://{scene_id}")
}

/// Classifier stubs that answer with the pool's ground-truth labels.
pub fn truth_clients(
    pool: &[(Scene, SyntheticTruth)],
) -> (TableSimilarityClient, TableMapLabelClient) {
    let mut sim = TableSimilarityClient::default();
    let mut map = TableMapLabelClient::default();
    for (scene, truth) in pool {
        let cam = front_camera(scene.source());
        if let Some(image) = scene.frames.first().and_then(|f| f.image_ref(cam)) {
            sim.insert(image, &[truth.weather.as_str(), truth.time_of_day.as_str()]);
        }
        map.labels.insert(
            bev_ref(&scene.scene_id),
            truth.scene_type.as_str().to_string(),
        );
    }
    (sim, map)
}

/// The fixture pool calibrated and with scene-level labels completed from ground truth.
pub fn prepared_pool(seed: u64) -> Vec<Scene> {
    let pool = fixture_pool(seed);
    let (sim, map) = truth_clients(&pool);
    let clients = MetadataClients {
        similarity: &sim,
        map_label: &map,
    };
    pool.iter()
        .map(|(scene, _)| {
            let calibrated = calibrate_auto(scene).expect("fixture scenes are uncalibrated");
            complete_metadata(&calibrated, &clients, Some(&bev_ref(&scene.scene_id))).scene
        })
        .collect()
}

/// A calibrated, camera-less scene from explicit ego poses `(yaw, [x, y])`
/// and per-frame objects, 0.5 s apart.
pub fn manual_scene(poses: &[(f64, [f64; 2])], frames: &[Vec<ObjectAnnotation>]) -> Scene {
    Scene {
        format_version: FORMAT_VERSION.to_string(),
        scene_id: "manual".into(),
        calibrated: true,
        metadata: SceneMetadata {
            source: Source::Nuscenes,
            ego_type: EgoType::Car,
            weather: None,
            time_of_day: None,
            scene_type: None,
        },
        lanes: Vec::new(),
        frames: poses
            .iter()
            .zip(frames)
            .enumerate()
            .map(|(t, ((yaw, xy), objects))| Frame {
                frame_index: t as u32,
                timestamp: t as f64 * 0.5,
                ego_pose: Pose::from_yaw_translation(*yaw, Vector3::new(xy[0], xy[1], 0.0)),
                cameras: Vec::new(),
                objects: objects.clone(),
                image_refs: None,
            })
            .collect(),
    }
}

/// A car-sized object without native velocity or projections.
pub fn car(track: &str, xy: [f64; 2], yaw: f64) -> ObjectAnnotation {
    ObjectAnnotation {
        track_id: Some(track.to_string()),
        category: Category::Car,
        center: [xy[0], xy[1], 0.8],
        size: [4.5, 1.9, 1.6],
        yaw,
        velocity: None,
        projections: Vec::new(),
    }
}
