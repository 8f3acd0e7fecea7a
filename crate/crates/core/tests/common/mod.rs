//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

pub mod criteria;
pub mod interaction_table;
pub mod reevaluate;

use std::collections::BTreeSet;
use std::sync::OnceLock;

use nalgebra::{Matrix3, Matrix4, Rotation2, Vector2, Vector3, Vector4};
use sceneqa::camera::camera_order;
use sceneqa::geometry::Pose;
use sceneqa::graph::{build_graph, Relation, SceneGraph, ThresholdSet};
use sceneqa::schema::{CameraCalibration, FrameConvention, ObjectAnnotation, Scene, Source};
use sceneqa::synthetic::prepared_pool;

pub const POOL_SEED: u64 = 7;

pub fn pool() -> &'static [Scene] {
    static POOL: OnceLock<Vec<Scene>> = OnceLock::new();
    POOL.get_or_init(|| prepared_pool(POOL_SEED))
}

pub fn graphs() -> &'static [SceneGraph] {
    static GRAPHS: OnceLock<Vec<SceneGraph>> = OnceLock::new();
    GRAPHS.get_or_init(|| {
        pool()
            .iter()
            .map(|s| build_graph(s, &ThresholdSet::default()).expect("fixture graphs build"))
            .collect()
    })
}

pub fn scene_by_id<'a>(scenes: &'a [Scene], id: &str) -> usize {
    scenes
        .iter()
        .position(|s| s.scene_id == id)
        .unwrap_or_else(|| panic!("unknown scene {id}"))
}

pub fn vec3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

pub fn pose_matrix(p: &Pose) -> Matrix4<f64> {
    let r = p.rows();
    Matrix4::from_fn(|i, j| r[i][j])
}

pub fn apply(m: &Matrix4<f64>, p: &Vector3<f64>) -> Vector3<f64> {
    let h = m * Vector4::new(p.x, p.y, p.z, 1.0);
    Vector3::new(h.x, h.y, h.z)
}

/// Inverse of a rigid transform via Rᵀ and −Rᵀt.
pub fn rigid_inverse(m: &Matrix4<f64>) -> Matrix4<f64> {
    let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
    let t: Vector3<f64> = m.fixed_view::<3, 1>(0, 3).into_owned();
    let rt = r.transpose();
    let mut out = Matrix4::identity();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
    out.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-rt * t));
    out
}

/// Brute-force frustum test: positive depth and inside the image rectangle.
pub fn pinhole(point: &Vector3<f64>, cal: &CameraCalibration) -> Option<[f64; 2]> {
    let stored = pose_matrix(&cal.extrinsic);
    let cam_from_ego = match cal.frame_convention {
        FrameConvention::CameraFromEgo => stored,
        FrameConvention::EgoFromCamera => rigid_inverse(&stored),
    };
    let pc = apply(&cam_from_ego, point);
    if pc.z <= 0.0 {
        return None;
    }
    let k = cal.intrinsics;
    let u = (k[0][0] * pc.x + k[0][1] * pc.y + k[0][2] * pc.z) / pc.z;
    let v = (k[1][0] * pc.x + k[1][1] * pc.y + k[1][2] * pc.z) / pc.z;
    let inside = (0.0..f64::from(cal.image_size[0])).contains(&u)
        && (0.0..f64::from(cal.image_size[1])).contains(&v);
    inside.then_some([u, v])
}

/// Cameras whose image contains `point`, in the source's clockwise order.
pub fn cameras_containing(scene: &Scene, frame: usize, point: &Vector3<f64>) -> Vec<String> {
    let f = &scene.frames[frame];
    camera_order(scene.source())
        .iter()
        .filter(|slot| {
            f.camera(slot.name)
                .is_some_and(|c| pinhole(point, c).is_some())
        })
        .map(|slot| slot.name.to_string())
        .collect()
}

/// Cameras listed in the projections with visibility at least `floor`, in clockwise order.
pub fn seen_by(scene: &Scene, obj: &ObjectAnnotation, floor: f64) -> Vec<String> {
    let names: BTreeSet<&str> = obj
        .projections
        .iter()
        .filter(|p| p.visibility >= floor)
        .map(|p| p.camera_name.as_str())
        .collect();
    camera_order(scene.source())
        .iter()
        .filter(|s| names.contains(s.name))
        .map(|s| s.name.to_string())
        .collect()
}

pub fn max_vis(obj: &ObjectAnnotation) -> f64 {
    obj.projections
        .iter()
        .map(|p| p.visibility)
        .fold(0.0, f64::max)
}

pub fn camera_by_description(source: Source, description: &str) -> Option<&'static str> {
    camera_order(source)
        .iter()
        .find(|s| s.description == description)
        .map(|s| s.name)
}

/// Relation oracle: rotate the offset into the source frame, band each axis, look the pair up.
pub fn oracle_relation(
    src: [f64; 3],
    yaw: f64,
    size: [f64; 3],
    dst: [f64; 3],
    floor: f64,
) -> Option<Relation> {
    let local = Rotation2::new(-yaw) * Vector2::new(dst[0] - src[0], dst[1] - src[1]);
    let (fwd, right) = (local.x, -local.y);
    let delta = f64::max(floor, 0.5 * (size[0] + size[1]) / 2.0);
    let band = |x: f64| -> Option<i8> {
        if x > delta {
            Some(1)
        } else if x < -delta {
            Some(-1)
        } else if x.abs() < delta {
            Some(0)
        } else {
            None
        }
    };
    let table = [
        ((1, 0), Relation::Ahead),
        ((-1, 0), Relation::Behind),
        ((0, -1), Relation::LeftOf),
        ((0, 1), Relation::RightOf),
        ((1, -1), Relation::AheadLeft),
        ((1, 1), Relation::AheadRight),
        ((-1, -1), Relation::RearLeft),
        ((-1, 1), Relation::RearRight),
    ];
    let key = (band(fwd)?, band(right)?);
    table.iter().find(|(k, _)| *k == key).map(|(_, r)| *r)
}

/// Bearing of a relation's region centre, degrees counterclockwise from ahead.
pub fn relation_bearing(r: Relation) -> i32 {
    match r {
        Relation::Ahead => 0,
        Relation::AheadLeft => 45,
        Relation::LeftOf => 90,
        Relation::RearLeft => 135,
        Relation::Behind => 180,
        Relation::RearRight => -135,
        Relation::RightOf => -90,
        Relation::AheadRight => -45,
    }
}

pub fn relation_at_bearing(deg: i32) -> Relation {
    let d = deg.rem_euclid(360);
    Relation::ALL
        .into_iter()
        .find(|r| relation_bearing(*r).rem_euclid(360) == d)
        .expect("multiple of 45 degrees")
}

pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a % (2.0 * std::f64::consts::PI);
    if x > std::f64::consts::PI {
        x -= 2.0 * std::f64::consts::PI;
    } else if x < -std::f64::consts::PI {
        x += 2.0 * std::f64::consts::PI;
    }
    x
}
