//! Pinhole projection and the per-source camera layout tables.

use nalgebra::Vector3;

use crate::schema::{CameraCalibration, Source};

/// One camera position in a source's rig.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraSlot {
    pub name: &'static str,
    pub description: &'static str,
    /// Nominal mounting heading in degrees, counterclockwise from ego +x.
    pub mount_yaw_deg: f64,
    /// Nominal horizontal field of view in degrees.
    pub hfov_deg: f64,
}

const fn slot(name: &'static str, description: &'static str, yaw: f64, hfov: f64) -> CameraSlot {
    CameraSlot {
        name,
        description,
        mount_yaw_deg: yaw,
        hfov_deg: hfov,
    }
}

const NUSCENES: &[CameraSlot] = &[
    slot("CAM_FRONT", "Front", 0.0, 70.0),
    slot("CAM_FRONT_RIGHT", "Front Right", -55.0, 70.0),
    slot("CAM_BACK_RIGHT", "Back Right", -110.0, 70.0),
    slot("CAM_BACK", "Back", 180.0, 110.0),
    slot("CAM_BACK_LEFT", "Back Left", 110.0, 70.0),
    slot("CAM_FRONT_LEFT", "Front Left", 55.0, 70.0),
];

const WAYMO: &[CameraSlot] = &[
    slot("FRONT", "Front", 0.0, 50.0),
    slot("FRONT_RIGHT", "Front Right", -45.0, 50.0),
    slot("SIDE_RIGHT", "Side Right", -90.0, 50.0),
    slot("SIDE_LEFT", "Side Left", 90.0, 50.0),
    slot("FRONT_LEFT", "Front Left", 45.0, 50.0),
];

const AV2: &[CameraSlot] = &[
    slot("ring_front_center", "Front", 0.0, 50.0),
    slot("ring_front_right", "Front Right", -45.0, 50.0),
    slot("ring_side_right", "Side Right", -98.0, 50.0),
    slot("ring_rear_right", "Rear Right", -152.0, 50.0),
    slot("ring_rear_left", "Rear Left", 152.0, 50.0),
    slot("ring_side_left", "Side Left", 98.0, 50.0),
    slot("ring_front_left", "Front Left", 45.0, 50.0),
];

const TRUCKSCENES: &[CameraSlot] = &[
    slot("CAMERA_LEFT_FRONT", "Left Front", 15.0, 100.0),
    slot("CAMERA_RIGHT_FRONT", "Right Front", -15.0, 100.0),
    slot("CAMERA_RIGHT_BACK", "Right Back", -140.0, 100.0),
    slot("CAMERA_LEFT_BACK", "Left Back", 140.0, 100.0),
];

const ONCE: &[CameraSlot] = &[
    slot("cam03", "Front", 0.0, 60.0),
    slot("cam05", "Front Right", -60.0, 60.0),
    slot("cam06", "Back Right", -120.0, 60.0),
    slot("cam07", "Back", 180.0, 60.0),
    slot("cam08", "Back Left", 120.0, 60.0),
    slot("cam09", "Front Left", 60.0, 60.0),
];

/// Canonical clockwise camera order for a source, starting at the front camera.
pub fn camera_order(source: Source) -> &'static [CameraSlot] {
    match source {
        Source::Nuscenes => NUSCENES,
        Source::Waymo => WAYMO,
        Source::Av2 => AV2,
        Source::Truckscenes => TRUCKSCENES,
        Source::Once => ONCE,
    }
}

pub fn front_camera(source: Source) -> &'static str {
    camera_order(source)[0].name
}

pub fn camera_description(source: Source, name: &str) -> String {
    camera_order(source)
        .iter()
        .find(|s| s.name == name)
        .map(|s| s.description.to_string())
        .unwrap_or_else(|| name.to_string())
}

/// Cameras from `available` sorted into canonical clockwise order; unknown names trail in input order.
pub fn ordered_cameras(source: Source, available: &[String]) -> Vec<String> {
    let order = camera_order(source);
    let mut known: Vec<(usize, &String)> = Vec::new();
    let mut unknown = Vec::new();
    for name in available {
        match order.iter().position(|s| s.name == name) {
            Some(i) => known.push((i, name)),
            None => unknown.push(name.clone()),
        }
    }
    known.sort_by_key(|(i, _)| *i);
    known
        .into_iter()
        .map(|(_, n)| n.clone())
        .chain(unknown)
        .collect()
}

/// Projects an ego-frame point to pixels.
///
/// Returns `None` when the point is at or behind the image plane or lands
/// outside `[0, width) × [0, height)`.
pub fn project_to_camera(point: &Vector3<f64>, calib: &CameraCalibration) -> Option<[f64; 2]> {
    let p = calib.camera_from_ego().transform_point(point);
    if p.z <= 0.0 {
        return None;
    }
    let uvw = calib.intrinsics_matrix() * p;
    if uvw.z <= 0.0 {
        return None;
    }
    let (u, v) = (uvw.x / uvw.z, uvw.y / uvw.z);
    let [w, h] = calib.image_size;
    if u >= 0.0 && u < f64::from(w) && v >= 0.0 && v < f64::from(h) {
        Some([u, v])
    } else {
        None
    }
}

/// Camera-frame depth of an ego-frame point (positive in front of the camera).
pub fn camera_depth(point: &Vector3<f64>, calib: &CameraCalibration) -> f64 {
    calib.camera_from_ego().transform_point(point).z
}
