//! Rotation of source-native coordinates into the reference convention.
//!
//! Each source differs from the reference frame by a yaw offset `α`. Centers
//! and velocities are rotated by `R(α)`, headings shifted by `α`, and every
//! stored transform is updated so that it still maps the same physical
//! points: camera-from-ego extrinsics and world-from-ego poses become
//! `E·R4(α)⁻¹`, ego-from-camera extrinsics become `R4(α)·E`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;

use crate::error::CalibrationError;
use crate::geometry::{normalize_angle, yaw_rotation, yaw_rotation_h, Pose};
use crate::schema::{FrameConvention, Scene, Source};

/// Yaw offset between a source's native convention and the reference convention.
pub fn alpha_for_source(source: Source) -> f64 {
    match source {
        Source::Nuscenes => 0.0,
        Source::Av2 => FRAC_PI_2,
        Source::Waymo => FRAC_PI_2,
        Source::Once => PI,
        Source::Truckscenes => 3.0 * PI / 4.0,
    }
}

/// Rotates an uncalibrated scene by `alpha` and marks it calibrated.
pub fn calibrate_scene(scene: &Scene, alpha: f64) -> Result<Scene, CalibrationError> {
    if scene.calibrated {
        return Err(CalibrationError::AlreadyCalibrated(scene.scene_id.clone()));
    }
    let mut out = rotate_scene(scene, alpha);
    out.calibrated = true;
    Ok(out)
}

/// Calibrates with the offset implied by `metadata.source`.
pub fn calibrate_auto(scene: &Scene) -> Result<Scene, CalibrationError> {
    calibrate_scene(scene, alpha_for_source(scene.source()))
}

/// Applies the yaw change of basis without touching the `calibrated` flag.
///
/// `alpha == 0` returns an exact copy.
pub fn rotate_scene(scene: &Scene, alpha: f64) -> Scene {
    let mut out = scene.clone();
    if alpha == 0.0 {
        return out;
    }
    let r = yaw_rotation(alpha);
    let r4 = Pose(yaw_rotation_h(alpha));
    let r4_inv = r4.inverse();
    for frame in &mut out.frames {
        frame.ego_pose = frame.ego_pose.compose(&r4_inv);
        for cam in &mut frame.cameras {
            cam.extrinsic = match cam.frame_convention {
                FrameConvention::CameraFromEgo => cam.extrinsic.compose(&r4_inv),
                FrameConvention::EgoFromCamera => r4.compose(&cam.extrinsic),
            };
        }
        for obj in &mut frame.objects {
            obj.center = (r * Vector3::from(obj.center)).into();
            obj.yaw = normalize_angle(obj.yaw + alpha);
            if let Some(v) = obj.velocity {
                obj.velocity = Some((r * Vector3::from(v)).into());
            }
        }
    }
    out
}
