//! Rigid-transform helpers shared by calibration, graph construction and rendering.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Tolerance used when checking rotation blocks for orthonormality.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// Wraps an angle into `[-π, π]` via `atan2(sin, cos)`.
pub fn normalize_angle(theta: f64) -> f64 {
    theta.sin().atan2(theta.cos())
}

/// Rotation about +z by `alpha` radians.
pub fn yaw_rotation(alpha: f64) -> Matrix3<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Homogeneous embedding of [`yaw_rotation`].
pub fn yaw_rotation_h(alpha: f64) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&yaw_rotation(alpha));
    m
}

/// Yaw component of a rotation matrix, `atan2(R[1,0], R[0,0])`.
pub fn yaw_of(rotation: &Matrix3<f64>) -> f64 {
    rotation[(1, 0)].atan2(rotation[(0, 0)])
}

/// A 4×4 homogeneous rigid transform (meters).
///
/// The upper-left block is a proper rotation and the bottom row is exactly
/// `[0, 0, 0, 1]`; both are checked by [`Pose::validate`]. Serialized as a
/// row-major `[[f64; 4]; 4]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose(pub Matrix4<f64>);

impl Pose {
    pub fn identity() -> Self {
        Pose(Matrix4::identity())
    }

    pub fn from_yaw_translation(yaw: f64, translation: Vector3<f64>) -> Self {
        let mut m = yaw_rotation_h(yaw);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
        Pose(m)
    }

    pub fn from_rows(rows: [[f64; 4]; 4]) -> Self {
        Pose(Matrix4::from_fn(|r, c| rows[r][c]))
    }

    pub fn rows(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.0[(r, c)];
            }
        }
        out
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 3).into_owned()
    }

    /// Closed-form rigid inverse `[Rᵀ | -Rᵀt]`.
    pub fn inverse(&self) -> Pose {
        let rt = self.rotation().transpose();
        let t = -(rt * self.translation());
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        Pose(m)
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose(self.0 * other.0)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let h = self.0 * Vector4::new(p.x, p.y, p.z, 1.0);
        Vector3::new(h.x, h.y, h.z)
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * v
    }

    pub fn yaw(&self) -> f64 {
        yaw_of(&self.rotation())
    }

    /// Returns a description of the first violated invariant, if any.
    pub fn validate(&self) -> Result<(), String> {
        let m = &self.0;
        if m.iter().any(|v| !v.is_finite()) {
            return Err("non-finite entry".into());
        }
        if m[(3, 0)] != 0.0 || m[(3, 1)] != 0.0 || m[(3, 2)] != 0.0 || m[(3, 3)] != 1.0 {
            return Err("bottom row must be [0,0,0,1]".into());
        }
        let r = self.rotation();
        let gram = r.transpose() * r;
        if (gram - Matrix3::identity()).abs().max() > ROTATION_TOLERANCE {
            return Err("rotation block is not orthonormal".into());
        }
        if (r.determinant() - 1.0).abs() > ROTATION_TOLERANCE {
            return Err("rotation block determinant is not +1".into());
        }
        Ok(())
    }
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = <[[f64; 4]; 4]>::deserialize(d)?;
        Ok(Pose::from_rows(rows))
    }
}

/// Smallest absolute difference between two headings, in `[0, π]`.
pub fn heading_difference(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs().min(PI)
}
