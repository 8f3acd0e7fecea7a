//! Pairwise spatial relations in the source object's local frame.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    Ahead,
    Behind,
    LeftOf,
    RightOf,
    AheadLeft,
    AheadRight,
    RearLeft,
    RearRight,
}

impl Relation {
    pub const ALL: [Relation; 8] = [
        Relation::Ahead,
        Relation::Behind,
        Relation::LeftOf,
        Relation::RightOf,
        Relation::AheadLeft,
        Relation::AheadRight,
        Relation::RearLeft,
        Relation::RearRight,
    ];

    /// Phrase used in question text, e.g. "ahead left of".
    pub fn phrase(self) -> &'static str {
        match self {
            Relation::Ahead => "ahead of",
            Relation::Behind => "behind",
            Relation::LeftOf => "left of",
            Relation::RightOf => "right of",
            Relation::AheadLeft => "ahead left of",
            Relation::AheadRight => "ahead right of",
            Relation::RearLeft => "rear left of",
            Relation::RearRight => "rear right of",
        }
    }

    /// Short direction word for answers ("ahead", "rear left", ...).
    pub fn direction(self) -> &'static str {
        match self {
            Relation::Ahead => "ahead",
            Relation::Behind => "behind",
            Relation::LeftOf => "left",
            Relation::RightOf => "right",
            Relation::AheadLeft => "ahead left",
            Relation::AheadRight => "ahead right",
            Relation::RearLeft => "rear left",
            Relation::RearRight => "rear right",
        }
    }

    /// The label seen after turning the viewer by `quarter_turns` × 90° to the left.
    pub fn rotate_viewer_left(self, quarter_turns: i32) -> Relation {
        // counterclockwise ring, starting ahead
        const RING: [Relation; 8] = [
            Relation::Ahead,
            Relation::AheadLeft,
            Relation::LeftOf,
            Relation::RearLeft,
            Relation::Behind,
            Relation::RearRight,
            Relation::RightOf,
            Relation::AheadRight,
        ];
        let i = RING.iter().position(|r| *r == self).unwrap() as i32;
        RING[(i - 2 * quarter_turns).rem_euclid(8) as usize]
    }
}

/// Forward, lateral (positive to the right) and vertical offsets of `dst`
/// in the frame of a source at `src` with heading `yaw`.
pub fn local_projection(src: &Vector3<f64>, yaw: f64, dst: &Vector3<f64>) -> (f64, f64, f64) {
    let d = dst - src;
    let (s, c) = yaw.sin_cos();
    (d.x * c + d.y * s, d.x * s - d.y * c, d.z)
}

/// Half the mean horizontal extent of the source box, floored.
pub fn adaptive_threshold(size: [f64; 3], floor: f64) -> f64 {
    floor.max((size[0] + size[1]) / 4.0)
}

/// Region rules over local coordinates; `None` on boundaries and in the dead zone.
pub fn relation_from_local(s: f64, u: f64, delta: f64) -> Option<Relation> {
    let ahead = s > delta;
    let behind = s < -delta;
    let left = u < -delta;
    let right = u > delta;
    let s_band = s.abs() < delta;
    let u_band = u.abs() < delta;
    match () {
        _ if ahead && u_band => Some(Relation::Ahead),
        _ if behind && u_band => Some(Relation::Behind),
        _ if left && s_band => Some(Relation::LeftOf),
        _ if right && s_band => Some(Relation::RightOf),
        _ if ahead && left => Some(Relation::AheadLeft),
        _ if ahead && right => Some(Relation::AheadRight),
        _ if behind && left => Some(Relation::RearLeft),
        _ if behind && right => Some(Relation::RearRight),
        _ => None,
    }
}

pub fn classify_relation(
    src_center: &Vector3<f64>,
    src_yaw: f64,
    src_size: [f64; 3],
    dst_center: &Vector3<f64>,
    floor: f64,
) -> Option<Relation> {
    let (s, u, _) = local_projection(src_center, src_yaw, dst_center);
    relation_from_local(s, u, adaptive_threshold(src_size, floor))
}
