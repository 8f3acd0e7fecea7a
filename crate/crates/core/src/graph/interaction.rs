//! Directed pairwise interactions between moving agents.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::normalize_angle;
use crate::graph::ThresholdSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Interaction {
    Lead,
    Follow,
    Overtake,
    Passing,
    CoMoving,
    Approaching,
    Crossing,
    Yielding,
}

impl Interaction {
    pub const ALL: [Interaction; 8] = [
        Interaction::Lead,
        Interaction::Follow,
        Interaction::Overtake,
        Interaction::Passing,
        Interaction::CoMoving,
        Interaction::Approaching,
        Interaction::Crossing,
        Interaction::Yielding,
    ];

    /// Verb phrase: "Object-1 {phrase} Object-2".
    pub fn phrase(self) -> &'static str {
        match self {
            Interaction::Lead => "is leading",
            Interaction::Follow => "is following",
            Interaction::Overtake => "is overtaking",
            Interaction::Passing => "is passing",
            Interaction::CoMoving => "is co-moving with",
            Interaction::Approaching => "is approaching",
            Interaction::Crossing => "is crossing",
            Interaction::Yielding => "is yielding to",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Interaction::Lead => "Lead",
            Interaction::Follow => "Follow",
            Interaction::Overtake => "Overtake",
            Interaction::Passing => "Passing",
            Interaction::CoMoving => "CoMoving",
            Interaction::Approaching => "Approaching",
            Interaction::Crossing => "Crossing",
            Interaction::Yielding => "Yielding",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alignment {
    Same,
    Opposite,
    Perpendicular,
    Oblique,
}

pub fn alignment(yaw_i: f64, yaw_j: f64) -> Alignment {
    let dphi = normalize_angle(yaw_i - yaw_j).abs();
    if dphi < PI / 6.0 {
        Alignment::Same
    } else if dphi > 5.0 * PI / 6.0 {
        Alignment::Opposite
    } else if (dphi - FRAC_PI_2).abs() < PI / 9.0 {
        Alignment::Perpendicular
    } else {
        Alignment::Oblique
    }
}

/// What the cascade needs to know about one participant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agent {
    pub center: Vector3<f64>,
    pub yaw: f64,
    pub speed: f64,
    pub moving: bool,
    pub lane_changing: bool,
}

/// Result of evaluating `i → j`: the label and whether `j → i` gets a reciprocal Yielding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classified {
    pub label: Interaction,
    pub reciprocal_yield: bool,
}

/// Interaction of `i` relative to `j`.
///
/// `prev_distance` is the ego-compensated distance one frame earlier, when
/// both tracks were present.
pub fn classify_interaction(
    i: &Agent,
    j: &Agent,
    prev_distance: Option<f64>,
    th: &ThresholdSet,
) -> Option<Classified> {
    let d = i.center - j.center;
    let dist = d.norm();
    if dist >= th.delta_int {
        return None;
    }
    let (s, c) = j.yaw.sin_cos();
    let d_fwd = d.x * c + d.y * s;
    let d_lat = (d.x * s - d.y * c).abs();
    let same_lane = d_lat < th.same_lane;
    let both_moving = i.moving && j.moving;
    let faster = i.moving && i.speed > j.speed + th.overtake_margin;
    let plain = |label| {
        Some(Classified {
            label,
            reciprocal_yield: false,
        })
    };
    let align = alignment(i.yaw, j.yaw);
    if align == Alignment::Same {
        if d_fwd > th.longitudinal_offset {
            if faster && i.lane_changing {
                return Some(Classified {
                    label: Interaction::Overtake,
                    reciprocal_yield: true,
                });
            }
            if same_lane && both_moving {
                return plain(Interaction::Lead);
            }
            if faster && !same_lane {
                return plain(Interaction::Passing);
            }
        } else if d_fwd < -th.longitudinal_offset {
            if same_lane && both_moving {
                return plain(Interaction::Follow);
            }
        } else if !same_lane && both_moving && (i.speed - j.speed).abs() < th.comoving_band {
            return plain(Interaction::CoMoving);
        }
        return None;
    }
    if align == Alignment::Opposite && both_moving && prev_distance.is_some_and(|p| dist < p) {
        return plain(Interaction::Approaching);
    }
    if matches!(align, Alignment::Opposite | Alignment::Perpendicular)
        && i.moving
        && dist < th.crossing_proximity
    {
        return plain(Interaction::Crossing);
    }
    None
}
