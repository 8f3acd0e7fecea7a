//! Ego-compensated velocities and per-object action labels.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::geometry::{normalize_angle, Pose};
use crate::graph::ThresholdSet;
use crate::schema::{Category, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    Stopped,
    MovingForward,
    MovingBackward,
    TurnLeft,
    TurnRight,
    UTurn,
    Accelerate,
    Decelerate,
    LaneChangeLeft,
    LaneChangeRight,
}

impl Action {
    pub const ALL: [Action; 10] = [
        Action::Stopped,
        Action::MovingForward,
        Action::MovingBackward,
        Action::TurnLeft,
        Action::TurnRight,
        Action::UTurn,
        Action::Accelerate,
        Action::Decelerate,
        Action::LaneChangeLeft,
        Action::LaneChangeRight,
    ];

    pub fn phrase(self) -> &'static str {
        match self {
            Action::Stopped => "stopped",
            Action::MovingForward => "moving forward",
            Action::MovingBackward => "moving backward",
            Action::TurnLeft => "turning left",
            Action::TurnRight => "turning right",
            Action::UTurn => "making a U-turn",
            Action::Accelerate => "accelerating",
            Action::Decelerate => "decelerating",
            Action::LaneChangeLeft => "changing lanes to the left",
            Action::LaneChangeRight => "changing lanes to the right",
        }
    }

    pub fn is_lane_change(self) -> bool {
        matches!(self, Action::LaneChangeLeft | Action::LaneChangeRight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocitySource {
    Native,
    Estimated,
    /// No native value and no previous observation: zero is substituted.
    Fallback,
}

/// `(E_pose^t)⁻¹ · E_pose^{t-1}`: maps ego-frame points at `t-1` into the ego frame at `t`.
pub fn relative_ego_motion(scene: &Scene, t: usize) -> Pose {
    let cur = &scene.frames[t].ego_pose;
    let prev = &scene.frames[t - 1].ego_pose;
    cur.inverse().compose(prev)
}

/// Finite-difference velocity of track `track` at frame `t` with ego motion removed.
pub fn estimate_velocity(scene: &Scene, t: usize, track: &str) -> Result<Vector3<f64>, GraphError> {
    if t == 0 || t >= scene.frames.len() {
        return Err(GraphError::FrameOutOfRange(t));
    }
    let missing = |frame| GraphError::MissingTrack {
        track: track.to_string(),
        frame,
    };
    let (_, cur) = scene.frames[t]
        .object_by_track(track)
        .ok_or_else(|| missing(t))?;
    let (_, prev) = scene.frames[t - 1]
        .object_by_track(track)
        .ok_or_else(|| missing(t - 1))?;
    let dt = scene.frames[t].timestamp - scene.frames[t - 1].timestamp;
    if dt <= 0.0 {
        return Err(GraphError::ZeroDt {
            prev: t - 1,
            frame: t,
        });
    }
    let compensated = relative_ego_motion(scene, t).transform_point(&prev.center_vec());
    Ok((cur.center_vec() - compensated) / dt)
}

/// Kinematic state of one object at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionState {
    pub velocity: Vector3<f64>,
    pub velocity_source: VelocitySource,
    /// Index of the same track in the previous frame.
    pub prev_index: Option<usize>,
    /// Heading change against the ego-compensated previous heading.
    pub delta_heading: Option<f64>,
    /// Turn-compensated lateral displacement, positive to the right.
    pub lateral_shift: Option<f64>,
    /// Change in speed since the previous frame.
    pub accel: Option<f64>,
}

/// Velocities and motion cues for every object of every frame.
pub fn motion_table(scene: &Scene) -> Result<Vec<Vec<MotionState>>, GraphError> {
    let mut table: Vec<Vec<MotionState>> = Vec::with_capacity(scene.frames.len());
    for (t, frame) in scene.frames.iter().enumerate() {
        let rel = (t > 0).then(|| relative_ego_motion(scene, t));
        let dt = if t > 0 {
            let dt = frame.timestamp - scene.frames[t - 1].timestamp;
            if dt <= 0.0 {
                return Err(GraphError::ZeroDt {
                    prev: t - 1,
                    frame: t,
                });
            }
            dt
        } else {
            0.0
        };
        let mut row = Vec::with_capacity(frame.objects.len());
        for obj in &frame.objects {
            let prev = match (&obj.track_id, t) {
                (Some(tr), t) if t > 0 => scene.frames[t - 1].object_by_track(tr),
                _ => None,
            };
            let mut state = MotionState {
                velocity: Vector3::zeros(),
                velocity_source: VelocitySource::Fallback,
                prev_index: prev.map(|(j, _)| j),
                delta_heading: None,
                lateral_shift: None,
                accel: None,
            };
            let displacement = prev.map(|(_, p)| {
                let rel = rel.as_ref().expect("t > 0");
                let c_prev = rel.transform_point(&p.center_vec());
                let yaw_prev = normalize_angle(p.yaw + rel.yaw());
                (obj.center_vec() - c_prev, yaw_prev)
            });
            if let Some(v) = obj.velocity {
                state.velocity = Vector3::from(v);
                state.velocity_source = VelocitySource::Native;
            } else if let Some((dc, _)) = displacement {
                state.velocity = dc / dt;
                state.velocity_source = VelocitySource::Estimated;
            }
            if let Some((dc, yaw_prev)) = displacement {
                let dtheta = normalize_angle(obj.yaw - yaw_prev);
                let (s, c) = yaw_prev.sin_cos();
                let d_lat = dc.x * s - dc.y * c;
                let d_fwd = dc.x * c + dc.y * s;
                state.delta_heading = Some(dtheta);
                state.lateral_shift = Some(d_lat + d_fwd * dtheta.sin());
                let prev_state: &MotionState = &table[t - 1][prev.unwrap().0];
                if state.velocity_source != VelocitySource::Fallback
                    && prev_state.velocity_source != VelocitySource::Fallback
                {
                    state.accel = Some(state.velocity.norm() - prev_state.velocity.norm());
                }
            }
            row.push(state);
        }
        table.push(row);
    }
    Ok(table)
}

/// Length of the run of same-signed accelerations beyond `eps` ending at frame `t`.
fn accel_run(table: &[Vec<MotionState>], t: usize, i: usize, eps: f64, sign: f64) -> usize {
    let (mut t, mut i) = (t, i);
    let mut run = 0;
    loop {
        let st = &table[t][i];
        match st.accel {
            Some(a) if a * sign > eps => run += 1,
            _ => return run,
        }
        match st.prev_index {
            Some(j) if t > 0 => {
                t -= 1;
                i = j;
            }
            _ => return run,
        }
    }
}

/// Action labels for object `i` at frame `t`.
pub fn classify_actions(
    category: Category,
    yaw: f64,
    table: &[Vec<MotionState>],
    t: usize,
    i: usize,
    th: &ThresholdSet,
) -> BTreeSet<Action> {
    let st = &table[t][i];
    let mut out = BTreeSet::new();
    if category.is_static() {
        out.insert(Action::Stopped);
        return out;
    }
    let speed = st.velocity.norm();
    let stopped = speed < th.eps_v;
    if stopped {
        out.insert(Action::Stopped);
    } else {
        let vh = st.velocity.xy();
        if vh.norm() > 0.0 {
            let cos = (vh.x * yaw.cos() + vh.y * yaw.sin()) / vh.norm();
            let angle = cos.clamp(-1.0, 1.0).acos();
            if angle < PI / 3.0 {
                out.insert(Action::MovingForward);
            } else if angle > 2.0 * PI / 3.0 {
                out.insert(Action::MovingBackward);
            }
        }
        if let Some(dtheta) = st.delta_heading {
            if dtheta.abs() > FRAC_PI_2 {
                out.insert(Action::UTurn);
            } else if dtheta > PI / 12.0 {
                out.insert(Action::TurnLeft);
            } else if dtheta < -PI / 12.0 {
                out.insert(Action::TurnRight);
            }
        }
        if let Some(shift) = st.lateral_shift {
            if shift > th.eps_lane {
                out.insert(Action::LaneChangeRight);
            } else if shift < -th.eps_lane {
                out.insert(Action::LaneChangeLeft);
            }
        }
    }
    if accel_run(table, t, i, th.eps_a, 1.0) >= 3 {
        out.insert(Action::Accelerate);
    } else if accel_run(table, t, i, th.eps_a, -1.0) >= 3 {
        out.insert(Action::Decelerate);
    }
    out
}
