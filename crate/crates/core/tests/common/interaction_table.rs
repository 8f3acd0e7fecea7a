//! Brute-force interaction rule table and a sampler that reaches every row.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Rotation2, Vector2, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sceneqa::graph::interaction::Agent;
use sceneqa::graph::Interaction;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Align {
    Same,
    Opposite,
    Perpendicular,
    Other,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Zone {
    Ahead,
    Behind,
    Beside,
}

struct Facts {
    align: Align,
    zone: Zone,
    same_lane: bool,
    both_moving: bool,
    faster: bool,
    lane_change: bool,
    i_moving: bool,
    shrinking: bool,
    close: bool,
    speed_match: bool,
}

/// One row: predicates that must hold (None = don't care) and the outcome.
struct Row {
    align: Option<Align>,
    zone: Option<Zone>,
    same_lane: Option<bool>,
    both_moving: Option<bool>,
    faster: Option<bool>,
    lane_change: Option<bool>,
    i_moving: Option<bool>,
    shrinking: Option<bool>,
    close: Option<bool>,
    speed_match: Option<bool>,
    out: Option<(Interaction, bool)>,
}

const ANY: Row = Row {
    align: None,
    zone: None,
    same_lane: None,
    both_moving: None,
    faster: None,
    lane_change: None,
    i_moving: None,
    shrinking: None,
    close: None,
    speed_match: None,
    out: None,
};

fn table() -> Vec<Row> {
    use Interaction::*;
    let same = Some(Align::Same);
    vec![
        Row {
            align: same,
            zone: Some(Zone::Ahead),
            faster: Some(true),
            lane_change: Some(true),
            out: Some((Overtake, true)),
            ..ANY
        },
        Row {
            align: same,
            zone: Some(Zone::Ahead),
            same_lane: Some(true),
            both_moving: Some(true),
            out: Some((Lead, false)),
            ..ANY
        },
        Row {
            align: same,
            zone: Some(Zone::Ahead),
            faster: Some(true),
            same_lane: Some(false),
            out: Some((Passing, false)),
            ..ANY
        },
        Row {
            align: same,
            zone: Some(Zone::Behind),
            same_lane: Some(true),
            both_moving: Some(true),
            out: Some((Follow, false)),
            ..ANY
        },
        Row {
            align: same,
            zone: Some(Zone::Beside),
            same_lane: Some(false),
            both_moving: Some(true),
            speed_match: Some(true),
            out: Some((CoMoving, false)),
            ..ANY
        },
        Row { align: same, ..ANY },
        Row {
            align: Some(Align::Opposite),
            both_moving: Some(true),
            shrinking: Some(true),
            out: Some((Approaching, false)),
            ..ANY
        },
        Row {
            align: Some(Align::Opposite),
            i_moving: Some(true),
            close: Some(true),
            out: Some((Crossing, false)),
            ..ANY
        },
        Row {
            align: Some(Align::Perpendicular),
            i_moving: Some(true),
            close: Some(true),
            out: Some((Crossing, false)),
            ..ANY
        },
        ANY,
    ]
}

fn matches(row: &Row, f: &Facts) -> bool {
    fn ok<T: PartialEq>(want: Option<T>, got: T) -> bool {
        want.is_none_or(|w| w == got)
    }
    ok(row.align, f.align)
        && ok(row.zone, f.zone)
        && ok(row.same_lane, f.same_lane)
        && ok(row.both_moving, f.both_moving)
        && ok(row.faster, f.faster)
        && ok(row.lane_change, f.lane_change)
        && ok(row.i_moving, f.i_moving)
        && ok(row.shrinking, f.shrinking)
        && ok(row.close, f.close)
        && ok(row.speed_match, f.speed_match)
}

pub fn oracle_interaction(i: &Agent, j: &Agent, prev: Option<f64>) -> Option<(Interaction, bool)> {
    let dist = (i.center - j.center).norm();
    if dist >= 30.0 {
        return None;
    }
    let hi = Vector2::new(i.yaw.cos(), i.yaw.sin());
    let hj = Vector2::new(j.yaw.cos(), j.yaw.sin());
    let angle = hi.dot(&hj).clamp(-1.0, 1.0).acos();
    let align = if angle < PI / 6.0 {
        Align::Same
    } else if angle > 5.0 * PI / 6.0 {
        Align::Opposite
    } else if (angle - FRAC_PI_2).abs() < PI / 9.0 {
        Align::Perpendicular
    } else {
        Align::Other
    };
    let local = Rotation2::new(-j.yaw) * (i.center - j.center).xy();
    let zone = if local.x > 1.0 {
        Zone::Ahead
    } else if local.x < -1.0 {
        Zone::Behind
    } else {
        Zone::Beside
    };
    let facts = Facts {
        align,
        zone,
        same_lane: local.y.abs() < 2.0,
        both_moving: i.moving && j.moving,
        faster: i.moving && i.speed > j.speed + 0.5,
        lane_change: i.lane_changing,
        i_moving: i.moving,
        shrinking: prev.is_some_and(|p| dist < p),
        close: dist < 10.0,
        speed_match: (i.speed - j.speed).abs() < 1.0,
    };
    table()
        .into_iter()
        .find(|r| matches(r, &facts))
        .and_then(|r| r.out)
}

pub fn random_agent_pair(rng: &mut ChaCha8Rng) -> (Agent, Agent, Option<f64>) {
    let yaw_j = rng.random_range(-PI..PI);
    let yaw_i = match rng.random_range(0..4) {
        0 => yaw_j + rng.random_range(-0.4..0.4),
        1 => yaw_j + PI + rng.random_range(-0.4..0.4),
        2 => {
            yaw_j
                + FRAC_PI_2 * if rng.random_bool(0.5) { 1.0 } else { -1.0 }
                + rng.random_range(-0.5..0.5)
        }
        _ => rng.random_range(-PI..PI),
    };
    let cj = Vector3::new(
        rng.random_range(-40.0..40.0),
        rng.random_range(-40.0..40.0),
        0.0,
    );
    let (fwd, lat) = if rng.random_bool(0.7) {
        (rng.random_range(-15.0..15.0), rng.random_range(-5.0..5.0))
    } else {
        (rng.random_range(-35.0..35.0), rng.random_range(-35.0..35.0))
    };
    let ci = cj
        + Vector3::new(
            fwd * yaw_j.cos() + lat * yaw_j.sin(),
            fwd * yaw_j.sin() - lat * yaw_j.cos(),
            0.0,
        );
    let agent = |rng: &mut ChaCha8Rng, center, yaw: f64| {
        let speed: f64 = if rng.random_bool(0.2) {
            0.0
        } else {
            rng.random_range(0.0..15.0)
        };
        Agent {
            center,
            yaw: sceneqa::geometry::normalize_angle(yaw),
            speed,
            moving: if rng.random_bool(0.9) {
                speed >= 0.5
            } else {
                rng.random_bool(0.5)
            },
            lane_changing: rng.random_bool(0.3),
        }
    };
    let mut i = agent(rng, ci, yaw_i);
    let j = agent(rng, cj, yaw_j);
    if rng.random_bool(0.1) {
        // side by side in a neighbouring lane at a similar speed
        let (fwd, lat) = (rng.random_range(-1.5..1.5), rng.random_range(-5.0..5.0));
        i.center = cj
            + Vector3::new(
                fwd * yaw_j.cos() + lat * yaw_j.sin(),
                fwd * yaw_j.sin() - lat * yaw_j.cos(),
                0.0,
            );
        i.yaw = sceneqa::geometry::normalize_angle(yaw_j + rng.random_range(-0.3..0.3));
        i.speed = (j.speed + rng.random_range(-1.5..1.5)).max(0.0);
        i.moving = i.speed >= 0.5;
    }
    let ci = i.center;
    let dist = (ci - cj).norm();
    let prev = match rng.random_range(0..3) {
        0 => None,
        1 => Some(dist + rng.random_range(0.1..5.0)),
        _ => Some((dist - rng.random_range(0.1..5.0)).max(0.0)),
    };
    (i, j, prev)
}
