//! Temporal reasoning tasks over short clips.
//!
//! Object ids are 1-based positions in the clip's first frame and stay
//! attached to the track for the rest of the clip.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector3;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::camera::{camera_description, ordered_cameras, project_to_camera};
use crate::geometry::yaw_rotation;
use crate::graph::{Action, Interaction, Node, SceneGraph};
use crate::render::Highlight;
use crate::schema::Scene;

use super::common::{
    cert, choose_options, disjoint, fail, follow, multiview, obj_index, object_label, pick,
    shuffle_options, tag, visible, window_start, GenResult, Rng8,
};
use super::{
    Answer, Asset, Certificate, Constraint, Draft, GenContext, GeneratorConfig,
    INTERACTION_DEFINITIONS,
};

fn require_tracks(graph: &SceneGraph) -> GenResult<()> {
    if graph.temporal_disabled {
        return fail("no_track_ids");
    }
    Ok(())
}

fn id_of(node: &Node) -> usize {
    obj_index(node) + 1
}

/// First-frame objects that carry a track and are seen by a camera.
fn tracked_visible(graph: &SceneGraph, t0: usize) -> Vec<&Node> {
    visible(graph, t0)
        .into_iter()
        .filter(|n| n.track_id.is_some())
        .collect()
}

/// Clip video: every first-frame object is tagged with its id, later frames are plain.
fn annotated_video(ctx: &GenContext<'_>, frames: &[usize]) -> Vec<Asset> {
    frames
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let hl = if k == 0 {
                visible(ctx.graph, t)
                    .iter()
                    .map(|n| Highlight::new(obj_index(n), tag(id_of(n))))
                    .collect()
            } else {
                Vec::new()
            };
            multiview(ctx.scene, t, hl)
        })
        .collect()
}

/// Clip video with the given first-frame objects tagged in every frame.
fn tracked_video(
    ctx: &GenContext<'_>,
    frames: &[usize],
    objects: &[(&Node, String)],
) -> Vec<Asset> {
    frames
        .iter()
        .map(|&t| {
            let hl = objects
                .iter()
                .filter_map(|(n, text)| {
                    follow(ctx.graph, n, t).map(|m| Highlight::new(obj_index(m), text.clone()))
                })
                .collect();
            multiview(ctx.scene, t, hl)
        })
        .collect()
}

fn number_word(n: usize) -> String {
    match n {
        1 => "one".into(),
        2 => "two".into(),
        3 => "three".into(),
        4 => "four".into(),
        5 => "five".into(),
        _ => n.to_string(),
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

// ---------------------------------------------------------------- event ordering

#[derive(Debug, Clone, PartialEq)]
enum EventKind {
    Action(Action),
    Interaction(Interaction, usize),
}

#[derive(Debug, Clone, PartialEq)]
struct Event {
    id: usize,
    track: String,
    frame: usize,
    range: f64,
    kind: EventKind,
}

impl Event {
    fn text(&self) -> String {
        match &self.kind {
            EventKind::Action(a) => format!("{} is {}", object_label(self.id), a.phrase()),
            EventKind::Interaction(m, j) => format!(
                "{} {} {}",
                object_label(self.id),
                m.phrase(),
                object_label(*j)
            ),
        }
    }
}

/// Whether `e` starts at frame `f`: its label holds at `f` and not at `f - 1`.
fn is_onset(graph: &SceneGraph, e: &Event, track_of: &BTreeMap<usize, &String>, f: usize) -> bool {
    match &e.kind {
        EventKind::Action(a) => {
            track_actions(graph, &e.track, f).contains(a)
                && !track_actions(graph, &e.track, f - 1).contains(a)
        }
        EventKind::Interaction(m, j) => {
            let Some(other) = track_of.get(j) else {
                return false;
            };
            pair_interactions(graph, &e.track, other, f).contains(m)
                && !pair_interactions(graph, &e.track, other, f - 1).contains(m)
        }
    }
}

/// Whether the events can start at strictly increasing frames of `future`, in order.
fn realizable(
    graph: &SceneGraph,
    seq: &[Event],
    track_of: &BTreeMap<usize, &String>,
    future: &[usize],
) -> bool {
    let mut after = None;
    for e in seq {
        let next = future
            .iter()
            .copied()
            .find(|&f| after.is_none_or(|a| f > a) && is_onset(graph, e, track_of, f));
        match next {
            Some(f) => after = Some(f),
            None => return false,
        }
    }
    true
}

fn sequence_text(events: &[Event]) -> String {
    events
        .iter()
        .map(Event::text)
        .collect::<Vec<_>>()
        .join(", then ")
}

fn track_actions(graph: &SceneGraph, track: &str, t: usize) -> BTreeSet<Action> {
    graph
        .track_node(track, t)
        .map(|n| graph.actions(n.key))
        .unwrap_or_default()
}

fn pair_interactions(graph: &SceneGraph, a: &str, b: &str, t: usize) -> BTreeSet<Interaction> {
    let (Some(na), Some(nb)) = (graph.track_node(a, t), graph.track_node(b, t)) else {
        return BTreeSet::new();
    };
    graph
        .interactions_at(t)
        .filter(|(s, d, _)| *s == na.key && *d == nb.key)
        .map(|(_, _, m)| m)
        .collect()
}

pub(crate) fn event_ordering(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let g = ctx.graph;
    require_tracks(g)?;
    let scene = ctx.scene;
    let tc = cfg.context_frames.max(1);
    let t0 = window_start(scene.frames.len(), tc, 1, rng)?;
    let ctx_last = t0 + tc - 1;
    let t_ref = scene.frames[ctx_last].timestamp;
    let future: Vec<usize> = (ctx_last + 1..scene.frames.len())
        .take_while(|&f| scene.frames[f].timestamp - t_ref <= cfg.future_horizon + 1e-9)
        .collect();
    if future.is_empty() {
        return fail("no_future_frames");
    }
    let ids: BTreeMap<String, usize> = g
        .frame_objects(t0)
        .filter_map(|n| n.track_id.clone().map(|tr| (tr, id_of(n))))
        .collect();
    let seen: BTreeSet<&String> = ids
        .keys()
        .filter(|tr| {
            (t0..=ctx_last).any(|t| g.track_node(tr, t).is_some_and(|n| !n.cameras.is_empty()))
        })
        .collect();

    let mut events: Vec<Event> = Vec::new();
    let mut texts = BTreeSet::new();
    for &f in &future {
        for n in g.frame_objects(f) {
            let Some(tr) = n.track_id.as_ref().filter(|tr| seen.contains(tr)) else {
                continue;
            };
            let before = track_actions(g, tr, f - 1);
            for a in g.actions(n.key).difference(&before) {
                let e = Event {
                    id: ids[tr],
                    track: tr.clone(),
                    frame: f,
                    range: n.center_vec().norm(),
                    kind: EventKind::Action(*a),
                };
                if texts.insert(e.text()) {
                    events.push(e);
                }
            }
        }
        for (src, dst, m) in g.interactions_at(f) {
            let (ns, nd) = (
                g.node(src).expect("edge node"),
                g.node(dst).expect("edge node"),
            );
            let (Some(ts), Some(td)) = (ns.track_id.as_ref(), nd.track_id.as_ref()) else {
                continue;
            };
            if !seen.contains(ts)
                || !ids.contains_key(td)
                || pair_interactions(g, ts, td, f - 1).contains(&m)
            {
                continue;
            }
            let e = Event {
                id: ids[ts],
                track: ts.clone(),
                frame: f,
                range: ns.center_vec().norm(),
                kind: EventKind::Interaction(m, ids[td]),
            };
            if texts.insert(e.text()) {
                events.push(e);
            }
        }
    }
    if events.is_empty() {
        return fail("no_future_events");
    }
    events.sort_by(|a, b| {
        a.range
            .total_cmp(&b.range)
            .then(a.frame.cmp(&b.frame))
            .then(a.text().cmp(&b.text()))
    });
    let mut salient: Vec<Event> = Vec::new();
    for e in events {
        if salient.len() == cfg.max_events {
            break;
        }
        if salient.iter().all(|s| s.frame != e.frame) {
            salient.push(e);
        }
    }
    salient.sort_by_key(|e| e.frame);
    let correct = sequence_text(&salient);

    let track_of: BTreeMap<usize, &String> = ids.iter().map(|(tr, id)| (*id, tr)).collect();
    let mut distractors: Vec<String> = Vec::new();
    for _ in 0..200 {
        if distractors.len() == cfg.k - 1 {
            break;
        }
        let mut m = salient.clone();
        let i = rng.random_range(0..m.len());
        match rng.random_range(0..3) {
            0 if m.len() >= 2 => {
                let j = (i + rng.random_range(1..m.len())) % m.len();
                m.swap(i, j);
            }
            1 => {
                let e = &mut m[i];
                match e.kind.clone() {
                    EventKind::Action(_) => {
                        let held = track_actions(g, &e.track, e.frame);
                        let alts: Vec<Action> = Action::ALL
                            .into_iter()
                            .filter(|a| !held.contains(a))
                            .collect();
                        let Some(&a) = alts.choose(rng) else { continue };
                        e.kind = EventKind::Action(a);
                    }
                    EventKind::Interaction(_, j) => {
                        let held = pair_interactions(g, &e.track, track_of[&j], e.frame);
                        let alts: Vec<Interaction> = Interaction::ALL
                            .into_iter()
                            .filter(|m| !held.contains(m))
                            .collect();
                        let Some(&mm) = alts.choose(rng) else {
                            continue;
                        };
                        e.kind = EventKind::Interaction(mm, j);
                    }
                }
            }
            _ => {
                let e = &mut m[i];
                let alts: Vec<(usize, &String)> = track_of
                    .iter()
                    .filter(|(id, tr)| {
                        **id != e.id
                            && match &e.kind {
                                EventKind::Action(a) => !track_actions(g, tr, e.frame).contains(a),
                                EventKind::Interaction(mm, j) => {
                                    *j != **id
                                        && !pair_interactions(g, tr, track_of[j], e.frame)
                                            .contains(mm)
                                }
                            }
                    })
                    .map(|(id, tr)| (*id, *tr))
                    .collect();
                let Some(&(id, tr)) = alts.choose(rng) else {
                    continue;
                };
                e.id = id;
                e.track = tr.clone();
            }
        }
        let s = sequence_text(&m);
        if s != correct && !distractors.contains(&s) && !realizable(g, &m, &track_of, &future) {
            distractors.push(s);
        }
    }
    if distractors.len() < cfg.k - 1 {
        return fail("too_few_distractors");
    }
    let (options, answer) = shuffle_options(correct, distractors, rng)?;
    let context: Vec<usize> = (t0..=ctx_last).collect();
    let certificate = Certificate::new(Constraint::None)
        .with("context", &context)
        .with("future", &future)
        .with(
            "events",
            salient
                .iter()
                .map(|e| (e.frame, e.text()))
                .collect::<Vec<_>>(),
        );
    Ok(Draft {
        frames: context.clone(),
        question: format!(
            "Given this video sequence, what is the correct order of events in the next {} seconds? <video>",
            fmt_num(cfg.future_horizon)
        ),
        preamble: Some(INTERACTION_DEFINITIONS.to_string()),
        assets: annotated_video(ctx, &context),
        option_assets: Vec::new(),
        options: Some(options),
        answer: Answer::Index(answer),
        certificate,
    })
}

// ---------------------------------------------------------------- trajectory / occlusion

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FinalState {
    Visible,
    Occluded,
    Gone,
}

/// State of a first-frame object at `last`: gone from every frustum, in a frustum below `theta_v`, or visible.
fn final_state(ctx: &GenContext<'_>, first: &Node, last: usize, theta_v: f64) -> FinalState {
    let Some(n) = follow(ctx.graph, first, last) else {
        return FinalState::Gone;
    };
    let obj = &ctx.scene.frames[last].objects[obj_index(n)];
    if obj.projections.is_empty() {
        FinalState::Gone
    } else if obj.max_visibility() < theta_v {
        FinalState::Occluded
    } else {
        FinalState::Visible
    }
}

fn first_visibility(ctx: &GenContext<'_>, n: &Node) -> f64 {
    ctx.scene.frames[n.key.frame].objects[obj_index(n)].max_visibility()
}

pub(crate) fn trajectory_reasoning(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let g = ctx.graph;
    require_tracks(g)?;
    let t0 = window_start(ctx.scene.frames.len(), cfg.clip_len, 0, rng)?;
    let last = t0 + cfg.clip_len - 1;
    let early: Vec<&Node> = tracked_visible(g, t0)
        .into_iter()
        .filter(|n| first_visibility(ctx, n) >= cfg.theta_v)
        .collect();
    let states: Vec<(&Node, FinalState)> = early
        .iter()
        .map(|n| (*n, final_state(ctx, n, last, cfg.theta_v)))
        .collect();
    let passed: Vec<&Node> = states
        .iter()
        .filter(|(_, s)| *s == FinalState::Gone)
        .map(|(n, _)| *n)
        .collect();
    let occluded: Vec<&Node> = states
        .iter()
        .filter(|(_, s)| *s == FinalState::Occluded)
        .map(|(n, _)| *n)
        .collect();
    let groups: Vec<(&Vec<&Node>, &str, &str)> = [
        (&passed, "passed by", "occluded"),
        (&occluded, "occluded", "passed by"),
    ]
    .into_iter()
    .filter(|(v, _, _)| !v.is_empty())
    .collect();
    let &(group, reason, opposite) = pick(&groups, rng, "no_disappeared_object")?;
    let &target = pick(group, rng, "no_disappeared_object")?;
    let id = id_of(target);
    let correct = format!("{}: {reason}", object_label(id));

    let still: Vec<usize> = states
        .iter()
        .filter(|(_, s)| *s == FinalState::Visible)
        .map(|(n, _)| id_of(n))
        .collect();
    let mut pool: Vec<String> = still
        .iter()
        .flat_map(|i| {
            [
                format!("{}: passed by", object_label(*i)),
                format!("{}: occluded", object_label(*i)),
            ]
        })
        .collect();
    let opposite_text = format!("{}: {opposite}", object_label(id));
    let n_first = g.frame_objects(t0).count();
    let mut fake = n_first + 1;
    while pool.len() < cfg.k - 2 {
        pool.push(format!(
            "{}: {}",
            object_label(fake),
            if rng.random_bool(0.5) {
                "passed by"
            } else {
                "occluded"
            }
        ));
        fake += 1;
    }
    let mut distractors = vec![opposite_text.clone()];
    distractors.extend(super::common::sample_distinct(
        &pool,
        &opposite_text,
        cfg.k - 2,
        rng,
    ));
    let (options, answer) = shuffle_options(correct, distractors, rng)?;
    let frames: Vec<usize> = (t0..=last).collect();
    let mut certificate = Certificate::new(Constraint::None)
        .with("reason", reason)
        .with("final_frame", last);
    certificate.objects = vec![cert(ctx.scene, "answer", target)];
    Ok(Draft {
        question: "Given this video sequence with annotation on the first frame. Which object was present earlier but is no longer visible, and why? <video>".into(),
        preamble: None,
        assets: annotated_video(ctx, &frames),
        frames,
        option_assets: Vec::new(),
        options: Some(options),
        answer: Answer::Index(answer),
        certificate,
    })
}

fn id_list(ids: &[usize]) -> String {
    if ids.is_empty() {
        return "None".into();
    }
    let mut v = ids.to_vec();
    v.sort_unstable();
    v.iter()
        .map(|i| object_label(*i))
        .collect::<Vec<_>>()
        .join(", ")
}

pub(crate) fn occlusion_awareness(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let g = ctx.graph;
    require_tracks(g)?;
    let t0 = window_start(ctx.scene.frames.len(), cfg.clip_len, 0, rng)?;
    let last = t0 + cfg.clip_len - 1;
    let first = tracked_visible(g, t0);
    if first.is_empty() {
        return fail("no_visible_objects");
    }
    let mut occluded: Vec<usize> = Vec::new();
    let mut clear: Vec<usize> = Vec::new();
    for n in &first {
        match final_state(ctx, n, last, cfg.theta_v) {
            FinalState::Occluded => occluded.push(id_of(n)),
            _ => clear.push(id_of(n)),
        }
    }
    occluded.sort_unstable();
    let answer_ids: Vec<usize> = occluded.iter().take(cfg.occlusion_k).copied().collect();
    let correct = id_list(&answer_ids);

    let mut pool: Vec<String> = Vec::new();
    if answer_ids.is_empty() {
        for (i, a) in clear.iter().enumerate() {
            pool.push(id_list(&[*a]));
            for b in &clear[i + 1..] {
                pool.push(id_list(&[*a, *b]));
            }
        }
    } else {
        pool.push("None".into());
        for pos in 0..answer_ids.len() {
            for c in &clear {
                let mut v = answer_ids.clone();
                v[pos] = *c;
                pool.push(id_list(&v));
            }
            if answer_ids.len() >= 2 && occluded.len() <= cfg.occlusion_k {
                let mut v = answer_ids.clone();
                v.remove(pos);
                pool.push(id_list(&v));
            }
        }
        if answer_ids.len() < cfg.occlusion_k {
            for c in &clear {
                let mut v = answer_ids.clone();
                v.push(*c);
                pool.push(id_list(&v));
            }
        }
        for c in &clear {
            pool.push(id_list(&[*c]));
        }
    }
    let (options, answer) = choose_options(correct, &pool, cfg.k, rng)?;
    let frames: Vec<usize> = (t0..=last).collect();
    let certificate = Certificate::new(Constraint::None)
        .with("occluded_ids", &occluded)
        .with("final_frame", last);
    Ok(Draft {
        question: "Given this video sequence with annotation on the first frame. Are there any objects occluded in the final frame? What are they? <video>".into(),
        preamble: None,
        assets: annotated_video(ctx, &frames),
        frames,
        option_assets: Vec::new(),
        options: Some(options),
        answer: Answer::Index(answer),
        certificate,
    })
}

// ---------------------------------------------------------------- object manipulation

/// Result of moving an object under a hypothetical rotation and speed.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Disappears,
    Transfer { exit: String, enter: String },
    Appear { enter: String },
    Beside { left: bool, object_id: usize },
    MovingIn { camera: String },
}

impl Outcome {
    pub fn text(&self, scene: &Scene) -> String {
        let d = |c: &str| camera_description(scene.source(), c);
        match self {
            Outcome::Disappears => "Disappears from all cameras".into(),
            Outcome::Transfer { exit, enter } => {
                format!("Disappear from {} then appear in {}", d(exit), d(enter))
            }
            Outcome::Appear { enter } => format!("Appear in {}", d(enter)),
            Outcome::Beside { left, object_id } => format!(
                "Moving on the {} side of {}",
                if *left { "left" } else { "right" },
                object_label(*object_id)
            ),
            Outcome::MovingIn { camera } => format!("Moving in {}", d(camera)),
        }
    }
}

/// Cameras of frame `t` whose image contains the ego-frame `point`, in canonical order.
fn cameras_seeing(scene: &Scene, t: usize, point: &Vector3<f64>) -> Vec<String> {
    let f = &scene.frames[t];
    let names: Vec<String> = f
        .cameras
        .iter()
        .filter(|c| project_to_camera(point, c).is_some())
        .map(|c| c.camera_name.clone())
        .collect();
    ordered_cameras(scene.source(), &names)
}

/// Centers of frame `t + 1` objects expressed in frame `t`'s ego coordinates, with their tracks.
fn next_frame_centers(scene: &Scene, t: usize) -> Vec<(Option<String>, Vector3<f64>)> {
    let (now, next) = (&scene.frames[t], &scene.frames[t + 1]);
    let back = now.ego_pose.inverse();
    next.objects
        .iter()
        .map(|o| {
            (
                o.track_id.clone(),
                back.transform_point(&next.ego_pose.transform_point(&o.center_vec())),
            )
        })
        .collect()
}

/// Classifies where an object at `center` (frame `t`) ends up at `moved`.
///
/// `ids` maps tracks to the object ids used in answers; the nearest next-frame
/// object considered must have an id and must not be `track`.
pub fn manipulation_outcome(
    scene: &Scene,
    t: usize,
    track: &str,
    center: &Vector3<f64>,
    moved: &Vector3<f64>,
    radius: f64,
    ids: &BTreeMap<String, usize>,
) -> Outcome {
    let before = cameras_seeing(scene, t, center);
    let after = cameras_seeing(scene, t, moved);
    if after.is_empty() {
        return Outcome::Disappears;
    }
    let exit: Vec<&String> = before.iter().filter(|c| !after.contains(c)).collect();
    let enter: Vec<&String> = after.iter().filter(|c| !before.contains(c)).collect();
    if let Some(e) = enter.first() {
        return match exit.first() {
            Some(x) => Outcome::Transfer {
                exit: (*x).clone(),
                enter: (*e).clone(),
            },
            None => Outcome::Appear {
                enter: (*e).clone(),
            },
        };
    }
    let nearest = next_frame_centers(scene, t)
        .into_iter()
        .filter_map(|(tr, c)| {
            let tr = tr?;
            (tr != track).then_some(())?;
            Some((*ids.get(&tr)?, c))
        })
        .map(|(id, c)| ((moved - c).xy().norm(), id, c))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    match nearest {
        Some((d, id, c)) if d < radius => Outcome::Beside {
            left: moved.y > c.y,
            object_id: id,
        },
        _ => Outcome::MovingIn {
            camera: after[0].clone(),
        },
    }
}

pub(crate) fn object_manipulation(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let g = ctx.graph;
    let scene = ctx.scene;
    require_tracks(g)?;
    let t0 = window_start(scene.frames.len(), cfg.clip_len, 1, rng)?;
    let last = t0 + cfg.clip_len - 1;
    let ids: BTreeMap<String, usize> = g
        .frame_objects(t0)
        .filter_map(|n| n.track_id.clone().map(|tr| (tr, id_of(n))))
        .collect();
    let moving: Vec<&Node> = g
        .frame_objects(last)
        .filter(|n| {
            n.speed() > g.thresholds.eps_v
                && n.track_id.as_ref().is_some_and(|tr| ids.contains_key(tr))
                && !n.cameras.is_empty()
        })
        .collect();
    let &obj = pick(&moving, rng, "no_moving_object")?;
    let speed_kmh = *pick(&cfg.speeds_kmh, rng, "no_speed_options")?;
    let rot_deg = *pick(&cfg.rotations_deg, rng, "no_rotation_options")?;
    let track = obj.track_id.clone().expect("filtered");
    let v = Vector3::from(obj.velocity);
    let heading = Vector3::new(v.x, v.y, 0.0).normalize();
    let moved = obj.center_vec()
        + yaw_rotation(rot_deg.to_radians()) * heading * (speed_kmh / 3.6 * cfg.manipulation_dt);
    let outcome = manipulation_outcome(
        scene,
        last,
        &track,
        &obj.center_vec(),
        &moved,
        cfg.nearby_radius,
        &ids,
    );
    let correct = outcome.text(scene);

    let before = cameras_seeing(scene, last, &obj.center_vec());
    let after = cameras_seeing(scene, last, &moved);
    let names: Vec<String> = scene.frames[last]
        .cameras
        .iter()
        .map(|c| c.camera_name.clone())
        .collect();
    let cams = ordered_cameras(scene.source(), &names);
    let mut pool: Vec<Outcome> = Vec::new();
    if !after.is_empty() {
        pool.push(Outcome::Disappears);
    }
    for c in &cams {
        if !after.contains(c) {
            pool.push(Outcome::MovingIn { camera: c.clone() });
        }
        if after.contains(c) && before.contains(c) || !after.contains(c) {
            pool.push(Outcome::Appear { enter: c.clone() });
        }
    }
    for (i, a) in cams.iter().enumerate() {
        let b = &cams[(i + 1) % cams.len()];
        let true_transfer =
            before.contains(a) && !after.contains(a) && after.contains(b) && !before.contains(b);
        if a != b && !true_transfer {
            pool.push(Outcome::Transfer {
                exit: a.clone(),
                enter: b.clone(),
            });
        }
    }
    for (tr, c) in next_frame_centers(scene, last) {
        let Some(&id) = tr.as_ref().and_then(|tr| ids.get(tr)) else {
            continue;
        };
        if tr.as_deref() == Some(track.as_str()) {
            continue;
        }
        let near = (moved - c).xy().norm() < cfg.nearby_radius;
        let truly_left = moved.y > c.y;
        for left in [true, false] {
            if !(near && left == truly_left) {
                pool.push(Outcome::Beside {
                    left,
                    object_id: id,
                });
            }
        }
    }
    let texts: Vec<String> = pool.iter().map(|o| o.text(scene)).collect();
    let (options, answer) = choose_options(correct, &texts, cfg.k, rng)?;
    let frames: Vec<usize> = (t0..=last).collect();
    let mut certificate = Certificate::new(Constraint::None)
        .with("rotation_deg", rot_deg)
        .with("speed_kmh", speed_kmh)
        .with("moved_center", [moved.x, moved.y, moved.z])
        .with("cameras_before", &before)
        .with("cameras_after", &after);
    certificate.objects = vec![cert(scene, "moved", obj)];
    Ok(Draft {
        question: format!(
            "Given this video sequence, what if {} rotates {} degrees (note: current ego front camera is at +90 degrees) and continues with velocity: {} km/h, what would be the trajectory of it in the next {} seconds? <video>",
            object_label(ids[&track]),
            fmt_num(rot_deg),
            fmt_num(speed_kmh),
            fmt_num(cfg.manipulation_dt)
        ),
        preamble: None,
        assets: annotated_video(ctx, &frames),
        frames,
        option_assets: Vec::new(),
        options: Some(options),
        answer: Answer::Index(answer),
        certificate,
    })
}

// ---------------------------------------------------------------- action / interaction

/// Most frequent action label of `track` over `frames`; ties go to the earlier label in [`Action::ALL`].
pub fn dominant_action(
    graph: &SceneGraph,
    track: &str,
    frames: impl IntoIterator<Item = usize>,
) -> Option<Action> {
    let mut counts: BTreeMap<Action, usize> = BTreeMap::new();
    for t in frames {
        for a in track_actions(graph, track, t) {
            *counts.entry(a).or_insert(0) += 1;
        }
    }
    let best = counts.values().copied().max()?;
    Action::ALL
        .into_iter()
        .find(|a| counts.get(a) == Some(&best))
}

fn action_line(entries: &[(usize, Action)]) -> String {
    entries
        .iter()
        .map(|(id, a)| format!("{}: {}", object_label(*id), a.phrase()))
        .collect::<Vec<_>>()
        .join(", ")
}

pub(crate) fn action_reasoning(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let g = ctx.graph;
    require_tracks(g)?;
    let k = cfg.action_k.max(1);
    let t0 = window_start(ctx.scene.frames.len(), cfg.clip_len, 0, rng)?;
    let last = t0 + cfg.clip_len - 1;
    let mut candidates: Vec<(&Node, Action)> = tracked_visible(g, t0)
        .into_iter()
        .filter_map(|n| Some((n, dominant_action(g, n.track_id.as_ref()?, t0..=last)?)))
        .collect();
    if candidates.len() < k {
        return fail("too_few_tracked_objects");
    }
    candidates.shuffle(rng);
    let mut chosen: Vec<(&Node, Action)> = Vec::new();
    for c in &candidates {
        if chosen.len() < k && chosen.iter().all(|(n, _)| disjoint(n, c.0)) {
            chosen.push(*c);
        }
    }
    let diverse = chosen.len() == k;
    for c in &candidates {
        if chosen.len() < k && chosen.iter().all(|(n, _)| n.key != c.0.key) {
            chosen.push(*c);
        }
    }
    chosen.sort_by_key(|(n, _)| id_of(n));
    let entries: Vec<(usize, Action)> = chosen.iter().map(|(n, a)| (id_of(n), *a)).collect();
    let correct = action_line(&entries);

    let mut pool: Vec<String> = Vec::new();
    for i in 0..entries.len() {
        for a in Action::ALL {
            if a != entries[i].1 {
                let mut e = entries.clone();
                e[i].1 = a;
                pool.push(action_line(&e));
            }
        }
    }
    if entries.len() >= 2 {
        let mut e = entries.clone();
        let first = e[0].1;
        for i in 0..e.len() - 1 {
            e[i].1 = e[i + 1].1;
        }
        let n = e.len();
        e[n - 1].1 = first;
        pool.push(action_line(&e));
    }
    let (options, answer) = choose_options(correct, &pool, cfg.k, rng)?;
    let frames: Vec<usize> = (t0..=last).collect();
    let tagged: Vec<(&Node, String)> = chosen.iter().map(|(n, _)| (*n, tag(id_of(n)))).collect();
    let mut certificate = Certificate::new(if diverse {
        Constraint::DiverseCameras
    } else {
        Constraint::None
    })
    .with(
        "actions",
        entries.iter().map(|(id, a)| (*id, *a)).collect::<Vec<_>>(),
    );
    certificate.objects = chosen
        .iter()
        .map(|(n, _)| cert(ctx.scene, object_label(id_of(n)), n))
        .collect();
    Ok(Draft {
        question: format!(
            "Given this video sequence, what are the actions of the {} highlighted objects? <video>",
            number_word(k)
        ),
        preamble: None,
        assets: tracked_video(ctx, &frames, &tagged),
        frames,
        option_assets: Vec::new(),
        options: Some(options),
        answer: Answer::Index(answer),
        certificate,
    })
}

pub(crate) fn interaction_reasoning(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let g = ctx.graph;
    require_tracks(g)?;
    let t0 = window_start(ctx.scene.frames.len(), cfg.clip_len, 0, rng)?;
    let last = t0 + cfg.clip_len - 1;
    let first: BTreeMap<String, &Node> = tracked_visible(g, t0)
        .into_iter()
        .map(|n| (n.track_id.clone().expect("tracked"), n))
        .collect();
    let mut counts: BTreeMap<(String, String, Interaction), usize> = BTreeMap::new();
    for t in t0..=last {
        for (s, d, m) in g.interactions_at(t) {
            let (Some(ts), Some(td)) = (
                &g.node(s).expect("edge").track_id,
                &g.node(d).expect("edge").track_id,
            ) else {
                continue;
            };
            if first.contains_key(ts) && first.contains_key(td) {
                *counts.entry((ts.clone(), td.clone(), m)).or_insert(0) += 1;
            }
        }
    }
    let (diff, same): (Vec<_>, Vec<_>) = counts
        .iter()
        .partition(|((a, b, _), _)| disjoint(first[a], first[b]));
    let prefer_diff = rng.random::<f64>() < cfg.p_diff;
    let selected = match (prefer_diff, diff.is_empty(), same.is_empty()) {
        (_, true, true) => return fail("no_interactions"),
        (true, false, _) | (false, false, true) => &diff,
        _ => &same,
    };
    let best = selected.iter().map(|(_, c)| **c).max().expect("non-empty");
    let ((ta, tb, m), count) = *selected
        .iter()
        .find(|(_, c)| **c == best)
        .expect("max exists");
    let correct = format!("{} {} {}", object_label(1), m.phrase(), object_label(2));
    let observed: BTreeSet<Interaction> = counts
        .keys()
        .filter(|(a, b, _)| a == ta && b == tb)
        .map(|(_, _, x)| *x)
        .collect();
    let pool: Vec<String> = Interaction::ALL
        .into_iter()
        .filter(|x| !observed.contains(x))
        .map(|x| format!("{} {} {}", object_label(1), x.phrase(), object_label(2)))
        .collect();
    let (options, answer) = choose_options(correct, &pool, cfg.k, rng)?;
    let (na, nb) = (first[ta], first[tb]);
    let pair_disjoint = disjoint(na, nb);
    let frames: Vec<usize> = (t0..=last).collect();
    let mut certificate = Certificate::new(if pair_disjoint {
        Constraint::DisjointCameras
    } else {
        Constraint::None
    })
    .with("interaction", m)
    .with("count", count)
    .with("frames", &frames);
    certificate.objects = vec![cert(ctx.scene, "1", na), cert(ctx.scene, "2", nb)];
    Ok(Draft {
        question: format!(
            "Given this video sequence, what is the interaction between {} and {}? <video>",
            object_label(1),
            object_label(2)
        ),
        preamble: Some(INTERACTION_DEFINITIONS.to_string()),
        assets: tracked_video(ctx, &frames, &[(na, tag(1)), (nb, tag(2))]),
        frames,
        option_assets: Vec::new(),
        options: Some(options),
        answer: Answer::Index(answer),
        certificate,
    })
}
