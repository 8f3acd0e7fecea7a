//! Decodes each generated item back into claims about its scene and checks them.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use nalgebra::{Rotation3, Vector3};
use sceneqa::camera::{camera_order, front_camera};
use sceneqa::graph::{Action, EdgeLabel, Interaction, NodeKey, Relation, SceneGraph};
use sceneqa::qa::corpus::{generate_all, GenerationReport, Quotas};
use sceneqa::qa::{
    generate, Answer, AssetSpec, Constraint, GenContext, GeneratorConfig, QAItem, TaskId,
};
use sceneqa::schema::{Category, ObjectAnnotation, Scene};

use super::*;

pub const PER_TASK: usize = 50;
const FLOOR: f64 = 0.1;
const THETA_V: f64 = 0.6;

pub fn corpus() -> &'static (Vec<QAItem>, GenerationReport) {
    static C: OnceLock<(Vec<QAItem>, GenerationReport)> = OnceLock::new();
    C.get_or_init(|| {
        generate_all(
            pool(),
            &Quotas::uniform(PER_TASK),
            &GeneratorConfig::with_seed(POOL_SEED),
        )
    })
}

struct Ctx<'a> {
    item: &'a QAItem,
    scene: &'a Scene,
    graph: &'a SceneGraph,
}

impl<'a> Ctx<'a> {
    fn obj(&self, frame: usize, i: usize) -> &'a ObjectAnnotation {
        &self.scene.frames[frame].objects[i]
    }

    fn role(&self, role: &str) -> Result<(usize, usize), String> {
        self.item
            .certificate
            .object(role)
            .map(|o| (o.frame, o.object))
            .ok_or_else(|| format!("certificate lacks role {role}"))
    }

    fn detail<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<T, String> {
        let v = self
            .item
            .certificate
            .detail(key)
            .ok_or_else(|| format!("certificate lacks {key}"))?;
        serde_json::from_value(v.clone()).map_err(|e| format!("{key}: {e}"))
    }

    fn options(&self) -> &'a [String] {
        self.item.options.as_deref().unwrap_or(&[])
    }

    fn first(&self) -> usize {
        self.item.frames[0]
    }

    fn last(&self) -> usize {
        *self.item.frames.last().unwrap()
    }

    /// Object id (1-based index in the first frame) to track.
    fn id_tracks(&self) -> BTreeMap<usize, String> {
        self.scene.frames[self.first()]
            .objects
            .iter()
            .enumerate()
            .filter_map(|(i, o)| o.track_id.clone().map(|t| (i + 1, t)))
            .collect()
    }

    fn track_index(&self, track: &str, frame: usize) -> Option<usize> {
        self.scene
            .frames
            .get(frame)?
            .objects
            .iter()
            .position(|o| o.track_id.as_deref() == Some(track))
    }

    fn actions_of(&self, track: &str, frame: usize) -> BTreeSet<Action> {
        let Some(i) = self.track_index(track, frame) else {
            return BTreeSet::new();
        };
        let key = NodeKey::object(frame, i);
        self.graph
            .actions
            .iter()
            .filter(|e| e.src == key)
            .filter_map(|e| match e.label {
                EdgeLabel::Action(a) => Some(a),
                _ => None,
            })
            .collect()
    }

    fn interactions_of(&self, a: &str, b: &str, frame: usize) -> BTreeSet<Interaction> {
        let (Some(i), Some(j)) = (self.track_index(a, frame), self.track_index(b, frame)) else {
            return BTreeSet::new();
        };
        let (ki, kj) = (NodeKey::object(frame, i), NodeKey::object(frame, j));
        self.graph
            .interactions
            .iter()
            .filter(|e| e.src == ki && e.dst == kj)
            .filter_map(|e| match e.label {
                EdgeLabel::Interaction(m) => Some(m),
                _ => None,
            })
            .collect()
    }
}

fn parse_id(s: &str) -> Result<usize, String> {
    s.strip_prefix("Object-")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| format!("bad object label {s:?}"))
}

fn parse_range(s: &str, unit: &str) -> Result<(f64, f64), String> {
    let body = s
        .strip_suffix(unit)
        .ok_or_else(|| format!("bad range {s:?}"))?
        .trim();
    let (lo, hi) = body
        .split_once('-')
        .ok_or_else(|| format!("bad range {s:?}"))?;
    Ok((
        lo.parse().map_err(|_| s.to_string())?,
        hi.parse().map_err(|_| s.to_string())?,
    ))
}

fn parse_counts(s: &str) -> Result<BTreeMap<Category, usize>, String> {
    let mut out = BTreeMap::new();
    if s == "None" {
        return Ok(out);
    }
    for part in s.split(", ") {
        let (n, word) = part
            .split_once(' ')
            .ok_or_else(|| format!("bad count {part:?}"))?;
        let n: usize = n.parse().map_err(|_| format!("bad count {part:?}"))?;
        let cat = Category::ALL
            .into_iter()
            .find(|c| (n == 1 && c.noun() == word) || (n != 1 && c.plural() == word))
            .ok_or_else(|| format!("bad category {word:?}"))?;
        if out.insert(cat, n).is_some() {
            return Err(format!("repeated category in {s:?}"));
        }
    }
    Ok(out)
}

fn yes_no_truth(yes: bool) -> Vec<bool> {
    vec![yes, !yes]
}

fn ego_phrase(r: Relation) -> &'static str {
    match r {
        Relation::Ahead => "in front of you",
        Relation::Behind => "behind you",
        Relation::LeftOf => "on your left",
        Relation::RightOf => "on your right",
        Relation::AheadLeft => "ahead and to your left",
        Relation::AheadRight => "ahead and to your right",
        Relation::RearLeft => "behind and to your left",
        Relation::RearRight => "behind and to your right",
    }
}

fn relation_words(r: Relation) -> &'static str {
    match r {
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

fn center(o: &ObjectAnnotation) -> Vector3<f64> {
    vec3(o.center)
}

fn pair_distance(c: &Ctx<'_>) -> Result<f64, String> {
    let (f1, i1) = c.role("1")?;
    let (f2, i2) = c.role("2")?;
    Ok((center(c.obj(f1, i1)) - center(c.obj(f2, i2))).norm())
}

// ------------------------------------------------------------------ shape and certificates

fn check_shape(c: &Ctx<'_>) -> Result<(), String> {
    let item = c.item;
    if item.question.contains("<object-id>")
        || !(item.question.contains("<image>") || item.question.contains("<video>"))
    {
        return Err("question placeholders".into());
    }
    if item.ability != item.task_id.ability() || item.seed != POOL_SEED {
        return Err("ability or seed mismatch".into());
    }
    if item.task_id.is_numeric() {
        return match (&item.options, &item.answer) {
            (None, Answer::Value(v)) if v.is_finite() => Ok(()),
            _ => Err("numeric item shape".into()),
        };
    }
    let opts = item.options.as_ref().ok_or("missing options")?;
    let binary = matches!(
        item.task_id,
        TaskId::SpatialCompatibility | TaskId::MultiviewObjectMatching | TaskId::DepthAwareness
    );
    if opts.len() != if binary { 2 } else { 4 } {
        return Err(format!("{} options", opts.len()));
    }
    if opts.iter().collect::<BTreeSet<_>>().len() != opts.len() {
        return Err("duplicate options".into());
    }
    if !item.option_assets.is_empty() && item.option_assets.len() != opts.len() {
        return Err("option asset count".into());
    }
    match item.answer {
        Answer::Index(i) if i < opts.len() => {}
        _ => return Err("answer index".into()),
    }
    if item.question.contains("<video>") && item.assets.len() != item.frames.len() {
        return Err("video frames and assets differ".into());
    }
    for a in item.assets.iter().chain(&item.option_assets) {
        if a.path != a.spec.path() {
            return Err("asset path".into());
        }
    }
    Ok(())
}

fn check_certificate(c: &Ctx<'_>) -> Result<(), String> {
    let cert = &c.item.certificate;
    for o in &cert.objects {
        let obj = c.obj(o.frame, o.object);
        if seen_by(c.scene, obj, FLOOR) != o.cameras {
            return Err(format!(
                "certificate cameras for {} differ from projections",
                o.role
            ));
        }
        if obj.track_id != o.track_id {
            return Err("certificate track".into());
        }
    }
    let cams = |role: &str| -> Result<BTreeSet<String>, String> {
        let o = cert.object(role).ok_or_else(|| format!("missing {role}"))?;
        Ok(seen_by(c.scene, c.obj(o.frame, o.object), FLOOR)
            .into_iter()
            .collect())
    };
    match cert.constraint {
        Constraint::DisjointCameras => {
            let (a, b) = if c.item.task_id == TaskId::MultiStepReasoning {
                ("target", "answer")
            } else {
                ("1", "2")
            };
            let (ca, cb) = (cams(a)?, cams(b)?);
            if ca.is_empty() || cb.is_empty() || !ca.is_disjoint(&cb) {
                return Err("cameras not disjoint".into());
            }
        }
        Constraint::MultiCamera => {
            if cams("1")?.len() < 2 {
                return Err("single-camera identity".into());
            }
        }
        Constraint::DiverseCameras => {
            let sets: Vec<BTreeSet<String>> = cert
                .objects
                .iter()
                .map(|o| {
                    seen_by(c.scene, c.obj(o.frame, o.object), FLOOR)
                        .into_iter()
                        .collect()
                })
                .collect();
            for i in 0..sets.len() {
                for j in i + 1..sets.len() {
                    if !sets[i].is_disjoint(&sets[j]) {
                        return Err("diverse cameras overlap".into());
                    }
                }
            }
        }
        Constraint::SamePool | Constraint::None => {}
    }
    Ok(())
}

fn check_pair_highlights(c: &Ctx<'_>) -> Result<(), String> {
    let (f1, i1) = c.role("1")?;
    let (_, i2) = c.role("2")?;
    match &c.item.assets[0].spec {
        AssetSpec::Multiview {
            frame, highlights, ..
        } if *frame == f1 => {
            let got: Vec<(usize, &str)> = highlights
                .iter()
                .map(|h| (h.object, h.text.as_str()))
                .collect();
            if got == [(i1, "(1)"), (i2, "(2)")] {
                Ok(())
            } else {
                Err("pair highlights".into())
            }
        }
        _ => Err("pair asset".into()),
    }
}

// ------------------------------------------------------------------ construction tasks

fn pool_truth(c: &Ctx<'_>, scenes: &[Scene]) -> Result<Vec<bool>, String> {
    let ids: Vec<&str> = c
        .item
        .option_assets
        .iter()
        .map(|a| a.spec.scene_id())
        .collect();
    if ids.iter().collect::<BTreeSet<_>>().len() != ids.len() {
        return Err("repeated option scene".into());
    }
    let st = |s: &Scene| s.metadata.scene_type.as_ref().map(|a| a.value);
    for id in &ids {
        let s = &scenes[scene_by_id(scenes, id)];
        if s.source() != c.scene.source() || st(s) != st(c.scene) || st(s).is_none() {
            return Err("option scene outside the matching pool".into());
        }
    }
    for a in &c.item.option_assets {
        match (&a.spec, c.item.task_id) {
            (AssetSpec::Bev { frame, .. }, TaskId::SceneConstruction) if *frame == c.first() => {}
            (AssetSpec::Camera { frame, camera, .. }, TaskId::PerspectiveCameraMatching)
                if *frame == c.first() && camera == front_camera(c.scene.source()) => {}
            _ => return Err("option asset kind".into()),
        }
    }
    Ok(ids.iter().map(|id| *id == c.scene.scene_id).collect())
}

fn yaw_from_rows(r: [[f64; 4]; 4]) -> f64 {
    r[1][0].atan2(r[0][0])
}

fn ego_rotation_truth(c: &Ctx<'_>) -> Result<Vec<bool>, String> {
    let [t1, t2] = c.item.frames[..] else {
        return Err("frames".into());
    };
    if t2 - t1 != 3 {
        return Err("gap".into());
    }
    let y1 = yaw_from_rows(c.scene.frames[t1].ego_pose.rows());
    let y2 = yaw_from_rows(c.scene.frames[t2].ego_pose.rows());
    let theta = wrap_angle(y2 - y1).abs().to_degrees();
    c.options()
        .iter()
        .map(|o| {
            let (lo, hi) = parse_range(o, "degrees")?;
            Ok(lo <= theta + 1e-9 && (theta < hi - 1e-9 || (hi == 180.0 && theta <= 180.0)))
        })
        .collect()
}

fn camera_ordering_truth(c: &Ctx<'_>) -> Result<Vec<bool>, String> {
    let AssetSpec::CameraGrid { order, frame, .. } = &c.item.assets[0].spec else {
        return Err("grid asset".into());
    };
    let f = &c.scene.frames[*frame];
    let canonical: Vec<&str> = camera_order(c.scene.source())
        .iter()
        .map(|s| s.name)
        .filter(|n| f.camera(n).is_some())
        .collect();
    if order.len() != canonical.len() {
        return Err("grid size".into());
    }
    c.options()
        .iter()
        .map(|o| {
            let decoded: Vec<&str> = o
                .split('→')
                .map(|l| {
                    let k = (l.as_bytes()[0] - b'A') as usize;
                    canonical[order[k]]
                })
                .collect();
            Ok(decoded == canonical)
        })
        .collect()
}

fn masked_truth(c: &Ctx<'_>) -> Result<Vec<bool>, String> {
    if c.item.frames.len() != 6 {
        return Err("sequence length".into());
    }
    let masked = c
        .item
        .assets
        .iter()
        .skip(1)
        .map(|a| match &a.spec {
            AssetSpec::Masked { camera, .. } => Ok(camera.clone()),
            _ => Err("masked asset".to_string()),
        })
        .collect::<Result<BTreeSet<_>, _>>()?;
    if masked.len() != 1 {
        return Err("one masked camera".into());
    }
    let camera = masked.into_iter().next().unwrap();
    if camera == front_camera(c.scene.source()) {
        return Err("front camera masked".into());
    }
    let mut recount: BTreeMap<Category, usize> = BTreeMap::new();
    for o in &c.scene.frames[c.last()].objects {
        if o.projections
            .iter()
            .any(|p| p.camera_name == camera && p.visibility >= FLOOR)
        {
            *recount.entry(o.category).or_default() += 1;
        }
    }
    c.options()
        .iter()
        .map(|o| Ok(parse_counts(o)? == recount))
        .collect()
}

// ------------------------------------------------------------------ relational tasks

fn quarter_turns(maneuver: &str) -> Option<i32> {
    match maneuver {
        "decelerating" | "accelerating" => Some(0),
        "turning left" => Some(1),
        "turning right" => Some(-1),
        "making a U-turn" => Some(2),
        _ => None,
    }
}

fn maneuver_plausible(ego_to_target: Relation, maneuver: &str) -> bool {
    match ego_to_target {
        Relation::Ahead | Relation::AheadLeft | Relation::AheadRight => {
            matches!(
                maneuver,
                "decelerating" | "accelerating" | "turning left" | "turning right"
            )
        }
        Relation::LeftOf | Relation::RearLeft => maneuver == "turning left",
        Relation::RightOf | Relation::RearRight => maneuver == "turning right",
        Relation::Behind => maneuver == "making a U-turn",
    }
}

fn multi_step_truth(c: &Ctx<'_>) -> Result<Vec<bool>, String> {
    let (t, ti) = c.role("target")?;
    let (_, ai) = c.role("answer")?;
    let target = c.obj(t, ti);
    let rel = |o: &ObjectAnnotation| {
        oracle_relation(target.center, target.yaw, target.size, o.center, 1.0)
    };
    let raw = rel(c.obj(t, ai)).ok_or("answer has no relation")?;
    let ego = oracle_relation(
        [0.0; 3],
        0.0,
        c.scene.metadata.ego_type.size(),
        target.center,
        1.0,
    )
    .ok_or("target has no ego relation")?;
    let maneuver: String = c.detail("maneuver")?;
    let q = quarter_turns(&maneuver).ok_or("unknown maneuver")?;
    if !maneuver_plausible(ego, &maneuver) {
        return Err(format!("{maneuver} implausible for target {ego:?}"));
    }
    let asked = relation_at_bearing(relation_bearing(raw) - 90 * q);
    let expected = format!(
        "If the ego vehicle is {maneuver} and following Object-1. What is the object {} yourself?",
        relation_words(asked)
    );
    if !c.item.question.contains(&expected) {
        return Err(format!("question does not ask {asked:?}"));
    }
    let objects: Vec<usize> = c.detail("option_objects")?;
    if c.item.preamble.is_none() {
        return Err("missing definitions".into());
    }
    objects
        .iter()
        .map(|&k| {
            let o = c.obj(t, k);
            if seen_by(c.scene, o, FLOOR).is_empty() || k == ti {
                return Err("option object not visible".to_string());
            }
            Ok(rel(o) == Some(raw))
        })
        .collect()
}

fn allocentric_truth(c: &Ctx<'_>) -> Result<Vec<bool>, String> {
    check_pair_highlights(c)?;
    let (f, a) = c.role("1")?;
    let (_, b) = c.role("2")?;
    let (me, other) = (c.obj(f, a), c.obj(f, b));
    let r = oracle_relation(me.center, me.yaw, me.size, other.center, 1.0).ok_or("no relation")?;
    if !matches!(
        r,
        Relation::Ahead | Relation::Behind | Relation::LeftOf | Relation::RightOf
    ) {
        return Err("non-cardinal relation".into());
    }
    Ok(c.options().iter().map(|o| o == ego_phrase(r)).collect())
}

fn compat_truth(c: &Ctx<'_>) -> Result<Vec<bool>, String> {
    check_pair_highlights(c)?;
    let d = pair_distance(c)?;
    if d >= 8.0 {
        return Err("pair beyond candidate radius".into());
    }
    Ok(yes_no_truth(d > 5.0))
}

fn matching_truth(c: &Ctx<'_>) -> Result<Vec<bool>, String> {
    let (f, a) = c.role("1")?;
    let (_, b) = c.role("2")?;
    let views: Vec<String> = c.detail("views")?;
    let AssetSpec::Multiview { highlights, .. } = &c.item.assets[0].spec else {
        return Err("asset".into());
    };
    let hl: Vec<(usize, Option<&str>)> = highlights
        .iter()
        .map(|h| (h.object, h.camera.as_deref()))
        .collect();
    if hl != [(a, Some(views[0].as_str())), (b, Some(views[1].as_str()))] {
        return Err("highlights do not pin the views".into());
    }
    let (oa, ob) = (c.obj(f, a), c.obj(f, b));
    let (ca, cb) = (seen_by(c.scene, oa, FLOOR), seen_by(c.scene, ob, FLOOR));
    if !ca.contains(&views[0]) || !cb.contains(&views[1]) || views[0] == views[1] {
        return Err("views not backed by projections".into());
    }
    let same = a == b;
    if !same {
        let disjoint = ca.iter().all(|x| !cb.contains(x));
        if !disjoint || (oa.track_id.is_some() && oa.track_id == ob.track_id) {
            return Err("different-object pair not disjoint".into());
        }
    }
    Ok(yes_no_truth(same))
}

fn depth_truth(c: &Ctx<'_>) -> Result<Vec<bool>, String> {
    check_pair_highlights(c)?;
    let (f, a) = c.role("1")?;
    let (_, b) = c.role("2")?;
    let (r1, r2) = (center(c.obj(f, a)).norm(), center(c.obj(f, b)).norm());
    if (r1 - r2).abs() <= 2.0 {
        return Err("ranges within margin".into());
    }
    Ok(yes_no_truth(r1 < r2))
}

fn direction_truth(c: &Ctx<'_>) -> Result<Vec<bool>, String> {
    let (f, a) = c.role("1")?;
    let r = oracle_relation(
        [0.0; 3],
        0.0,
        c.scene.metadata.ego_type.size(),
        c.obj(f, a).center,
        1.0,
    )
    .ok_or("no ego relation")?;
    Ok(c.options().iter().map(|o| o == ego_phrase(r)).collect())
}

fn relative_distance_truth(c: &Ctx<'_>) -> Result<Vec<bool>, String> {
    check_pair_highlights(c)?;
    let d = pair_distance(c)?;
    if !(d > 5.0 && d < 50.0) {
        return Err("distance outside range".into());
    }
    let width = if d < 10.0 {
        1.0
    } else if d < 20.0 {
        2.0
    } else {
        5.0
    };
    let mut lows = Vec::new();
    let truth = c
        .options()
        .iter()
        .map(|o| {
            let (lo, hi) = parse_range(o, "meters")?;
            if (hi - lo - width).abs() > 1e-9 || lo <= 0.0 {
                return Err(format!("bin {o:?} has the wrong width"));
            }
            lows.push(lo);
            Ok(lo <= d && d < hi)
        })
        .collect::<Result<Vec<_>, _>>()?;
    if lows.windows(2).any(|w| w[0] >= w[1]) {
        return Err("options not sorted".into());
    }
    Ok(truth)
}

fn distance_absolute_check(c: &Ctx<'_>) -> Result<(), String> {
    let d = pair_distance(c)?;
    let Answer::Value(v) = c.item.answer else {
        return Err("answer kind".into());
    };
    if !(d > 5.0 && d < 50.0) || (v - (d * 10.0).round() / 10.0).abs() > 1e-9 || v <= 0.0 {
        return Err(format!("distance {d} answered {v}"));
    }
    Ok(())
}

fn counting_check(c: &Ctx<'_>) -> Result<(), String> {
    let cat: Category = c.detail("category")?;
    if !c
        .item
        .question
        .contains(&format!("how many {} are visible", cat.plural()))
    {
        return Err("question category".into());
    }
    let n = c.scene.frames[c.first()]
        .objects
        .iter()
        .filter(|o| o.category == cat && !seen_by(c.scene, o, FLOOR).is_empty())
        .count();
    if c.item.answer != Answer::Value(n as f64) {
        return Err(format!("recount {n} vs {:?}", c.item.answer));
    }
    Ok(())
}

// ------------------------------------------------------------------ temporal tasks

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fate {
    Visible,
    Occluded,
    Gone,
}

fn fate(c: &Ctx<'_>, track: &str) -> Fate {
    match c.track_index(track, c.last()).map(|i| c.obj(c.last(), i)) {
        None => Fate::Gone,
        Some(o) if o.projections.is_empty() => Fate::Gone,
        Some(o) if max_vis(o) < THETA_V => Fate::Occluded,
        Some(_) => Fate::Visible,
    }
}

fn trajectory_truth(c: &Ctx<'_>) -> Result<Vec<bool>, String> {
    let first = &c.scene.frames[c.first()].objects;
    c.options()
        .iter()
        .map(|o| {
            let (label, reason) = o.split_once(": ").ok_or("option form")?;
            let id = parse_id(label)?;
            let Some(obj) = first.get(id - 1) else {
                return Ok(false);
            };
            let Some(track) = &obj.track_id else {
                return Ok(false);
            };
            if max_vis(obj) < THETA_V || seen_by(c.scene, obj, FLOOR).is_empty() {
                return Ok(false);
            }
            Ok(match reason {
                "passed by" => fate(c, track) == Fate::Gone,
                "occluded" => fate(c, track) == Fate::Occluded,
                _ => return Err(format!("reason {reason:?}")),
            })
        })
        .collect()
}

fn occlusion_truth(c: &Ctx<'_>) -> Result<Vec<bool>, String> {
    let occluded: BTreeSet<usize> = c
        .id_tracks()
        .into_iter()
        .filter(|(id, track)| {
            !seen_by(c.scene, c.obj(c.first(), id - 1), FLOOR).is_empty()
                && fate(c, track) == Fate::Occluded
        })
        .map(|(id, _)| id)
        .collect();
    let expected: Vec<usize> = occluded.iter().copied().take(3).collect();
    let truth: Vec<bool> = c
        .options()
        .iter()
        .map(|o| {
            let ids: Vec<usize> = if o == "None" {
                Vec::new()
            } else {
                o.split(", ").map(parse_id).collect::<Result<_, _>>()?
            };
            if ids.windows(2).any(|w| w[0] >= w[1]) {
                return Err("ids not sorted".to_string());
            }
            Ok(ids.len() == expected.len() && ids.iter().all(|i| occluded.contains(i)))
        })
        .collect::<Result<_, _>>()?;
    let answer = &c.options()[c.item.answer.index().unwrap()];
    let want = if expected.is_empty() {
        "None".to_string()
    } else {
        expected
            .iter()
            .map(|i| format!("Object-{i}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    if *answer != want {
        return Err(format!("answer {answer:?} expected {want:?}"));
    }
    Ok(truth)
}

enum Claim {
    Disappears,
    Transfer(String, String),
    Appear(String),
    Beside(bool, usize),
    MovingIn(String),
}

fn parse_claim(c: &Ctx<'_>, s: &str) -> Result<Claim, String> {
    let cam = |d: &str| {
        camera_by_description(c.scene.source(), d)
            .map(str::to_string)
            .ok_or_else(|| format!("unknown camera {d:?}"))
    };
    if s == "Disappears from all cameras" {
        return Ok(Claim::Disappears);
    }
    if let Some(rest) = s.strip_prefix("Disappear from ") {
        let (x, y) = rest.split_once(" then appear in ").ok_or("transfer form")?;
        return Ok(Claim::Transfer(cam(x)?, cam(y)?));
    }
    if let Some(y) = s.strip_prefix("Appear in ") {
        return Ok(Claim::Appear(cam(y)?));
    }
    if let Some(rest) = s.strip_prefix("Moving on the ") {
        let (side, label) = rest.split_once(" side of ").ok_or("side form")?;
        return Ok(Claim::Beside(side == "left", parse_id(label)?));
    }
    if let Some(x) = s.strip_prefix("Moving in ") {
        return Ok(Claim::MovingIn(cam(x)?));
    }
    Err(format!("unknown claim {s:?}"))
}

fn manipulation_truth(c: &Ctx<'_>) -> Result<Vec<bool>, String> {
    let (t, i) = c.role("moved")?;
    if t != c.last() || t + 1 >= c.scene.frames.len() {
        return Err("manipulated frame".into());
    }
    let rot: f64 = c.detail("rotation_deg")?;
    let kmh: f64 = c.detail("speed_kmh")?;
    let node = c.graph.node(NodeKey::object(t, i)).ok_or("node")?;
    let v = vec3(node.velocity);
    if v.norm() <= 0.5 {
        return Err("object not moving".into());
    }
    let heading = Vector3::new(v.x, v.y, 0.0).normalize();
    let obj = c.obj(t, i);
    let c0 = center(obj);
    let moved = c0
        + Rotation3::from_axis_angle(&Vector3::z_axis(), rot.to_radians())
            * heading
            * (kmh / 3.6 * 0.5);
    let recorded: [f64; 3] = c.detail("moved_center")?;
    if (vec3(recorded) - moved).norm() > 1e-9 {
        return Err("simulated centre".into());
    }
    let ids = c.id_tracks();
    let track = obj.track_id.clone().ok_or("untracked")?;
    let id = ids
        .iter()
        .find(|(_, tr)| **tr == track)
        .map(|(id, _)| *id)
        .ok_or("object not in first frame")?;
    if !c
        .item
        .question
        .contains(&format!("what if Object-{id} rotates "))
    {
        return Err("question object".into());
    }
    let before = cameras_containing(c.scene, t, &c0);
    let after = cameras_containing(c.scene, t, &moved);
    let back = rigid_inverse(&pose_matrix(&c.scene.frames[t].ego_pose));
    let fwd = pose_matrix(&c.scene.frames[t + 1].ego_pose);
    let neighbours: Vec<(usize, Vector3<f64>)> = c.scene.frames[t + 1]
        .objects
        .iter()
        .filter_map(|o| {
            let tr = o.track_id.as_ref()?;
            if *tr == track {
                return None;
            }
            let nid = ids.iter().find(|(_, x)| *x == tr)?.0;
            Some((*nid, apply(&back, &apply(&fwd, &center(o)))))
        })
        .collect();
    let near = |k: usize| -> Option<Vector3<f64>> {
        neighbours
            .iter()
            .find(|(n, p)| *n == k && (moved - p).xy().norm() < 30.0)
            .map(|(_, p)| *p)
    };

    let exit: Vec<&String> = before.iter().filter(|x| !after.contains(x)).collect();
    let enter: Vec<&String> = after.iter().filter(|x| !before.contains(x)).collect();
    let expected = if after.is_empty() {
        "Disappears from all cameras".to_string()
    } else if let (Some(x), Some(y)) = (exit.first(), enter.first()) {
        format!(
            "Disappear from {} then appear in {}",
            desc(c, x),
            desc(c, y)
        )
    } else if let Some(y) = enter.first() {
        format!("Appear in {}", desc(c, y))
    } else {
        let nearest = neighbours
            .iter()
            .map(|(k, p)| ((moved - p).xy().norm(), *k, *p))
            .filter(|(d, _, _)| *d < 30.0)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match nearest {
            Some((_, k, p)) => format!(
                "Moving on the {} side of Object-{k}",
                if moved.y > p.y { "left" } else { "right" }
            ),
            None => format!("Moving in {}", desc(c, &after[0])),
        }
    };
    let answer = &c.options()[c.item.answer.index().unwrap()];
    if *answer != expected {
        return Err(format!("outcome {answer:?} expected {expected:?}"));
    }
    c.options()
        .iter()
        .map(|o| {
            Ok(match parse_claim(c, o)? {
                Claim::Disappears => after.is_empty(),
                Claim::Transfer(x, y) => exit.contains(&&x) && enter.contains(&&y),
                Claim::Appear(y) => enter.contains(&&y),
                Claim::Beside(left, k) => near(k).is_some_and(|p| (moved.y > p.y) == left),
                Claim::MovingIn(x) => after.contains(&x),
            })
        })
        .collect()
}

fn desc(c: &Ctx<'_>, name: &str) -> String {
    camera_order(c.scene.source())
        .iter()
        .find(|s| s.name == name)
        .unwrap()
        .description
        .to_string()
}

fn brute_mode(c: &Ctx<'_>, track: &str) -> Option<Action> {
    let mut counts = [0usize; Action::ALL.len()];
    for &f in &c.item.frames {
        for a in c.actions_of(track, f) {
            counts[Action::ALL.iter().position(|x| *x == a).unwrap()] += 1;
        }
    }
    let best = *counts.iter().max()?;
    (best > 0).then(|| Action::ALL[counts.iter().position(|n| *n == best).unwrap()])
}

fn action_truth(c: &Ctx<'_>) -> Result<Vec<bool>, String> {
    let ids = c.id_tracks();
    let highlighted: Vec<usize> = c
        .item
        .certificate
        .objects
        .iter()
        .map(|o| parse_id(&o.role))
        .collect::<Result<_, _>>()?;
    if highlighted.len() != 3
        || c.item
            .certificate
            .objects
            .iter()
            .any(|o| o.frame != c.first())
    {
        return Err("three first-frame objects".into());
    }
    c.options()
        .iter()
        .map(|o| {
            let mut listed = Vec::new();
            let mut ok = true;
            for part in o.split(", ") {
                let (label, phrase) = part.split_once(": ").ok_or("action form")?;
                let id = parse_id(label)?;
                listed.push(id);
                let action = Action::ALL
                    .into_iter()
                    .find(|a| a.phrase() == phrase)
                    .ok_or("unknown action")?;
                let track = ids.get(&id).ok_or("untracked id")?;
                ok &= brute_mode(c, track) == Some(action);
            }
            if listed != highlighted {
                return Err("option lists other objects".to_string());
            }
            Ok(ok)
        })
        .collect()
}

fn interaction_truth(c: &Ctx<'_>) -> Result<Vec<bool>, String> {
    let (f, a) = c.role("1")?;
    let (_, b) = c.role("2")?;
    if f != c.first() || c.item.preamble.is_none() {
        return Err("pair frame or definitions".into());
    }
    let ta = c.obj(f, a).track_id.clone().ok_or("untracked")?;
    let tb = c.obj(f, b).track_id.clone().ok_or("untracked")?;
    let mut counts: BTreeMap<Interaction, usize> = BTreeMap::new();
    for &t in &c.item.frames {
        for m in c.interactions_of(&ta, &tb, t) {
            *counts.entry(m).or_default() += 1;
        }
    }
    let truth: Vec<bool> = c
        .options()
        .iter()
        .map(|o| {
            let phrase = o
                .strip_prefix("Object-1 ")
                .and_then(|r| r.strip_suffix(" Object-2"))
                .ok_or_else(|| format!("interaction form {o:?}"))?;
            let m = Interaction::ALL
                .into_iter()
                .find(|m| m.phrase() == phrase)
                .ok_or("unknown interaction")?;
            Ok::<_, String>(counts.contains_key(&m))
        })
        .collect::<Result<_, _>>()?;
    let answer = &c.options()[c.item.answer.index().unwrap()];
    let best = counts.values().max().copied().unwrap_or(0);
    let answered = Interaction::ALL
        .into_iter()
        .find(|m| answer.contains(m.phrase()))
        .unwrap();
    if counts.get(&answered) != Some(&best) {
        return Err("answer is not the most frequent interaction".into());
    }
    Ok(truth)
}

#[derive(Debug)]
enum Ev {
    Act(String, Action),
    Int(String, Interaction, String),
}

fn parse_event(s: &str, ids: &BTreeMap<usize, String>) -> Result<Ev, String> {
    let (label, rest) = s.split_once(' ').ok_or("event form")?;
    let track = ids.get(&parse_id(label)?).cloned().ok_or("untracked id")?;
    if let Some((phrase, other)) = rest.rsplit_once(" Object-") {
        if let Some(m) = Interaction::ALL.into_iter().find(|m| m.phrase() == phrase) {
            let other = ids
                .get(&other.parse::<usize>().map_err(|_| "id")?)
                .cloned()
                .ok_or("untracked id")?;
            return Ok(Ev::Int(track, m, other));
        }
    }
    let phrase = rest
        .strip_prefix("is ")
        .ok_or_else(|| format!("event form {s:?}"))?;
    let a = Action::ALL
        .into_iter()
        .find(|a| a.phrase() == phrase)
        .ok_or_else(|| format!("action {phrase:?}"))?;
    Ok(Ev::Act(track, a))
}

fn starts(c: &Ctx<'_>, e: &Ev, f: usize) -> bool {
    match e {
        Ev::Act(t, a) => c.actions_of(t, f).contains(a) && !c.actions_of(t, f - 1).contains(a),
        Ev::Int(s, m, d) => {
            c.interactions_of(s, d, f).contains(m) && !c.interactions_of(s, d, f - 1).contains(m)
        }
    }
}

fn event_truth(c: &Ctx<'_>) -> Result<Vec<bool>, String> {
    if c.item.frames.len() != 4 || c.item.preamble.is_none() {
        return Err("context shape".into());
    }
    let ctx_last = c.last();
    let t_ref = c.scene.frames[ctx_last].timestamp;
    let future: Vec<usize> = (ctx_last + 1..c.scene.frames.len())
        .filter(|&f| c.scene.frames[f].timestamp - t_ref <= 3.0 + 1e-9)
        .collect();
    let recorded: Vec<usize> = c.detail("future")?;
    if recorded != future {
        return Err("future window".into());
    }
    let ids = c.id_tracks();
    c.options()
        .iter()
        .map(|o| {
            let events: Vec<Ev> = o
                .split(", then ")
                .map(|s| parse_event(s, &ids))
                .collect::<Result<_, _>>()?;
            if events.len() > 3 {
                return Err("too many events".to_string());
            }
            let mut after = ctx_last;
            for e in &events {
                match future
                    .iter()
                    .copied()
                    .find(|&f| f > after && starts(c, e, f))
                {
                    Some(f) => after = f,
                    None => return Ok(false),
                }
            }
            Ok(true)
        })
        .collect()
}

// ------------------------------------------------------------------ driver

pub fn evaluate(item: &QAItem) -> Result<(), String> {
    let scenes = pool();
    let k = scene_by_id(scenes, &item.scene_id);
    let c = Ctx {
        item,
        scene: &scenes[k],
        graph: &graphs()[k],
    };
    check_shape(&c)?;
    check_certificate(&c)?;
    let truth = match item.task_id {
        TaskId::SceneConstruction | TaskId::PerspectiveCameraMatching => pool_truth(&c, scenes)?,
        TaskId::EgoRotation => ego_rotation_truth(&c)?,
        TaskId::CameraOrdering => camera_ordering_truth(&c)?,
        TaskId::LeaveOneCameraOut => masked_truth(&c)?,
        TaskId::MultiStepReasoning => multi_step_truth(&c)?,
        TaskId::AllocentricImagination => allocentric_truth(&c)?,
        TaskId::SpatialCompatibility => compat_truth(&c)?,
        TaskId::MultiviewObjectMatching => matching_truth(&c)?,
        TaskId::DepthAwareness => depth_truth(&c)?,
        TaskId::RelativeDirection => direction_truth(&c)?,
        TaskId::RelativeDistance => relative_distance_truth(&c)?,
        TaskId::DistanceAbsolute => return distance_absolute_check(&c),
        TaskId::CountingAbsolute => return counting_check(&c),
        TaskId::EventOrdering => event_truth(&c)?,
        TaskId::TrajectoryReasoning => trajectory_truth(&c)?,
        TaskId::OcclusionAwareness => occlusion_truth(&c)?,
        TaskId::ObjectManipulation => manipulation_truth(&c)?,
        TaskId::ActionReasoning => action_truth(&c)?,
        TaskId::InteractionReasoning => interaction_truth(&c)?,
    };
    let holding: Vec<usize> = truth
        .iter()
        .enumerate()
        .filter(|(_, t)| **t)
        .map(|(i, _)| i)
        .collect();
    if holding != [item.answer.index().unwrap()] {
        return Err(format!(
            "options holding {holding:?}, answer {:?}, options {:?}",
            item.answer, item.options
        ));
    }
    Ok(())
}

/// Share of "Yes" answers over 10k multiview matching draws.
pub fn multiview_yes_rate() -> f64 {
    let scenes = pool();
    let ctxs: Vec<GenContext<'_>> = scenes
        .iter()
        .zip(graphs())
        .map(|(scene, graph)| GenContext {
            scene,
            graph,
            pool: scenes,
        })
        .collect();
    let cfg = GeneratorConfig::with_seed(11);
    let mut yes = 0usize;
    for draw in 0..10_000u64 {
        let ctx = &ctxs[(draw % ctxs.len() as u64) as usize];
        let item = generate(
            TaskId::MultiviewObjectMatching,
            ctx,
            &cfg,
            draw / ctxs.len() as u64,
        )
        .expect("fixture scenes qualify");
        yes += usize::from(item.answer == Answer::Index(0));
    }
    yes as f64 / 10_000.0
}
