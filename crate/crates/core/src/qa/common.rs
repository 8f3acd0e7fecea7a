use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::camera::ordered_cameras;
use crate::graph::{Node, Relation, SceneGraph};
use crate::render::Highlight;
use crate::schema::{Category, Scene};

use super::{Asset, AssetSpec, CertObject};

pub(crate) type Rng8 = ChaCha8Rng;
pub(crate) type GenResult<T> = Result<T, String>;

/// Egocentric direction phrases in ring order.
pub const EGO_PHRASES: [(Relation, &str); 8] = [
    (Relation::Ahead, "in front of you"),
    (Relation::Behind, "behind you"),
    (Relation::LeftOf, "on your left"),
    (Relation::RightOf, "on your right"),
    (Relation::AheadLeft, "ahead and to your left"),
    (Relation::AheadRight, "ahead and to your right"),
    (Relation::RearLeft, "behind and to your left"),
    (Relation::RearRight, "behind and to your right"),
];

pub const ALLOCENTRIC_PHRASES: [(Relation, &str); 4] = [
    (Relation::Ahead, "in front of you"),
    (Relation::Behind, "behind you"),
    (Relation::LeftOf, "on your left"),
    (Relation::RightOf, "on your right"),
];

pub fn relation_phrase_ego(r: Relation) -> &'static str {
    EGO_PHRASES
        .iter()
        .find(|(x, _)| *x == r)
        .map(|(_, p)| *p)
        .expect("every relation has a phrase")
}

pub fn object_label(id: usize) -> String {
    format!("Object-{id}")
}

/// "2 cars, 1 pedestrian"; "None" when empty.
pub fn format_counts(counts: &BTreeMap<Category, usize>) -> String {
    let parts: Vec<String> = Category::ALL
        .iter()
        .filter_map(|c| {
            let n = *counts.get(c)?;
            (n > 0).then(|| format!("{n} {}", if n == 1 { c.noun() } else { c.plural() }))
        })
        .collect();
    if parts.is_empty() {
        "None".to_string()
    } else {
        parts.join(", ")
    }
}

pub(crate) fn fail<T>(constraint: &str) -> GenResult<T> {
    Err(constraint.to_string())
}

pub(crate) fn camera_set(node: &Node) -> BTreeSet<&str> {
    node.cameras.iter().map(String::as_str).collect()
}

pub(crate) fn disjoint(a: &Node, b: &Node) -> bool {
    !a.cameras.is_empty() && !b.cameras.is_empty() && camera_set(a).is_disjoint(&camera_set(b))
}

/// Object nodes of frame `t` seen by at least one camera.
pub(crate) fn visible(graph: &SceneGraph, t: usize) -> Vec<&Node> {
    graph
        .frame_objects(t)
        .filter(|n| !n.cameras.is_empty())
        .collect()
}

pub(crate) fn obj_index(node: &Node) -> usize {
    node.key.object.expect("object node")
}

pub(crate) fn cert(scene: &Scene, role: impl Into<String>, node: &Node) -> CertObject {
    CertObject {
        role: role.into(),
        frame: node.key.frame,
        object: obj_index(node),
        track_id: node.track_id.clone(),
        cameras: ordered_cameras(scene.source(), &node.cameras),
    }
}

pub(crate) fn multiview(scene: &Scene, frame: usize, highlights: Vec<Highlight>) -> Asset {
    AssetSpec::Multiview {
        scene_id: scene.scene_id.clone(),
        frame,
        highlights,
    }
    .into()
}

/// Image label drawn next to a highlighted object.
pub(crate) fn tag(id: usize) -> String {
    format!("({id})")
}

/// Shuffles `correct` in among `distractors`; returns options and the answer index.
pub(crate) fn shuffle_options(
    correct: String,
    distractors: Vec<String>,
    rng: &mut Rng8,
) -> GenResult<(Vec<String>, usize)> {
    let mut all = vec![correct.clone()];
    for d in distractors {
        if all.contains(&d) {
            return fail("duplicate_option");
        }
        all.push(d);
    }
    all.shuffle(rng);
    let idx = all
        .iter()
        .position(|o| *o == correct)
        .expect("correct option present");
    Ok((all, idx))
}

/// Up to `n` distinct entries of `pool` other than `exclude`, in sampled order.
pub(crate) fn sample_distinct(
    pool: &[String],
    exclude: &str,
    n: usize,
    rng: &mut Rng8,
) -> Vec<String> {
    let uniq: BTreeSet<&String> = pool.iter().filter(|s| s.as_str() != exclude).collect();
    let uniq: Vec<&String> = uniq.into_iter().collect();
    uniq.choose_multiple(rng, n).map(|s| (*s).clone()).collect()
}

/// Samples `k` distinct options: the correct one plus `k − 1` distractors from `pool`.
pub(crate) fn choose_options(
    correct: String,
    pool: &[String],
    k: usize,
    rng: &mut Rng8,
) -> GenResult<(Vec<String>, usize)> {
    let distractors = sample_distinct(pool, &correct, k - 1, rng);
    if distractors.len() < k - 1 {
        return fail("too_few_distractors");
    }
    shuffle_options(correct, distractors, rng)
}

pub(crate) fn pick<'a, T>(items: &'a [T], rng: &mut Rng8, constraint: &str) -> GenResult<&'a T> {
    items.choose(rng).ok_or_else(|| constraint.to_string())
}

/// A random start frame for a window of `len` frames plus `tail` extra frames after it.
pub(crate) fn window_start(
    n_frames: usize,
    len: usize,
    tail: usize,
    rng: &mut Rng8,
) -> GenResult<usize> {
    if len == 0 || n_frames < len + tail {
        return fail("scene_too_short");
    }
    Ok(rng.random_range(0..=n_frames - len - tail))
}

/// Per-frame node of a first-frame object, followed by track.
pub(crate) fn follow<'a>(graph: &'a SceneGraph, first: &Node, t: usize) -> Option<&'a Node> {
    match &first.track_id {
        Some(track) => graph.track_node(track, t),
        None if t == first.key.frame => graph.node(first.key),
        None => None,
    }
}
