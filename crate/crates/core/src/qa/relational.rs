//! Multi-view relational tasks over single keyframes.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::graph::{Node, NodeKey, Relation, SceneGraph};
use crate::render::Highlight;
use crate::schema::Category;

use super::common::{
    cert, choose_options, disjoint, fail, multiview, obj_index, object_label, pick,
    relation_phrase_ego, shuffle_options, tag, visible, GenResult, Rng8, ALLOCENTRIC_PHRASES,
    EGO_PHRASES,
};
use super::{
    Answer, Certificate, Constraint, Draft, GenContext, GeneratorConfig, INTERACTION_DEFINITIONS,
};

/// Lower edge and width of the distance bin containing `d`.
pub fn distance_bin(d: f64) -> (f64, f64) {
    let size = if d < 10.0 {
        1.0
    } else if d < 20.0 {
        2.0
    } else {
        5.0
    };
    ((d / size).floor() * size, size)
}

fn distance_label(lo: f64, size: f64) -> String {
    format!("{}-{} meters", lo, lo + size)
}

const MANEUVERS: [(&str, i32); 5] = [
    ("decelerating", 0),
    ("accelerating", 0),
    ("turning left", 1),
    ("turning right", -1),
    ("making a U-turn", 2),
];

/// Quarter turns to the left that a hypothetical ego maneuver adds to the followed object's heading.
pub fn multistep_turns(maneuver: &str) -> Option<i32> {
    MANEUVERS
        .iter()
        .find(|(m, _)| *m == maneuver)
        .map(|(_, q)| *q)
}

/// Maneuvers that make sense for following an object at `ego_to_target`.
fn plausible_maneuvers(ego_to_target: Relation) -> &'static [&'static str] {
    match ego_to_target {
        Relation::Ahead | Relation::AheadLeft | Relation::AheadRight => &[
            "decelerating",
            "accelerating",
            "turning left",
            "turning right",
        ],
        Relation::LeftOf | Relation::RearLeft => &["turning left"],
        Relation::RightOf | Relation::RearRight => &["turning right"],
        Relation::Behind => &["making a U-turn"],
    }
}

fn keyframe_pairs<'a, F>(
    graph: &'a SceneGraph,
    ordered: bool,
    mut keep: F,
) -> Vec<(&'a Node, &'a Node)>
where
    F: FnMut(&Node, &Node) -> bool,
{
    let mut out = Vec::new();
    for t in 0..graph.frame_count {
        let vis = visible(graph, t);
        for (i, a) in vis.iter().enumerate() {
            for (j, b) in vis.iter().enumerate() {
                if i == j || (!ordered && j < i) {
                    continue;
                }
                if keep(a, b) {
                    out.push((*a, *b));
                }
            }
        }
    }
    out
}

fn distinct_tracks(a: &Node, b: &Node) -> bool {
    a.track_id.is_none() || a.track_id != b.track_id
}

fn pair_highlights(a: &Node, b: &Node) -> Vec<Highlight> {
    vec![
        Highlight::new(obj_index(a), tag(1)),
        Highlight::new(obj_index(b), tag(2)),
    ]
}

fn pair_certificate(ctx: &GenContext<'_>, a: &Node, b: &Node) -> Certificate {
    let mut c = Certificate::new(Constraint::DisjointCameras);
    c.objects = vec![cert(ctx.scene, "1", a), cert(ctx.scene, "2", b)];
    c
}

fn yes_no(yes: bool) -> (Option<Vec<String>>, Answer) {
    (
        Some(vec!["Yes".into(), "No".into()]),
        Answer::Index(if yes { 0 } else { 1 }),
    )
}

fn single_image(
    ctx: &GenContext<'_>,
    frame: usize,
    highlights: Vec<Highlight>,
) -> Vec<super::Asset> {
    vec![multiview(ctx.scene, frame, highlights)]
}

pub(crate) fn multi_step(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let g = ctx.graph;
    let candidates = keyframe_pairs(g, true, |target, answer| {
        disjoint(target, answer)
            && g.relation(target.key, answer.key).is_some()
            && g.relation(NodeKey::ego(target.key.frame), target.key)
                .is_some()
    });
    let &(target, answer) = pick(&candidates, rng, "no_disjoint_related_pair")?;
    let t = target.key.frame;
    let raw = g.relation(target.key, answer.key).expect("filtered");
    let ego_rel = g.relation(NodeKey::ego(t), target.key).expect("filtered");
    let maneuver = *plausible_maneuvers(ego_rel)
        .choose(rng)
        .expect("non-empty table");
    let turns = multistep_turns(maneuver).expect("known maneuver");
    let asked = raw.rotate_viewer_left(turns);

    let valid: Vec<&Node> = visible(g, t)
        .into_iter()
        .filter(|o| {
            o.key != target.key && o.key != answer.key && g.relation(target.key, o.key) != Some(raw)
        })
        .collect();
    if valid.len() < cfg.k - 1 {
        return fail("too_few_distractors");
    }
    let mut objects: Vec<&Node> = std::iter::once(answer)
        .chain(valid.choose_multiple(rng, cfg.k - 1).copied())
        .collect();
    objects.shuffle(rng);
    let answer_idx = objects
        .iter()
        .position(|o| o.key == answer.key)
        .expect("answer present");
    let options: Vec<String> = (0..objects.len()).map(|k| object_label(k + 2)).collect();
    let mut highlights = vec![Highlight::new(obj_index(target), tag(1))];
    highlights.extend(
        objects
            .iter()
            .enumerate()
            .map(|(k, o)| Highlight::new(obj_index(o), tag(k + 2))),
    );

    let mut certificate = Certificate::new(Constraint::DisjointCameras)
        .with("raw_relation", raw)
        .with("ego_relation", ego_rel)
        .with("maneuver", maneuver)
        .with("quarter_turns", turns)
        .with("asked_relation", asked)
        .with(
            "option_objects",
            objects.iter().map(|o| obj_index(o)).collect::<Vec<_>>(),
        );
    certificate.objects = vec![
        cert(ctx.scene, "target", target),
        cert(ctx.scene, "answer", answer),
    ];
    Ok(Draft {
        frames: vec![t],
        question: format!(
            "Given the current driving scene. If the ego vehicle is {maneuver} and following {}. What is the object {} yourself? <image>",
            object_label(1),
            asked.phrase()
        ),
        preamble: Some(INTERACTION_DEFINITIONS.to_string()),
        assets: single_image(ctx, t, highlights),
        option_assets: Vec::new(),
        options: Some(options),
        answer: Answer::Index(answer_idx),
        certificate,
    })
}

pub(crate) fn allocentric(
    ctx: &GenContext<'_>,
    _cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let g = ctx.graph;
    let cardinal =
        |r: Option<Relation>| r.is_some_and(|r| ALLOCENTRIC_PHRASES.iter().any(|(x, _)| *x == r));
    let candidates = keyframe_pairs(g, true, |a, b| {
        disjoint(a, b) && cardinal(g.relation(a.key, b.key))
    });
    let &(me, other) = pick(&candidates, rng, "no_disjoint_cardinal_pair")?;
    let r = g.relation(me.key, other.key).expect("filtered");
    let phrase = ALLOCENTRIC_PHRASES
        .iter()
        .find(|(x, _)| *x == r)
        .expect("cardinal")
        .1;
    let rest: Vec<String> = ALLOCENTRIC_PHRASES
        .iter()
        .filter(|(x, _)| *x != r)
        .map(|(_, p)| p.to_string())
        .collect();
    let (options, answer) = shuffle_options(phrase.to_string(), rest, rng)?;
    Ok(Draft {
        frames: vec![me.key.frame],
        question: format!(
            "Given the current driving scene. Imagine you are {}. Where is {} compared to you? <image>",
            object_label(1),
            object_label(2)
        ),
        preamble: None,
        assets: single_image(ctx, me.key.frame, pair_highlights(me, other)),
        option_assets: Vec::new(),
        options: Some(options),
        answer: Answer::Index(answer),
        certificate: pair_certificate(ctx, me, other).with("relation", r),
    })
}

pub(crate) fn spatial_compatibility(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let candidates = keyframe_pairs(ctx.graph, false, |a, b| {
        disjoint(a, b) && (a.center_vec() - b.center_vec()).norm() < cfg.compat_candidate
    });
    let &(a, b) = pick(&candidates, rng, "no_close_disjoint_pair")?;
    let d = (a.center_vec() - b.center_vec()).norm();
    let (options, answer) = yes_no(d > cfg.compat_pass);
    Ok(Draft {
        frames: vec![a.key.frame],
        question: format!(
            "Given the current driving scene. Can you drive through between {} and {}?<image>",
            object_label(1),
            object_label(2)
        ),
        preamble: None,
        assets: single_image(ctx, a.key.frame, pair_highlights(a, b)),
        option_assets: Vec::new(),
        options,
        answer,
        certificate: pair_certificate(ctx, a, b).with("distance", d),
    })
}

pub(crate) fn multiview_matching(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let g = ctx.graph;
    let multi = |t: usize| -> Vec<&Node> {
        visible(g, t)
            .into_iter()
            .filter(|n| n.cameras.len() >= 2)
            .collect()
    };
    let disjoint_pairs = |t: usize| -> Vec<(&Node, &Node)> {
        let vis = visible(g, t);
        let mut out = Vec::new();
        for (i, a) in vis.iter().enumerate() {
            for b in &vis[i + 1..] {
                if disjoint(a, b) && distinct_tracks(a, b) {
                    out.push((*a, *b));
                }
            }
        }
        out
    };
    let both: Vec<usize> = (0..g.frame_count)
        .filter(|&t| !multi(t).is_empty() && !disjoint_pairs(t).is_empty())
        .collect();
    let any: Vec<usize> = (0..g.frame_count)
        .filter(|&t| !visible(g, t).is_empty())
        .collect();
    let t = *if both.is_empty() {
        pick(&any, rng, "no_visible_objects")?
    } else {
        pick(&both, rng, "")?
    };

    let same = rng.random::<f64>() < cfg.p_same && !multi(t).is_empty();
    let (a, b, c1, c2) = if same {
        let tracks = multi(t);
        let n = *tracks.choose(rng).expect("non-empty");
        let cams: Vec<&String> = n.cameras.iter().collect();
        let picked: Vec<&&String> = cams.choose_multiple(rng, 2).collect();
        (n, n, (*picked[0]).clone(), (*picked[1]).clone())
    } else {
        let pairs = disjoint_pairs(t);
        let &(a, b) = pick(&pairs, rng, "no_disjoint_pair")?;
        let (a, b) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
        let c1 = a.cameras.choose(rng).expect("visible").clone();
        let c2 = b
            .cameras
            .iter()
            .filter(|c| **c != c1)
            .collect::<Vec<_>>()
            .choose(rng)
            .copied()
            .expect("disjoint")
            .clone();
        (a, b, c1, c2)
    };
    let highlights = vec![
        Highlight::in_camera(obj_index(a), tag(1), c1.clone()),
        Highlight::in_camera(obj_index(b), tag(2), c2.clone()),
    ];
    let mut certificate = Certificate::new(if same {
        Constraint::MultiCamera
    } else {
        Constraint::DisjointCameras
    })
    .with("views", [&c1, &c2]);
    certificate.objects = vec![cert(ctx.scene, "1", a), cert(ctx.scene, "2", b)];
    let (options, answer) = yes_no(same);
    Ok(Draft {
        frames: vec![t],
        question: format!(
            "Given the current driving scene. Are {} and {} the same object? <image>",
            object_label(1),
            object_label(2)
        ),
        preamble: None,
        assets: single_image(ctx, t, highlights),
        option_assets: Vec::new(),
        options,
        answer,
        certificate,
    })
}

pub(crate) fn depth_awareness(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let candidates = keyframe_pairs(ctx.graph, true, |a, b| {
        disjoint(a, b)
            && distinct_tracks(a, b)
            && (a.center_vec().norm() - b.center_vec().norm()).abs() > cfg.depth_margin
    });
    let &(a, b) = pick(&candidates, rng, "no_disjoint_pair_beyond_margin")?;
    let (r1, r2) = (a.center_vec().norm(), b.center_vec().norm());
    let (options, answer) = yes_no(r1 < r2);
    Ok(Draft {
        frames: vec![a.key.frame],
        question: format!(
            "Given the current driving scene, is {} nearer to us than {}? <image>",
            object_label(1),
            object_label(2)
        ),
        preamble: None,
        assets: single_image(ctx, a.key.frame, pair_highlights(a, b)),
        option_assets: Vec::new(),
        options,
        answer,
        certificate: pair_certificate(ctx, a, b).with("ranges", [r1, r2]),
    })
}

pub(crate) fn relative_direction(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let g = ctx.graph;
    let targets: Vec<&Node> = (0..g.frame_count)
        .flat_map(|t| visible(g, t))
        .filter(|n| g.relation(NodeKey::ego(n.key.frame), n.key).is_some())
        .collect();
    let &target = pick(&targets, rng, "no_ego_relation")?;
    let r = g
        .relation(NodeKey::ego(target.key.frame), target.key)
        .expect("filtered");
    let pool: Vec<String> = EGO_PHRASES.iter().map(|(_, p)| p.to_string()).collect();
    let (options, answer) = choose_options(relation_phrase_ego(r).to_string(), &pool, cfg.k, rng)?;
    let mut certificate = Certificate::new(Constraint::None).with("relation", r);
    certificate.objects = vec![cert(ctx.scene, "1", target)];
    Ok(Draft {
        frames: vec![target.key.frame],
        question: format!(
            "Given the current driving scene, where is {} compared to us? <image>",
            object_label(1)
        ),
        preamble: None,
        assets: single_image(
            ctx,
            target.key.frame,
            vec![Highlight::new(obj_index(target), tag(1))],
        ),
        option_assets: Vec::new(),
        options: Some(options),
        answer: Answer::Index(answer),
        certificate,
    })
}

fn distance_pair<'a>(
    ctx: &GenContext<'a>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<(&'a Node, &'a Node, f64)> {
    let candidates = keyframe_pairs(ctx.graph, false, |a, b| {
        let d = (a.center_vec() - b.center_vec()).norm();
        disjoint(a, b) && distinct_tracks(a, b) && d > cfg.distance_min && d < cfg.distance_max
    });
    let &(a, b) = pick(&candidates, rng, "no_disjoint_pair_in_range")?;
    let (a, b) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
    Ok((a, b, (a.center_vec() - b.center_vec()).norm()))
}

pub(crate) fn relative_distance(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let (a, b, d) = distance_pair(ctx, cfg, rng)?;
    let (lo, size) = distance_bin(d);
    let offsets: Vec<f64> = [-2.0, -1.0, 1.0, 2.0]
        .into_iter()
        .filter(|o| lo + o * size > 0.0)
        .collect();
    if offsets.len() < cfg.k - 1 {
        return fail("too_few_distractors");
    }
    let mut lows: Vec<f64> = std::iter::once(lo)
        .chain(
            offsets
                .choose_multiple(rng, cfg.k - 1)
                .map(|o| lo + o * size),
        )
        .collect();
    lows.sort_by(f64::total_cmp);
    let answer = lows
        .iter()
        .position(|&l| l == lo)
        .expect("correct bin present");
    Ok(Draft {
        frames: vec![a.key.frame],
        question: format!(
            "Given the current driving scene, what is the approximate distance between {} and {}? <image>",
            object_label(1),
            object_label(2)
        ),
        preamble: None,
        assets: single_image(ctx, a.key.frame, pair_highlights(a, b)),
        option_assets: Vec::new(),
        options: Some(lows.iter().map(|&l| distance_label(l, size)).collect()),
        answer: Answer::Index(answer),
        certificate: pair_certificate(ctx, a, b).with("distance", d),
    })
}

pub(crate) fn distance_absolute(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let (a, b, d) = distance_pair(ctx, cfg, rng)?;
    Ok(Draft {
        frames: vec![a.key.frame],
        question: format!(
            "Given the current driving scene, estimate the approximate distance between {} and {}? Provide your answer as a single numerical value in meters (e.g., 15.5). <image>",
            object_label(1),
            object_label(2)
        ),
        preamble: None,
        assets: single_image(ctx, a.key.frame, pair_highlights(a, b)),
        option_assets: Vec::new(),
        options: None,
        answer: Answer::Value((d * 10.0).round() / 10.0),
        certificate: pair_certificate(ctx, a, b).with("distance", d),
    })
}

pub(crate) fn counting_absolute(
    ctx: &GenContext<'_>,
    _cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let g = ctx.graph;
    if g.frame_count == 0 {
        return fail("empty_scene");
    }
    let t = rng.random_range(0..g.frame_count);
    let mut counts: BTreeMap<Category, usize> = BTreeMap::new();
    for n in visible(g, t) {
        *counts.entry(n.category.expect("object node")).or_insert(0) += 1;
    }
    let present: Vec<Category> = counts.keys().copied().collect();
    let category = *if present.is_empty() {
        Category::ALL.choose(rng)
    } else {
        present.choose(rng)
    }
    .expect("non-empty");
    let count = counts.get(&category).copied().unwrap_or(0);
    let mut certificate = Certificate::new(Constraint::None).with("category", category);
    certificate.objects = visible(g, t)
        .into_iter()
        .filter(|n| n.category == Some(category))
        .map(|n| cert(ctx.scene, "counted", n))
        .collect();
    Ok(Draft {
        frames: vec![t],
        question: format!(
            "Given the current driving scene, how many {} are visible across all cameras? Provide your answer as a single numerical value (e.g., 3). <image>",
            category.plural()
        ),
        preamble: None,
        assets: single_image(ctx, t, Vec::new()),
        option_assets: Vec::new(),
        options: None,
        answer: Answer::Value(count as f64),
        certificate,
    })
}
