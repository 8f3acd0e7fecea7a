//! Scene-construction tasks: map and camera matching, ego rotation, camera
//! ordering and the masked-camera memory task.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::camera::{front_camera, ordered_cameras};
use crate::render::letter;
use crate::schema::{Category, Scene, SceneType};

use super::common::{
    cert, choose_options, fail, format_counts, multiview, window_start, GenResult, Rng8,
};
use super::{
    Answer, Asset, AssetSpec, Certificate, Constraint, Draft, GenContext, GeneratorConfig,
};

pub const ROTATION_BINS: [f64; 10] = [0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0, 120.0, 150.0, 180.0];

/// Index of the bin containing `deg`; 180 falls into the last bin.
pub fn rotation_bin(deg: f64) -> usize {
    let last = ROTATION_BINS.len() - 2;
    (0..=last)
        .find(|&i| deg < ROTATION_BINS[i + 1])
        .unwrap_or(last)
}

fn rotation_label(i: usize) -> String {
    format!("{}-{} degrees", ROTATION_BINS[i], ROTATION_BINS[i + 1])
}

fn scene_type(scene: &Scene) -> Option<SceneType> {
    scene.metadata.scene_type.as_ref().map(|a| a.value)
}

/// Other pool scenes sharing source and scene type that have frame `t`.
fn similar_scenes<'a>(ctx: &GenContext<'a>, t: usize) -> GenResult<Vec<&'a Scene>> {
    let Some(st) = scene_type(ctx.scene) else {
        return fail("scene_type_missing");
    };
    Ok(ctx
        .pool
        .iter()
        .filter(|s| {
            s.scene_id != ctx.scene.scene_id
                && s.source() == ctx.scene.source()
                && scene_type(s) == Some(st)
                && s.frames.len() > t
        })
        .collect())
}

/// Shuffled scene ids for the options: this scene plus `k − 1` pool scenes.
fn pool_options(
    ctx: &GenContext<'_>,
    t: usize,
    k: usize,
    rng: &mut Rng8,
) -> GenResult<(Vec<String>, usize)> {
    let similar = similar_scenes(ctx, t)?;
    if similar.len() < k - 1 {
        return fail("pool_same_source_scene_type");
    }
    let mut ids: Vec<String> = std::iter::once(ctx.scene.scene_id.clone())
        .chain(
            similar
                .choose_multiple(rng, k - 1)
                .map(|s| s.scene_id.clone()),
        )
        .collect();
    ids.shuffle(rng);
    let answer = ids
        .iter()
        .position(|s| *s == ctx.scene.scene_id)
        .expect("self present");
    Ok((ids, answer))
}

fn image_options(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("Image {i}")).collect()
}

fn pool_certificate(ctx: &GenContext<'_>, ids: &[String]) -> Certificate {
    Certificate::new(Constraint::SamePool)
        .with("option_scenes", ids)
        .with("source", ctx.scene.source())
        .with("scene_type", scene_type(ctx.scene))
}

pub(crate) fn scene_construction(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let scene = ctx.scene;
    if scene.frames.is_empty() {
        return fail("empty_scene");
    }
    let t = rng.random_range(0..scene.frames.len());
    let (ids, answer) = pool_options(ctx, t, cfg.k, rng)?;
    Ok(Draft {
        frames: vec![t],
        question: "Given the current driving scene, construct a top-down perspective map of the scene and select the correct map. <image>".into(),
        preamble: None,
        assets: vec![multiview(scene, t, Vec::new())],
        option_assets: ids
            .iter()
            .map(|id| AssetSpec::Bev { scene_id: id.clone(), frame: t }.into())
            .collect(),
        options: Some(image_options(ids.len())),
        answer: Answer::Index(answer),
        certificate: pool_certificate(ctx, &ids),
    })
}

pub(crate) fn perspective_camera_match(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let scene = ctx.scene;
    if scene.frames.is_empty() {
        return fail("empty_scene");
    }
    let t = rng.random_range(0..scene.frames.len());
    let front = front_camera(scene.source());
    if scene.frames[t].camera(front).is_none() {
        return fail("front_camera_missing");
    }
    let (ids, answer) = pool_options(ctx, t, cfg.k, rng)?;
    Ok(Draft {
        frames: vec![t],
        question: "Given the top-down perspective map of a driving scene, identify which front camera view corresponds to this map.<image>".into(),
        preamble: None,
        assets: vec![AssetSpec::Bev { scene_id: scene.scene_id.clone(), frame: t }.into()],
        option_assets: ids
            .iter()
            .map(|id| {
                AssetSpec::Camera {
                    scene_id: id.clone(),
                    frame: t,
                    camera: front.to_string(),
                }
                .into()
            })
            .collect(),
        options: Some(image_options(ids.len())),
        answer: Answer::Index(answer),
        certificate: pool_certificate(ctx, &ids).with("camera", front),
    })
}

pub(crate) fn ego_rotation(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let scene = ctx.scene;
    let g = cfg.rotation_gap;
    if g == 0 || scene.frames.len() <= g {
        return fail("frame_gap_beyond_scene");
    }
    let t1 = rng.random_range(0..scene.frames.len() - g);
    let t2 = t1 + g;
    let front = front_camera(scene.source());
    if scene.frames[t1].camera(front).is_none() {
        return fail("front_camera_missing");
    }
    let r1 = scene.frames[t1].ego_pose.rotation();
    let r2 = scene.frames[t2].ego_pose.rotation();
    let rel = r2 * r1.transpose();
    let theta = rel[(1, 0)].atan2(rel[(0, 0)]).abs().to_degrees();
    let bin = rotation_bin(theta);
    let pool: Vec<String> = (0..ROTATION_BINS.len() - 1).map(rotation_label).collect();
    let (options, answer) = choose_options(rotation_label(bin), &pool, cfg.k, rng)?;
    let camera = |frame| -> Asset {
        AssetSpec::Camera {
            scene_id: scene.scene_id.clone(),
            frame,
            camera: front.to_string(),
        }
        .into()
    };
    Ok(Draft {
        frames: vec![t1, t2],
        question: "The ego vehicle is moving through the scene. Given two front camera images from timestamp T1 and timestamp T2, what is the approximate rotation angle of the ego vehicle between these two timestamps? Timestamp T1: <image> Timestamp T2: <image>".into(),
        preamble: None,
        assets: vec![camera(t1), camera(t2)],
        option_assets: Vec::new(),
        options: Some(options),
        answer: Answer::Index(answer),
        certificate: Certificate::new(Constraint::None).with("theta_deg", theta).with("bin", bin),
    })
}

pub(crate) fn camera_ordering(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let scene = ctx.scene;
    if scene.frames.is_empty() {
        return fail("empty_scene");
    }
    let t = rng.random_range(0..scene.frames.len());
    let names: Vec<String> = scene.frames[t]
        .cameras
        .iter()
        .map(|c| c.camera_name.clone())
        .collect();
    let cameras = ordered_cameras(scene.source(), &names);
    let n = cameras.len();
    if n < 3 {
        return fail("too_few_cameras");
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let slot_of = |c: usize| order.iter().position(|&o| o == c).expect("permutation");
    let correct: String = (0..n)
        .map(|c| letter(slot_of(c)).to_string())
        .collect::<Vec<_>>()
        .join("→");
    let mut distractors: Vec<String> = Vec::new();
    let mut letters: Vec<char> = (0..n).map(letter).collect();
    for _ in 0..200 {
        if distractors.len() == cfg.k - 1 {
            break;
        }
        letters.shuffle(rng);
        let s = letters
            .iter()
            .map(char::to_string)
            .collect::<Vec<_>>()
            .join("→");
        if s != correct && !distractors.contains(&s) {
            distractors.push(s);
        }
    }
    if distractors.len() < cfg.k - 1 {
        return fail("too_few_distractors");
    }
    let (options, answer) = super::common::shuffle_options(correct, distractors, rng)?;
    let lookup: Vec<(String, String)> = order
        .iter()
        .enumerate()
        .map(|(k, &c)| (letter(k).to_string(), cameras[c].clone()))
        .collect();
    Ok(Draft {
        frames: vec![t],
        question: "Given a shuffled set of camera views arranged around an autonomous vehicle, determine the correct spatial ordering of the cameras. <image>\nThe shuffled camera views are labeled A, B, C, D, etc. in the image above. Identify the correct clockwise ordering starting from the Front camera.".into(),
        preamble: None,
        assets: vec![AssetSpec::CameraGrid {
            scene_id: scene.scene_id.clone(),
            frame: t,
            order: order.clone(),
        }
        .into()],
        option_assets: Vec::new(),
        options: Some(options),
        answer: Answer::Index(answer),
        certificate: Certificate::new(Constraint::None).with("canonical", &cameras).with("letters", lookup),
    })
}

fn camera_counts(ctx: &GenContext<'_>, t: usize, camera: &str) -> BTreeMap<Category, usize> {
    let mut counts = BTreeMap::new();
    for n in ctx.graph.frame_objects(t) {
        if n.cameras.iter().any(|c| c == camera) {
            *counts.entry(n.category.expect("object node")).or_insert(0) += 1;
        }
    }
    counts
}

pub(crate) fn leave_one_camera_out(
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    rng: &mut Rng8,
) -> GenResult<Draft> {
    let scene = ctx.scene;
    let n = cfg.masked_sequence;
    if n < 2 {
        return fail("sequence_too_short");
    }
    let t0 = window_start(scene.frames.len(), n, 0, rng)?;
    let last = t0 + n - 1;
    let names: Vec<String> = scene.frames[last]
        .cameras
        .iter()
        .map(|c| c.camera_name.clone())
        .collect();
    let cameras = ordered_cameras(scene.source(), &names);
    let front = front_camera(scene.source());
    let maskable: Vec<&String> = cameras.iter().filter(|c| c.as_str() != front).collect();
    let Some(&masked) = maskable.choose(rng) else {
        return fail("no_maskable_camera");
    };
    let counts = camera_counts(ctx, last, masked);
    let correct = format_counts(&counts);

    let mut pool: Vec<String> = cameras
        .iter()
        .filter(|c| *c != masked)
        .map(|c| format_counts(&camera_counts(ctx, last, c)))
        .collect();
    for (&cat, &k) in &counts {
        for delta in [-1i64, 1, 2] {
            let mut c = counts.clone();
            let v = k as i64 + delta;
            if v <= 0 {
                c.remove(&cat);
            } else {
                c.insert(cat, v as usize);
            }
            pool.push(format_counts(&c));
        }
        let mut c = counts.clone();
        c.remove(&cat);
        pool.push(format_counts(&c));
    }
    for cat in Category::ALL
        .iter()
        .filter(|c| !counts.contains_key(c))
        .take(3)
    {
        let mut c = counts.clone();
        c.insert(*cat, 1);
        pool.push(format_counts(&c));
    }
    pool.push("None".into());
    let (options, answer) = choose_options(correct, &pool, cfg.k, rng)?;

    let mut assets: Vec<Asset> = vec![multiview(scene, t0, Vec::new())];
    assets.extend((t0 + 1..=last).map(|t| -> Asset {
        AssetSpec::Masked {
            scene_id: scene.scene_id.clone(),
            frame: t,
            camera: masked.clone(),
        }
        .into()
    }));
    let mut certificate = Certificate::new(Constraint::None)
        .with("masked_camera", masked)
        .with("final_frame", last);
    certificate.objects = ctx
        .graph
        .frame_objects(last)
        .filter(|n| n.cameras.iter().any(|c| c == masked))
        .map(|n| cert(scene, "counted", n))
        .collect();
    Ok(Draft {
        frames: (t0..=last).collect(),
        question: "Given this video sequence where one camera view is masked after the first frame, based on the video sequence, what objects are present in that masked camera view in the final frame? <video>".into(),
        preamble: None,
        assets,
        option_assets: Vec::new(),
        options: Some(options),
        answer: Answer::Index(answer),
        certificate,
    })
}
