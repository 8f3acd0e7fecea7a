//! Question-answer generation over scene graphs.
//!
//! Every generator is a pure function of the scene, its graph, the candidate
//! pool and a seeded RNG. Images are not rendered here: items carry
//! [`AssetSpec`]s that [`corpus::materialize_assets`] turns into PNG files.

mod common;
mod construct;
pub mod corpus;
mod relational;
mod temporal;

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::{SceneGraph, ThresholdSet};
use crate::render::Highlight;
use crate::schema::Scene;

pub use common::{
    format_counts, object_label, relation_phrase_ego, ALLOCENTRIC_PHRASES, EGO_PHRASES,
};
pub use construct::{rotation_bin, ROTATION_BINS};
pub use relational::{distance_bin, multistep_turns};
pub use temporal::{dominant_action, manipulation_outcome, Outcome};

pub const SYSTEM_PROMPT: &str = "You are a helpful assistant for autonomous driving. You will be given a question and a list of images, and you need to answer the question based on the images. Please first do your thinking process in <think> </think> and then provide the final answer in <answer> </answer> tags. Only put 1 character standing for the option in <answer> </answer> tags.";

pub const INTERACTION_DEFINITIONS: &str = "Know that the definition of interactions are:
- LEAD: Object-1 is leading Object-2
- FOLLOW: Object-1 is following Object-2
- OVERTAKE: Object-1 is overtaking the lane of Object-2
- PASSING: Object-1 is passing the lane of Object-2 in the same direction
- CO_MOVING: Object-1 is co-moving with Object-2 in the same direction
- APPROACHING: Object-1 is approaching Object-2 in the opposite direction
- CROSSING: Object-1 is crossing the lane of Object-2 in the opposite direction
- YIELDING: Object-1 is yielding to Object-2; Object-1 is stopped while Object-2 is moving";

pub const MAP_PROMPT: &str = "The following Bird's Eye View (BEV) maps show the scene from a top-down perspective, providing the spatial layout of the road, lanes, and objects: <image>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Ability {
    Const,
    Unders,
    Reas,
}

impl Ability {
    pub const ALL: [Ability; 3] = [Ability::Const, Ability::Unders, Ability::Reas];

    pub fn as_str(self) -> &'static str {
        match self {
            Ability::Const => "Const",
            Ability::Unders => "Unders",
            Ability::Reas => "Reas",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    SceneConstruction,
    PerspectiveCameraMatching,
    EgoRotation,
    CameraOrdering,
    LeaveOneCameraOut,
    MultiStepReasoning,
    AllocentricImagination,
    SpatialCompatibility,
    MultiviewObjectMatching,
    DepthAwareness,
    RelativeDirection,
    RelativeDistance,
    DistanceAbsolute,
    CountingAbsolute,
    EventOrdering,
    TrajectoryReasoning,
    OcclusionAwareness,
    ObjectManipulation,
    ActionReasoning,
    InteractionReasoning,
}

impl TaskId {
    pub const ALL: [TaskId; 20] = [
        TaskId::SceneConstruction,
        TaskId::PerspectiveCameraMatching,
        TaskId::EgoRotation,
        TaskId::CameraOrdering,
        TaskId::LeaveOneCameraOut,
        TaskId::MultiStepReasoning,
        TaskId::AllocentricImagination,
        TaskId::SpatialCompatibility,
        TaskId::MultiviewObjectMatching,
        TaskId::DepthAwareness,
        TaskId::RelativeDirection,
        TaskId::RelativeDistance,
        TaskId::DistanceAbsolute,
        TaskId::CountingAbsolute,
        TaskId::EventOrdering,
        TaskId::TrajectoryReasoning,
        TaskId::OcclusionAwareness,
        TaskId::ObjectManipulation,
        TaskId::ActionReasoning,
        TaskId::InteractionReasoning,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::SceneConstruction => "scene_construction",
            TaskId::PerspectiveCameraMatching => "perspective_camera_matching",
            TaskId::EgoRotation => "ego_rotation",
            TaskId::CameraOrdering => "camera_ordering",
            TaskId::LeaveOneCameraOut => "leave_one_camera_out",
            TaskId::MultiStepReasoning => "multi_step_reasoning",
            TaskId::AllocentricImagination => "allocentric_imagination",
            TaskId::SpatialCompatibility => "spatial_compatibility",
            TaskId::MultiviewObjectMatching => "multiview_object_matching",
            TaskId::DepthAwareness => "depth_awareness",
            TaskId::RelativeDirection => "relative_direction",
            TaskId::RelativeDistance => "relative_distance",
            TaskId::DistanceAbsolute => "distance_absolute",
            TaskId::CountingAbsolute => "counting_absolute",
            TaskId::EventOrdering => "event_ordering",
            TaskId::TrajectoryReasoning => "trajectory_reasoning",
            TaskId::OcclusionAwareness => "occlusion_awareness",
            TaskId::ObjectManipulation => "object_manipulation",
            TaskId::ActionReasoning => "action_reasoning",
            TaskId::InteractionReasoning => "interaction_reasoning",
        }
    }

    pub fn parse(s: &str) -> Option<TaskId> {
        TaskId::ALL.into_iter().find(|t| t.as_str() == s)
    }

    pub fn ability(self) -> Ability {
        use TaskId::*;
        match self {
            SceneConstruction
            | PerspectiveCameraMatching
            | EgoRotation
            | CameraOrdering
            | LeaveOneCameraOut => Ability::Const,
            MultiStepReasoning
            | AllocentricImagination
            | SpatialCompatibility
            | MultiviewObjectMatching
            | DepthAwareness
            | RelativeDirection
            | RelativeDistance
            | DistanceAbsolute
            | CountingAbsolute => Ability::Unders,
            EventOrdering | TrajectoryReasoning | OcclusionAwareness | ObjectManipulation
            | ActionReasoning | InteractionReasoning => Ability::Reas,
        }
    }

    /// Open-numeric tasks scored by RMSE.
    pub fn is_numeric(self) -> bool {
        matches!(self, TaskId::DistanceAbsolute | TaskId::CountingAbsolute)
    }

    /// Tasks that need track identities across frames.
    pub fn needs_tracks(self) -> bool {
        self.ability() == Ability::Reas
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Index(usize),
    Value(f64),
}

impl Answer {
    pub fn index(&self) -> Option<usize> {
        match self {
            Answer::Index(i) => Some(*i),
            Answer::Value(_) => None,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Answer::Index(_) => None,
            Answer::Value(v) => Some(*v),
        }
    }
}

/// How an image asset is produced from the scene pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AssetSpec {
    Bev {
        scene_id: String,
        frame: usize,
    },
    Multiview {
        scene_id: String,
        frame: usize,
        highlights: Vec<Highlight>,
    },
    Camera {
        scene_id: String,
        frame: usize,
        camera: String,
    },
    CameraGrid {
        scene_id: String,
        frame: usize,
        order: Vec<usize>,
    },
    Masked {
        scene_id: String,
        frame: usize,
        camera: String,
    },
}

impl AssetSpec {
    pub fn scene_id(&self) -> &str {
        match self {
            AssetSpec::Bev { scene_id, .. }
            | AssetSpec::Multiview { scene_id, .. }
            | AssetSpec::Camera { scene_id, .. }
            | AssetSpec::CameraGrid { scene_id, .. }
            | AssetSpec::Masked { scene_id, .. } => scene_id,
        }
    }

    pub fn frame(&self) -> usize {
        match self {
            AssetSpec::Bev { frame, .. }
            | AssetSpec::Multiview { frame, .. }
            | AssetSpec::Camera { frame, .. }
            | AssetSpec::CameraGrid { frame, .. }
            | AssetSpec::Masked { frame, .. } => *frame,
        }
    }

    /// Relative output path `{scene_id}/{frame}/{kind}.png`.
    ///
    /// Specs with parameters get a short content hash so equal specs share a file.
    pub fn path(&self) -> String {
        let kind = match self {
            AssetSpec::Bev { .. } => "bev".to_string(),
            AssetSpec::Multiview { highlights, .. } if highlights.is_empty() => {
                "multiview".to_string()
            }
            AssetSpec::Multiview { highlights, .. } => {
                format!("multiview-{}", short_hash(highlights))
            }
            AssetSpec::Camera { camera, .. } => camera.clone(),
            AssetSpec::CameraGrid { order, .. } => format!("grid-{}", short_hash(order)),
            AssetSpec::Masked { camera, .. } => format!("masked-{camera}"),
        };
        format!("{}/{}/{}.png", self.scene_id(), self.frame(), kind)
    }
}

fn short_hash<T: Serialize>(v: &T) -> String {
    let bytes = serde_json::to_vec(v).expect("serializable");
    let digest = Sha256::digest(&bytes);
    digest[..4].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Asset {
    pub path: String,
    pub spec: AssetSpec,
}

impl From<AssetSpec> for Asset {
    fn from(spec: AssetSpec) -> Self {
        Asset {
            path: spec.path(),
            spec,
        }
    }
}

/// Which generation constraint the certificate attests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    None,
    /// Distractors come from other scenes of the same source and scene type.
    SamePool,
    /// One object seen by at least two cameras.
    MultiCamera,
    /// Two objects whose camera sets do not intersect.
    DisjointCameras,
    /// Objects spread over pairwise disjoint camera sets where possible.
    DiverseCameras,
}

/// An object referenced by an item, with the cameras that saw it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertObject {
    pub role: String,
    pub frame: usize,
    pub object: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_id: Option<String>,
    pub cameras: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub constraint: Constraint,
    pub objects: Vec<CertObject>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
}

impl Certificate {
    pub fn new(constraint: Constraint) -> Self {
        Certificate {
            constraint,
            objects: Vec::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn object(&self, role: &str) -> Option<&CertObject> {
        self.objects.iter().find(|o| o.role == role)
    }

    pub fn detail(&self, key: &str) -> Option<&serde_json::Value> {
        self.details.get(key)
    }

    pub(crate) fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.details.insert(
            key.to_string(),
            serde_json::to_value(value).expect("serializable"),
        );
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAItem {
    pub item_id: String,
    pub task_id: TaskId,
    pub ability: Ability,
    pub scene_id: String,
    pub frames: Vec<usize>,
    pub question: String,
    /// Prompt text placed before the question.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preamble: Option<String>,
    /// Question images in prompt order; video items list one image per frame.
    pub assets: Vec<Asset>,
    /// Images shown as options, one per option, when options are visual.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub option_assets: Vec<Asset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
    pub answer: Answer,
    pub certificate: Certificate,
    /// Corpus seed.
    pub seed: u64,
    /// Seed of this item's RNG stream.
    pub rng_seed: u64,
    /// Set on items that passed human verification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review: Option<ReviewStamp>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewOutcome {
    Accepted,
    Edited,
}

/// Verdict provenance carried by exported items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewStamp {
    pub outcome: ReviewOutcome,
    pub accepts: usize,
    pub edits: usize,
    pub annotators: Vec<String>,
}

impl QAItem {
    pub fn is_video(&self) -> bool {
        self.question.contains("<video>")
    }

    pub fn correct_option(&self) -> Option<&str> {
        let i = self.answer.index()?;
        self.options.as_ref()?.get(i).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Options per multiple-choice item; yes/no items always have two.
    pub k: usize,
    pub thresholds: ThresholdSet,
    pub rotation_gap: usize,
    pub masked_sequence: usize,
    pub compat_candidate: f64,
    pub compat_pass: f64,
    pub p_same: f64,
    pub depth_margin: f64,
    pub distance_min: f64,
    pub distance_max: f64,
    pub clip_len: usize,
    pub context_frames: usize,
    pub future_horizon: f64,
    pub max_events: usize,
    pub theta_v: f64,
    pub occlusion_k: usize,
    pub manipulation_dt: f64,
    pub speeds_kmh: Vec<f64>,
    pub rotations_deg: Vec<f64>,
    pub nearby_radius: f64,
    pub action_k: usize,
    pub p_diff: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            k: 4,
            thresholds: ThresholdSet::default(),
            rotation_gap: 3,
            masked_sequence: 6,
            compat_candidate: 8.0,
            compat_pass: 5.0,
            p_same: 0.75,
            depth_margin: 2.0,
            distance_min: 5.0,
            distance_max: 50.0,
            clip_len: 8,
            context_frames: 4,
            future_horizon: 3.0,
            max_events: 3,
            theta_v: 0.6,
            occlusion_k: 3,
            manipulation_dt: 0.5,
            speeds_kmh: vec![
                5.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0,
            ],
            rotations_deg: vec![-90.0, -45.0, 0.0, 45.0, 90.0, 180.0],
            nearby_radius: 30.0,
            action_k: 3,
            p_diff: 0.75,
        }
    }
}

impl GeneratorConfig {
    pub fn with_seed(seed: u64) -> Self {
        GeneratorConfig {
            seed,
            ..GeneratorConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QaError {
    #[error("{task}: no eligible candidates ({constraint})")]
    NoEligibleCandidates { task: TaskId, constraint: String },
    #[error("unknown scene {0}")]
    UnknownScene(String),
}

impl QaError {
    /// Name of the failed constraint, used for report bucketing.
    pub fn constraint(&self) -> &str {
        match self {
            QaError::NoEligibleCandidates { constraint, .. } => constraint,
            QaError::UnknownScene(_) => "unknown_scene",
        }
    }
}

/// Everything a generator may read.
#[derive(Debug, Clone, Copy)]
pub struct GenContext<'a> {
    pub scene: &'a Scene,
    pub graph: &'a SceneGraph,
    /// Candidate scenes for cross-scene distractors; may include `scene` itself.
    pub pool: &'a [Scene],
}

/// Generator output before bookkeeping fields are attached.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Draft {
    pub frames: Vec<usize>,
    pub question: String,
    pub preamble: Option<String>,
    pub assets: Vec<Asset>,
    pub option_assets: Vec<Asset>,
    pub options: Option<Vec<String>>,
    pub answer: Answer,
    pub certificate: Certificate,
}

/// RNG seed for one generation attempt.
pub fn attempt_seed(corpus_seed: u64, task: TaskId, scene_id: &str, attempt: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(corpus_seed.to_le_bytes());
    h.update(task.as_str().as_bytes());
    h.update([0]);
    h.update(scene_id.as_bytes());
    h.update([0]);
    h.update(attempt.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Runs one generator on one scene.
pub fn generate(
    task: TaskId,
    ctx: &GenContext<'_>,
    cfg: &GeneratorConfig,
    attempt: u64,
) -> Result<QAItem, QaError> {
    let rng_seed = attempt_seed(cfg.seed, task, &ctx.scene.scene_id, attempt);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let draft = match task {
        TaskId::SceneConstruction => construct::scene_construction(ctx, cfg, &mut rng),
        TaskId::PerspectiveCameraMatching => {
            construct::perspective_camera_match(ctx, cfg, &mut rng)
        }
        TaskId::EgoRotation => construct::ego_rotation(ctx, cfg, &mut rng),
        TaskId::CameraOrdering => construct::camera_ordering(ctx, cfg, &mut rng),
        TaskId::LeaveOneCameraOut => construct::leave_one_camera_out(ctx, cfg, &mut rng),
        TaskId::MultiStepReasoning => relational::multi_step(ctx, cfg, &mut rng),
        TaskId::AllocentricImagination => relational::allocentric(ctx, cfg, &mut rng),
        TaskId::SpatialCompatibility => relational::spatial_compatibility(ctx, cfg, &mut rng),
        TaskId::MultiviewObjectMatching => relational::multiview_matching(ctx, cfg, &mut rng),
        TaskId::DepthAwareness => relational::depth_awareness(ctx, cfg, &mut rng),
        TaskId::RelativeDirection => relational::relative_direction(ctx, cfg, &mut rng),
        TaskId::RelativeDistance => relational::relative_distance(ctx, cfg, &mut rng),
        TaskId::DistanceAbsolute => relational::distance_absolute(ctx, cfg, &mut rng),
        TaskId::CountingAbsolute => relational::counting_absolute(ctx, cfg, &mut rng),
        TaskId::EventOrdering => temporal::event_ordering(ctx, cfg, &mut rng),
        TaskId::TrajectoryReasoning => temporal::trajectory_reasoning(ctx, cfg, &mut rng),
        TaskId::OcclusionAwareness => temporal::occlusion_awareness(ctx, cfg, &mut rng),
        TaskId::ObjectManipulation => temporal::object_manipulation(ctx, cfg, &mut rng),
        TaskId::ActionReasoning => temporal::action_reasoning(ctx, cfg, &mut rng),
        TaskId::InteractionReasoning => temporal::interaction_reasoning(ctx, cfg, &mut rng),
    }
    .map_err(|constraint| QaError::NoEligibleCandidates { task, constraint })?;
    Ok(QAItem {
        item_id: format!("{}-{}-{attempt:05}", task.as_str(), ctx.scene.scene_id),
        task_id: task,
        ability: task.ability(),
        scene_id: ctx.scene.scene_id.clone(),
        frames: draft.frames,
        question: draft.question,
        preamble: draft.preamble,
        assets: draft.assets,
        option_assets: draft.option_assets,
        options: draft.options,
        answer: draft.answer,
        certificate: draft.certificate,
        seed: cfg.seed,
        rng_seed,
        review: None,
    })
}

/// The user prompt sent to a model: preamble, question with video frames
/// expanded, and lettered options.
pub fn expand_prompt(item: &QAItem) -> String {
    let mut out = String::new();
    if let Some(p) = &item.preamble {
        out.push_str(p);
        out.push('\n');
    }
    let video: Vec<String> = (1..=item.assets.len())
        .map(|i| format!("Frame {i}: <image>"))
        .collect();
    out.push_str(&item.question.replace("<video>", &video.join(" ")));
    if let Some(opts) = &item.options {
        for (k, o) in opts.iter().enumerate() {
            out.push('\n');
            if item.option_assets.is_empty() {
                out.push_str(&format!("{}. {o}", option_letter(k)));
            } else {
                out.push_str(&format!("{}. <image>", option_letter(k)));
            }
        }
    }
    out
}

pub fn option_letter(k: usize) -> char {
    (b'A' + k as u8) as char
}
