//! Scene-level label completion through pluggable classifier clients.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::front_camera;
use crate::schema::{Attributed, Provenance, Scene, SceneType, TimeOfDay, Weather};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetadataError {
    #[error("scene {0} has no front camera image reference")]
    MissingImage(String),
    #[error("{attribute}: client error: {message}")]
    Client {
        attribute: &'static str,
        message: String,
    },
    #[error("{attribute}: client returned {got} scores for {expected} prompts")]
    BadScores {
        attribute: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("client returned category outside the allowed list: {0}")]
    InvalidCategory(String),
    #[error("no BEV map available for scene type inference")]
    MissingBev,
    #[error("unknown attribute {0}")]
    UnknownAttribute(String),
    #[error("invalid value {value:?} for {attribute}")]
    InvalidValue { attribute: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct ClientError(pub String);

/// Image-text similarity backend.
pub trait SimilarityClient: Send + Sync {
    /// One score per prompt, in prompt order.
    fn scores(&self, image_ref: &str, prompts: &[String]) -> Result<Vec<f64>, ClientError>;
}

/// Vision-language backend that labels a rendered BEV map.
pub trait MapLabelClient: Send + Sync {
    fn label(&self, bev_ref: &str, categories: &[String]) -> Result<String, ClientError>;
}

pub fn weather_prompt(name: &str) -> String {
    format!("a photo of {name} weather")
}

pub fn time_of_day_prompt(name: &str) -> String {
    format!("a photo taken during {name}")
}

/// Index of the first maximum; ties resolve to the earliest entry.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

fn keyframe_image(scene: &Scene) -> Result<&str, MetadataError> {
    let cam = front_camera(scene.source());
    scene
        .frames
        .first()
        .and_then(|f| f.image_ref(cam))
        .ok_or_else(|| MetadataError::MissingImage(scene.scene_id.clone()))
}

fn classify_by_similarity<T: Copy>(
    scene: &Scene,
    client: &dyn SimilarityClient,
    attribute: &'static str,
    labels: &[T],
    names: impl Fn(T) -> &'static str,
    prompt: impl Fn(&str) -> String,
) -> Result<T, MetadataError> {
    let image = keyframe_image(scene)?;
    let prompts: Vec<String> = labels.iter().map(|&l| prompt(names(l))).collect();
    let scores = client
        .scores(image, &prompts)
        .map_err(|e| MetadataError::Client {
            attribute,
            message: format!("scene {}: {}", scene.scene_id, e.0),
        })?;
    if scores.len() != prompts.len() || scores.iter().any(|s| !s.is_finite()) {
        return Err(MetadataError::BadScores {
            attribute,
            expected: prompts.len(),
            got: scores.len(),
        });
    }
    Ok(labels[argmax_first(&scores).expect("label lists are non-empty")])
}

pub fn classify_weather(
    scene: &Scene,
    client: &dyn SimilarityClient,
) -> Result<Attributed<Weather>, MetadataError> {
    classify_by_similarity(
        scene,
        client,
        "weather",
        Weather::ALL,
        Weather::as_str,
        weather_prompt,
    )
    .map(|w| Attributed::new(w, Provenance::Inferred))
}

pub fn classify_time_of_day(
    scene: &Scene,
    client: &dyn SimilarityClient,
) -> Result<Attributed<TimeOfDay>, MetadataError> {
    classify_by_similarity(
        scene,
        client,
        "time_of_day",
        TimeOfDay::ALL,
        TimeOfDay::as_str,
        time_of_day_prompt,
    )
    .map(|t| Attributed::new(t, Provenance::Inferred))
}

pub fn classify_scene_type(
    bev_ref: &str,
    client: &dyn MapLabelClient,
) -> Result<Attributed<SceneType>, MetadataError> {
    let categories: Vec<String> = SceneType::ALL
        .iter()
        .map(|s| s.as_str().to_string())
        .collect();
    let label = client
        .label(bev_ref, &categories)
        .map_err(|e| MetadataError::Client {
            attribute: "scene_type",
            message: e.0,
        })?;
    SceneType::parse(&label)
        .map(|s| Attributed::new(s, Provenance::Inferred))
        .ok_or(MetadataError::InvalidCategory(label))
}

pub struct MetadataClients<'a> {
    pub similarity: &'a dyn SimilarityClient,
    pub map_label: &'a dyn MapLabelClient,
}

/// Completed scene plus the per-attribute failures that left fields empty.
#[derive(Debug, Clone)]
pub struct Completion {
    pub scene: Scene,
    pub errors: Vec<MetadataError>,
}

/// Fills absent scene-level labels. Present values, whatever their
/// provenance, are never replaced.
pub fn complete_metadata(
    scene: &Scene,
    clients: &MetadataClients<'_>,
    bev_ref: Option<&str>,
) -> Completion {
    let mut out = scene.clone();
    let mut errors = Vec::new();
    if out.metadata.weather.is_none() {
        match classify_weather(scene, clients.similarity) {
            Ok(v) => out.metadata.weather = Some(v),
            Err(e) => errors.push(e),
        }
    }
    if out.metadata.time_of_day.is_none() {
        match classify_time_of_day(scene, clients.similarity) {
            Ok(v) => out.metadata.time_of_day = Some(v),
            Err(e) => errors.push(e),
        }
    }
    if out.metadata.scene_type.is_none() {
        match bev_ref
            .ok_or(MetadataError::MissingBev)
            .and_then(|b| classify_scene_type(b, clients.map_label))
        {
            Ok(v) => out.metadata.scene_type = Some(v),
            Err(e) => errors.push(e),
        }
    }
    Completion { scene: out, errors }
}

/// Records a human-verified label, which outranks every other provenance.
pub fn apply_human_label(
    scene: &mut Scene,
    attribute: &str,
    value: &str,
) -> Result<(), MetadataError> {
    let invalid = || MetadataError::InvalidValue {
        attribute: attribute.to_string(),
        value: value.to_string(),
    };
    let md = &mut scene.metadata;
    match attribute {
        "weather" => {
            md.weather = Some(Attributed::new(
                Weather::parse(value).ok_or_else(invalid)?,
                Provenance::HumanVerified,
            ))
        }
        "time_of_day" => {
            md.time_of_day = Some(Attributed::new(
                TimeOfDay::parse(value).ok_or_else(invalid)?,
                Provenance::HumanVerified,
            ))
        }
        "scene_type" => {
            md.scene_type = Some(Attributed::new(
                SceneType::parse(value).ok_or_else(invalid)?,
                Provenance::HumanVerified,
            ))
        }
        other => return Err(MetadataError::UnknownAttribute(other.to_string())),
    }
    Ok(())
}

/// Deterministic similarity stub: an image scores 1 against every prompt
/// built from one of its listed labels and 0 elsewhere.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableSimilarityClient {
    pub labels: BTreeMap<String, Vec<String>>,
}

impl TableSimilarityClient {
    pub fn insert(&mut self, image_ref: impl Into<String>, labels: &[&str]) {
        self.labels.insert(
            image_ref.into(),
            labels.iter().map(|s| s.to_string()).collect(),
        );
    }
}

impl SimilarityClient for TableSimilarityClient {
    fn scores(&self, image_ref: &str, prompts: &[String]) -> Result<Vec<f64>, ClientError> {
        let labels = self.labels.get(image_ref);
        Ok(prompts
            .iter()
            .map(|p| {
                let hit = labels.is_some_and(|ls| {
                    ls.iter()
                        .any(|l| *p == weather_prompt(l) || *p == time_of_day_prompt(l))
                });
                if hit {
                    1.0
                } else {
                    0.0
                }
            })
            .collect())
    }
}

/// Fixed score vector for every call.
#[derive(Debug, Clone)]
pub struct FixedScores(pub Vec<f64>);

impl SimilarityClient for FixedScores {
    fn scores(&self, _image_ref: &str, _prompts: &[String]) -> Result<Vec<f64>, ClientError> {
        Ok(self.0.clone())
    }
}

/// Deterministic map-label stub keyed by BEV reference; unknown maps get `fallback`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableMapLabelClient {
    pub labels: BTreeMap<String, String>,
    pub fallback: Option<String>,
}

impl MapLabelClient for TableMapLabelClient {
    fn label(&self, bev_ref: &str, categories: &[String]) -> Result<String, ClientError> {
        self.labels
            .get(bev_ref)
            .or(self.fallback.as_ref())
            .cloned()
            .or_else(|| categories.first().cloned())
            .ok_or_else(|| ClientError("empty category list".into()))
    }
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout: Duration,
    pub retries: u32,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(30),
            retries: 2,
        }
    }
}

#[derive(Serialize)]
struct SimilarityRequest<'a> {
    image: &'a str,
    prompts: &'a [String],
}

#[derive(Deserialize)]
struct SimilarityResponse {
    scores: Vec<f64>,
}

#[derive(Serialize)]
struct MapLabelRequest<'a> {
    image: &'a str,
    categories: &'a [String],
}

#[derive(Deserialize)]
struct MapLabelResponse {
    label: String,
}

fn post_json<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
    cfg: &RemoteConfig,
    body: &Req,
) -> Result<Resp, ClientError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(cfg.timeout))
        .build()
        .into();
    let mut last = String::new();
    for _ in 0..=cfg.retries {
        match agent.post(&cfg.endpoint).send_json(body) {
            Ok(mut resp) => match resp.body_mut().read_json::<Resp>() {
                Ok(v) => return Ok(v),
                Err(e) => last = e.to_string(),
            },
            Err(e) => last = e.to_string(),
        }
    }
    Err(ClientError(format!(
        "{} after {} attempts: {last}",
        cfg.endpoint,
        cfg.retries + 1
    )))
}

/// HTTP similarity client: POST `{image, prompts}`, expects `{scores}`.
#[derive(Debug, Clone)]
pub struct RemoteSimilarityClient(pub RemoteConfig);

impl SimilarityClient for RemoteSimilarityClient {
    fn scores(&self, image_ref: &str, prompts: &[String]) -> Result<Vec<f64>, ClientError> {
        post_json::<_, SimilarityResponse>(
            &self.0,
            &SimilarityRequest {
                image: image_ref,
                prompts,
            },
        )
        .map(|r| r.scores)
    }
}

/// HTTP map-label client: POST `{image, categories}`, expects `{label}`.
#[derive(Debug, Clone)]
pub struct RemoteMapLabelClient(pub RemoteConfig);

impl MapLabelClient for RemoteMapLabelClient {
    fn label(&self, bev_ref: &str, categories: &[String]) -> Result<String, ClientError> {
        post_json::<_, MapLabelResponse>(
            &self.0,
            &MapLabelRequest {
                image: bev_ref,
                categories,
            },
        )
        .map(|r| r.label)
    }
}
