//! Canonical interchange model for multi-view driving scenes.
//!
//! A scene document is UTF-8 JSON with the top-level fields `format_version`,
//! `scene_id`, `calibrated`, `metadata`, `frames` and an optional `lanes`
//! list. [`to_canonical_string`] writes it compactly on a single line so pool
//! files can be concatenated and diffed line by line.
//!
//! Conventions: meters, seconds, radians; z-up; yaw measured counterclockwise
//! from +x. Object centers, sizes and velocities live in the ego frame of
//! their frame. Ego poses are stored world-from-ego. Camera extrinsics carry
//! an explicit [`FrameConvention`].

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::SceneError;
use crate::geometry::Pose;

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Nuscenes,
    Waymo,
    Av2,
    Truckscenes,
    Once,
}

impl Source {
    pub const ALL: [Source; 5] = [
        Source::Nuscenes,
        Source::Waymo,
        Source::Av2,
        Source::Truckscenes,
        Source::Once,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Nuscenes => "nuscenes",
            Source::Waymo => "waymo",
            Source::Av2 => "av2",
            Source::Truckscenes => "truckscenes",
            Source::Once => "once",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s { $($text => Some($name::$variant),)+ _ => None }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

label_enum!(
    /// Weather categories, in tie-breaking order.
    Weather {
        Cloudy => "cloudy",
        Rain => "rain",
        Snow => "snow",
        Hail => "hail",
        Overcast => "overcast",
        Clear => "clear",
        Sunny => "sunny",
        Other => "other",
    }
);

label_enum!(
    TimeOfDay {
        Daytime => "daytime",
        Nighttime => "nighttime",
        Twilight => "twilight",
    }
);

label_enum!(
    SceneType {
        CrossIntersection => "cross_intersection",
        TIntersection => "t_intersection",
        YIntersection => "y_intersection",
        SkewedIntersection => "skewed_intersection",
        MultiLegIntersection => "multi_leg_intersection",
        StraightRoad => "straight_road",
        SCurveRoad => "s_curve_road",
    }
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EgoType {
    Car,
    Truck,
}

impl EgoType {
    /// Nominal (length, width, height) of the data-collection vehicle.
    pub fn size(self) -> [f64; 3] {
        match self {
            EgoType::Car => [4.5, 1.9, 1.6],
            EgoType::Truck => [6.5, 2.5, 3.5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "vehicle.car")]
    Car,
    #[serde(rename = "vehicle.truck")]
    Truck,
    #[serde(rename = "pedestrian")]
    Pedestrian,
    #[serde(rename = "cyclist")]
    Cyclist,
    #[serde(rename = "traffic_cone")]
    TrafficCone,
    #[serde(rename = "barrier")]
    Barrier,
    #[serde(rename = "other")]
    Other,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Car,
        Category::Truck,
        Category::Pedestrian,
        Category::Cyclist,
        Category::TrafficCone,
        Category::Barrier,
        Category::Other,
    ];

    /// Categories that never move on their own.
    pub fn is_static(self) -> bool {
        matches!(self, Category::TrafficCone | Category::Barrier)
    }

    pub fn noun(self) -> &'static str {
        match self {
            Category::Car => "car",
            Category::Truck => "truck",
            Category::Pedestrian => "pedestrian",
            Category::Cyclist => "cyclist",
            Category::TrafficCone => "traffic cone",
            Category::Barrier => "barrier",
            Category::Other => "other object",
        }
    }

    pub fn plural(self) -> &'static str {
        match self {
            Category::Car => "cars",
            Category::Truck => "trucks",
            Category::Pedestrian => "pedestrians",
            Category::Cyclist => "cyclists",
            Category::TrafficCone => "traffic cones",
            Category::Barrier => "barriers",
            Category::Other => "other objects",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    SourceNative,
    Inferred,
    HumanVerified,
}

impl Provenance {
    /// Precedence rank: human_verified > source_native > inferred.
    pub fn rank(self) -> u8 {
        match self {
            Provenance::Inferred => 0,
            Provenance::SourceNative => 1,
            Provenance::HumanVerified => 2,
        }
    }
}

/// A scene-level label together with where it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attributed<T> {
    pub value: T,
    pub provenance: Provenance,
}

impl<T> Attributed<T> {
    pub fn new(value: T, provenance: Provenance) -> Self {
        Attributed { value, provenance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneMetadata {
    pub source: Source,
    pub ego_type: EgoType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weather: Option<Attributed<Weather>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_of_day: Option<Attributed<TimeOfDay>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_type: Option<Attributed<SceneType>>,
}

/// Direction of a stored camera extrinsic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameConvention {
    CameraFromEgo,
    EgoFromCamera,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraCalibration {
    pub camera_name: String,
    /// Pinhole intrinsics, row-major, pixels. Camera axes: +z forward, +x right, +y down.
    pub intrinsics: [[f64; 3]; 3],
    pub extrinsic: Pose,
    pub frame_convention: FrameConvention,
    /// (width, height) in pixels.
    pub image_size: [u32; 2],
}

impl CameraCalibration {
    pub fn intrinsics_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.intrinsics[r][c])
    }

    /// The extrinsic expressed as camera-from-ego regardless of storage convention.
    pub fn camera_from_ego(&self) -> Pose {
        match self.frame_convention {
            FrameConvention::CameraFromEgo => self.extrinsic,
            FrameConvention::EgoFromCamera => self.extrinsic.inverse(),
        }
    }
}

/// One object's footprint in one camera image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Projection {
    pub camera_name: String,
    /// `[x_min, y_min, x_max, y_max]` in pixels.
    pub bbox: [f64; 4],
    pub visibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectAnnotation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_id: Option<String>,
    pub category: Category,
    pub center: [f64; 3],
    /// (length, width, height).
    pub size: [f64; 3],
    pub yaw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<[f64; 3]>,
    #[serde(default)]
    pub projections: Vec<Projection>,
}

impl ObjectAnnotation {
    pub fn center_vec(&self) -> Vector3<f64> {
        Vector3::from(self.center)
    }

    pub fn projection(&self, camera: &str) -> Option<&Projection> {
        self.projections.iter().find(|p| p.camera_name == camera)
    }

    /// Highest visibility over all cameras, 0 when the object projects nowhere.
    pub fn max_visibility(&self) -> f64 {
        self.projections
            .iter()
            .map(|p| p.visibility)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    pub frame_index: u32,
    pub timestamp: f64,
    /// World-from-ego.
    pub ego_pose: Pose,
    pub cameras: Vec<CameraCalibration>,
    #[serde(default)]
    pub objects: Vec<ObjectAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_refs: Option<BTreeMap<String, String>>,
}

impl Frame {
    pub fn camera(&self, name: &str) -> Option<&CameraCalibration> {
        self.cameras.iter().find(|c| c.camera_name == name)
    }

    pub fn object_by_track(&self, track: &str) -> Option<(usize, &ObjectAnnotation)> {
        self.objects
            .iter()
            .enumerate()
            .find(|(_, o)| o.track_id.as_deref() == Some(track))
    }

    pub fn image_ref(&self, camera: &str) -> Option<&str> {
        self.image_refs.as_ref()?.get(camera).map(String::as_str)
    }
}

/// A world-frame polyline (x, y) used only for BEV rendering.
pub type LanePolyline = Vec<[f64; 2]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub format_version: String,
    pub scene_id: String,
    pub calibrated: bool,
    pub metadata: SceneMetadata,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lanes: Vec<LanePolyline>,
    pub frames: Vec<Frame>,
}

impl Scene {
    pub fn source(&self) -> Source {
        self.metadata.source
    }

    pub fn has_tracks(&self) -> bool {
        self.frames
            .iter()
            .flat_map(|f| &f.objects)
            .any(|o| o.track_id.is_some())
    }

    pub fn camera_names(&self) -> Vec<String> {
        self.frames
            .first()
            .map(|f| f.cameras.iter().map(|c| c.camera_name.clone()).collect())
            .unwrap_or_default()
    }
}

/// Parses and validates a canonical scene document.
pub fn parse_canonical(bytes: &[u8]) -> Result<Scene, SceneError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let scene: Scene = serde_path_to_error::deserialize(de).map_err(|e| SceneError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    validate_scene(&scene)?;
    Ok(scene)
}

/// Serializes a scene in canonical form: compact JSON, stable field order, one line.
pub fn to_canonical_string(scene: &Scene) -> String {
    let mut s = serde_json::to_string(scene).expect("scene serialization is infallible");
    s.push('\n');
    s
}

/// Parses a file holding one canonical scene per line; error paths are prefixed with the line number.
pub fn parse_canonical_lines(text: &str) -> Result<Vec<Scene>, SceneError> {
    let mut out = Vec::new();
    for (n, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        out.push(parse_canonical(line.as_bytes()).map_err(|e| match e {
            SceneError::Schema { path, message } => SceneError::Schema {
                path: format!("line {}:{path}", n + 1),
                message,
            },
            SceneError::Invariant { path, message } => SceneError::Invariant {
                path: format!("line {}:{path}", n + 1),
                message,
            },
        })?);
    }
    Ok(out)
}

fn invariant(path: impl Into<String>, message: impl Into<String>) -> SceneError {
    SceneError::Invariant {
        path: path.into(),
        message: message.into(),
    }
}

fn check_finite(path: &str, values: &[f64]) -> Result<(), SceneError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invariant(path, "non-finite value"))
    }
}

/// Checks every scene invariant, reporting the first violation with its path.
pub fn validate_scene(scene: &Scene) -> Result<(), SceneError> {
    if scene.format_version != FORMAT_VERSION {
        return Err(invariant(
            "format_version",
            format!("unsupported version {:?}", scene.format_version),
        ));
    }
    if scene.frames.is_empty() {
        return Err(invariant("frames", "scene has no frames"));
    }
    for (li, lane) in scene.lanes.iter().enumerate() {
        for (pi, p) in lane.iter().enumerate() {
            check_finite(&format!("lanes[{li}][{pi}]"), p)?;
        }
    }
    let reference: BTreeSet<&str> = scene.frames[0]
        .cameras
        .iter()
        .map(|c| c.camera_name.as_str())
        .collect();
    let mut previous: Option<&Frame> = None;
    for (fi, frame) in scene.frames.iter().enumerate() {
        let fp = format!("frames[{fi}]");
        validate_frame(frame, &fp)?;
        let names: BTreeSet<&str> = frame
            .cameras
            .iter()
            .map(|c| c.camera_name.as_str())
            .collect();
        if names != reference {
            return Err(invariant(
                format!("{fp}.cameras"),
                "camera set differs from the first frame",
            ));
        }
        if let Some(prev) = previous {
            if frame.frame_index <= prev.frame_index {
                return Err(invariant(
                    format!("{fp}.frame_index"),
                    "frame indices must strictly increase",
                ));
            }
            if frame.timestamp <= prev.timestamp {
                return Err(invariant(
                    format!("{fp}.timestamp"),
                    "timestamps must strictly increase",
                ));
            }
        }
        previous = Some(frame);
    }
    Ok(())
}

fn validate_frame(frame: &Frame, fp: &str) -> Result<(), SceneError> {
    check_finite(&format!("{fp}.timestamp"), &[frame.timestamp])?;
    frame
        .ego_pose
        .validate()
        .map_err(|m| invariant(format!("{fp}.ego_pose"), m))?;
    let mut names = BTreeSet::new();
    for (ci, cam) in frame.cameras.iter().enumerate() {
        let cp = format!("{fp}.cameras[{ci}]");
        if !names.insert(cam.camera_name.as_str()) {
            return Err(invariant(
                format!("{cp}.camera_name"),
                "duplicate camera name",
            ));
        }
        let k = &cam.intrinsics;
        check_finite(&format!("{cp}.intrinsics"), &k.concat())?;
        if k[2][2] != 1.0 {
            return Err(invariant(
                format!("{cp}.intrinsics"),
                "intrinsics[2][2] must be 1",
            ));
        }
        if k[0][0] <= 0.0 || k[1][1] <= 0.0 {
            return Err(invariant(
                format!("{cp}.intrinsics"),
                "focal lengths must be positive",
            ));
        }
        cam.extrinsic
            .validate()
            .map_err(|m| invariant(format!("{cp}.extrinsic"), m))?;
        if cam.image_size[0] == 0 || cam.image_size[1] == 0 {
            return Err(invariant(
                format!("{cp}.image_size"),
                "image size must be positive",
            ));
        }
    }
    if let Some(refs) = &frame.image_refs {
        for key in refs.keys() {
            if !names.contains(key.as_str()) {
                return Err(invariant(
                    format!("{fp}.image_refs.{key}"),
                    "image reference for unknown camera",
                ));
            }
        }
    }
    let mut tracks = BTreeSet::new();
    for (oi, obj) in frame.objects.iter().enumerate() {
        let op = format!("{fp}.objects[{oi}]");
        check_finite(&format!("{op}.center"), &obj.center)?;
        check_finite(&format!("{op}.yaw"), &[obj.yaw])?;
        if obj.size.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(invariant(format!("{op}.size"), "sizes must be positive"));
        }
        if !(-PI..=PI).contains(&obj.yaw) {
            return Err(invariant(format!("{op}.yaw"), "yaw outside [-pi, pi]"));
        }
        if let Some(v) = &obj.velocity {
            check_finite(&format!("{op}.velocity"), v)?;
        }
        if let Some(t) = &obj.track_id {
            if !tracks.insert(t.as_str()) {
                return Err(invariant(
                    format!("{op}.track_id"),
                    "duplicate track id in frame",
                ));
            }
        }
        let mut seen = BTreeSet::new();
        for (pi, proj) in obj.projections.iter().enumerate() {
            let pp = format!("{op}.projections[{pi}]");
            if !names.contains(proj.camera_name.as_str()) {
                return Err(invariant(format!("{pp}.camera_name"), "unknown camera"));
            }
            if !seen.insert(proj.camera_name.as_str()) {
                return Err(invariant(
                    format!("{pp}.camera_name"),
                    "camera listed twice",
                ));
            }
            if !(0.0..=1.0).contains(&proj.visibility) {
                return Err(invariant(
                    format!("{pp}.visibility"),
                    "visibility outside [0, 1]",
                ));
            }
            check_finite(&format!("{pp}.bbox"), &proj.bbox)?;
        }
    }
    Ok(())
}
