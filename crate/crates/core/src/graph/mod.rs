//! Dynamic multi-relational scene graph.
//!
//! Nodes are object instances per frame plus one ego node per frame. Four
//! edge families are built: spatial relations, action self-loops, directed
//! interactions and temporal links between consecutive observations of a
//! track.

pub mod interaction;
pub mod motion;
pub mod relation;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub use interaction::{classify_interaction, Alignment, Interaction};
pub use motion::{
    classify_actions, estimate_velocity, motion_table, Action, MotionState, VelocitySource,
};
pub use relation::{
    adaptive_threshold, classify_relation, local_projection, relation_from_local, Relation,
};

use crate::error::GraphError;
use crate::schema::{Category, Scene};

/// Numeric thresholds used by graph construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSet {
    pub delta_xy_floor: f64,
    pub delta_z: f64,
    pub eps_v: f64,
    pub eps_a: f64,
    pub eps_lane: f64,
    pub delta_int: f64,
    pub same_lane: f64,
    pub visibility_view: f64,
    pub longitudinal_offset: f64,
    pub overtake_margin: f64,
    pub comoving_band: f64,
    pub crossing_proximity: f64,
}

impl Default for ThresholdSet {
    fn default() -> Self {
        ThresholdSet {
            delta_xy_floor: 1.0,
            delta_z: 1.5,
            eps_v: 0.5,
            eps_a: 0.5,
            eps_lane: 1.0,
            delta_int: 30.0,
            same_lane: 2.0,
            visibility_view: 0.1,
            longitudinal_offset: 1.0,
            overtake_margin: 0.5,
            comoving_band: 1.0,
            crossing_proximity: 10.0,
        }
    }
}

impl ThresholdSet {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("delta_xy_floor", self.delta_xy_floor),
            ("delta_z", self.delta_z),
            ("eps_v", self.eps_v),
            ("eps_a", self.eps_a),
            ("eps_lane", self.eps_lane),
            ("delta_int", self.delta_int),
            ("same_lane", self.same_lane),
            ("visibility_view", self.visibility_view),
            ("longitudinal_offset", self.longitudinal_offset),
            ("overtake_margin", self.overtake_margin),
            ("comoving_band", self.comoving_band),
            ("crossing_proximity", self.crossing_proximity),
        ];
        match fields.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            Some((name, v)) => Err(format!("threshold {name} must be positive, got {v}")),
            None => Ok(()),
        }
    }
}

/// Node address: frame index plus object index, `None` for the ego.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeKey {
    pub frame: usize,
    pub object: Option<usize>,
}

impl NodeKey {
    pub fn object(frame: usize, object: usize) -> Self {
        NodeKey {
            frame,
            object: Some(object),
        }
    }

    pub fn ego(frame: usize) -> Self {
        NodeKey {
            frame,
            object: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub key: NodeKey,
    pub track_id: Option<String>,
    /// `None` for the ego.
    pub category: Option<Category>,
    pub center: [f64; 3],
    pub size: [f64; 3],
    pub yaw: f64,
    pub velocity: [f64; 3],
    pub velocity_source: VelocitySource,
    pub cameras: Vec<String>,
}

impl Node {
    pub fn center_vec(&self) -> Vector3<f64> {
        Vector3::from(self.center)
    }

    pub fn speed(&self) -> f64 {
        Vector3::from(self.velocity).norm()
    }

    pub fn is_ego(&self) -> bool {
        self.key.object.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeLabel {
    Relation(Relation),
    Action(Action),
    Interaction(Interaction),
    Temporal,
}

impl EdgeLabel {
    pub fn kind(&self) -> &'static str {
        match self {
            EdgeLabel::Relation(_) => "relation",
            EdgeLabel::Action(_) => "action",
            EdgeLabel::Interaction(_) => "interaction",
            EdgeLabel::Temporal => "temporal",
        }
    }

    pub fn name(&self) -> String {
        match self {
            EdgeLabel::Relation(r) => format!("{r:?}"),
            EdgeLabel::Action(a) => format!("{a:?}"),
            EdgeLabel::Interaction(i) => format!("{i:?}"),
            EdgeLabel::Temporal => "Next".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub src: NodeKey,
    pub dst: NodeKey,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone)]
pub struct SceneGraph {
    pub scene_id: String,
    pub frame_count: usize,
    pub nodes: Vec<Node>,
    pub relations: Vec<Edge>,
    pub actions: Vec<Edge>,
    pub interactions: Vec<Edge>,
    pub temporal: Vec<Edge>,
    pub thresholds: ThresholdSet,
    pub temporal_disabled: bool,
    index: BTreeMap<NodeKey, usize>,
    relation_map: BTreeMap<(NodeKey, NodeKey), Relation>,
    action_map: BTreeMap<NodeKey, BTreeSet<Action>>,
}

impl SceneGraph {
    pub fn node(&self, key: NodeKey) -> Option<&Node> {
        self.index.get(&key).map(|&i| &self.nodes[i])
    }

    /// Object nodes of one frame in annotation order.
    pub fn frame_objects(&self, frame: usize) -> impl Iterator<Item = &Node> {
        self.index
            .range(NodeKey::ego(frame)..NodeKey::ego(frame + 1))
            .map(|(_, &i)| &self.nodes[i])
            .filter(|n| !n.is_ego())
    }

    pub fn relation(&self, src: NodeKey, dst: NodeKey) -> Option<Relation> {
        self.relation_map.get(&(src, dst)).copied()
    }

    pub fn actions(&self, key: NodeKey) -> BTreeSet<Action> {
        self.action_map.get(&key).cloned().unwrap_or_default()
    }

    pub fn interactions_at(
        &self,
        frame: usize,
    ) -> impl Iterator<Item = (NodeKey, NodeKey, Interaction)> + '_ {
        self.interactions
            .iter()
            .filter(move |e| e.src.frame == frame)
            .filter_map(|e| match e.label {
                EdgeLabel::Interaction(i) => Some((e.src, e.dst, i)),
                _ => None,
            })
    }

    /// Node of `track` at `frame`, if observed.
    pub fn track_node(&self, track: &str, frame: usize) -> Option<&Node> {
        self.frame_objects(frame)
            .find(|n| n.track_id.as_deref() == Some(track))
    }

    pub fn edge_count(&self) -> usize {
        self.relations.len() + self.actions.len() + self.interactions.len() + self.temporal.len()
    }

    /// Canonical export: compact JSON on one line, edges in sorted order.
    pub fn to_export_string(&self) -> String {
        #[derive(Serialize)]
        struct EdgeDoc<'a> {
            kind: &'a str,
            src: NodeKey,
            dst: NodeKey,
            label: String,
        }
        #[derive(Serialize)]
        struct GraphDoc<'a> {
            scene_id: &'a str,
            temporal_disabled: bool,
            thresholds: &'a ThresholdSet,
            nodes: &'a [Node],
            edges: Vec<EdgeDoc<'a>>,
        }
        let edges = [
            &self.relations,
            &self.actions,
            &self.interactions,
            &self.temporal,
        ]
        .into_iter()
        .flatten()
        .map(|e| EdgeDoc {
            kind: e.label.kind(),
            src: e.src,
            dst: e.dst,
            label: e.label.name(),
        })
        .collect();
        let doc = GraphDoc {
            scene_id: &self.scene_id,
            temporal_disabled: self.temporal_disabled,
            thresholds: &self.thresholds,
            nodes: &self.nodes,
            edges,
        };
        let mut s = serde_json::to_string(&doc).expect("graph serialization is infallible");
        s.push('\n');
        s
    }
}

/// Temporal edges between consecutive observations of each track.
pub fn link_temporal(scene: &Scene) -> Vec<Edge> {
    let mut out = BTreeSet::new();
    for t in 0..scene.frames.len().saturating_sub(1) {
        for (i, obj) in scene.frames[t].objects.iter().enumerate() {
            let Some(track) = &obj.track_id else { continue };
            if let Some((j, _)) = scene.frames[t + 1].object_by_track(track) {
                out.insert(Edge {
                    src: NodeKey::object(t, i),
                    dst: NodeKey::object(t + 1, j),
                    label: EdgeLabel::Temporal,
                });
            }
        }
    }
    out.into_iter().collect()
}

fn ego_velocity(scene: &Scene, t: usize) -> Vector3<f64> {
    let n = scene.frames.len();
    if n < 2 {
        return Vector3::zeros();
    }
    let (a, b) = if t == 0 { (0, 1) } else { (t - 1, t) };
    let dt = scene.frames[b].timestamp - scene.frames[a].timestamp;
    let disp = scene.frames[b].ego_pose.translation() - scene.frames[a].ego_pose.translation();
    scene.frames[t].ego_pose.inverse().transform_vector(&disp) / dt
}

pub fn build_graph(scene: &Scene, th: &ThresholdSet) -> Result<SceneGraph, GraphError> {
    if !scene.calibrated {
        return Err(GraphError::NotCalibrated(scene.scene_id.clone()));
    }
    let table = motion_table(scene)?;
    let mut nodes = Vec::new();
    let mut index = BTreeMap::new();
    let ego_size = scene.metadata.ego_type.size();
    for (t, frame) in scene.frames.iter().enumerate() {
        index.insert(NodeKey::ego(t), nodes.len());
        nodes.push(Node {
            key: NodeKey::ego(t),
            track_id: None,
            category: None,
            center: [0.0; 3],
            size: ego_size,
            yaw: 0.0,
            velocity: ego_velocity(scene, t).into(),
            velocity_source: VelocitySource::Estimated,
            cameras: Vec::new(),
        });
        for (i, obj) in frame.objects.iter().enumerate() {
            let st = &table[t][i];
            let key = NodeKey::object(t, i);
            index.insert(key, nodes.len());
            nodes.push(Node {
                key,
                track_id: obj.track_id.clone(),
                category: Some(obj.category),
                center: obj.center,
                size: obj.size,
                yaw: obj.yaw,
                velocity: st.velocity.into(),
                velocity_source: st.velocity_source,
                cameras: obj
                    .projections
                    .iter()
                    .filter(|p| p.visibility >= th.visibility_view)
                    .map(|p| p.camera_name.clone())
                    .collect(),
            });
        }
    }

    let mut relations = BTreeSet::new();
    let mut actions = BTreeSet::new();
    let mut interactions = BTreeSet::new();
    let mut action_map = BTreeMap::new();
    for (t, frame) in scene.frames.iter().enumerate() {
        let keys: Vec<NodeKey> = std::iter::once(NodeKey::ego(t))
            .chain((0..frame.objects.len()).map(|i| NodeKey::object(t, i)))
            .collect();
        for &a in &keys {
            let na = &nodes[index[&a]];
            for &b in &keys {
                if a == b {
                    continue;
                }
                let nb = &nodes[index[&b]];
                if let Some(r) = classify_relation(
                    &na.center_vec(),
                    na.yaw,
                    na.size,
                    &nb.center_vec(),
                    th.delta_xy_floor,
                ) {
                    relations.insert(Edge {
                        src: a,
                        dst: b,
                        label: EdgeLabel::Relation(r),
                    });
                }
            }
        }
        let mut frame_actions = Vec::with_capacity(frame.objects.len());
        for (i, obj) in frame.objects.iter().enumerate() {
            let set = classify_actions(obj.category, obj.yaw, &table, t, i, th);
            let key = NodeKey::object(t, i);
            for &a in &set {
                actions.insert(Edge {
                    src: key,
                    dst: key,
                    label: EdgeLabel::Action(a),
                });
            }
            action_map.insert(key, set.clone());
            frame_actions.push(set);
        }
        if t == 0 {
            continue;
        }
        let rel = motion::relative_ego_motion(scene, t);
        let agents: Vec<interaction::Agent> = frame
            .objects
            .iter()
            .enumerate()
            .map(|(i, obj)| interaction::Agent {
                center: obj.center_vec(),
                yaw: obj.yaw,
                speed: table[t][i].velocity.norm(),
                moving: !frame_actions[i].contains(&Action::Stopped),
                lane_changing: frame_actions[i].iter().any(|a| a.is_lane_change()),
            })
            .collect();
        let prev_objects = &scene.frames[t - 1].objects;
        for i in 0..agents.len() {
            for j in 0..agents.len() {
                if i == j {
                    continue;
                }
                let prev_distance = match (table[t][i].prev_index, table[t][j].prev_index) {
                    (Some(pi), Some(pj)) => {
                        let ci = rel.transform_point(&prev_objects[pi].center_vec());
                        let cj = rel.transform_point(&prev_objects[pj].center_vec());
                        Some((ci - cj).norm())
                    }
                    _ => None,
                };
                if let Some(c) = classify_interaction(&agents[i], &agents[j], prev_distance, th) {
                    let (ki, kj) = (NodeKey::object(t, i), NodeKey::object(t, j));
                    interactions.insert(Edge {
                        src: ki,
                        dst: kj,
                        label: EdgeLabel::Interaction(c.label),
                    });
                    if c.reciprocal_yield {
                        interactions.insert(Edge {
                            src: kj,
                            dst: ki,
                            label: EdgeLabel::Interaction(Interaction::Yielding),
                        });
                    }
                }
            }
        }
    }

    let relations: Vec<Edge> = relations.into_iter().collect();
    let relation_map = relations
        .iter()
        .filter_map(|e| match e.label {
            EdgeLabel::Relation(r) => Some(((e.src, e.dst), r)),
            _ => None,
        })
        .collect();
    let temporal_disabled = !scene.has_tracks();
    Ok(SceneGraph {
        scene_id: scene.scene_id.clone(),
        frame_count: scene.frames.len(),
        nodes,
        relations,
        actions: actions.into_iter().collect(),
        interactions: interactions.into_iter().collect(),
        temporal: if temporal_disabled {
            Vec::new()
        } else {
            link_temporal(scene)
        },
        thresholds: *th,
        temporal_disabled,
        index,
        relation_map,
        action_map,
    })
}
