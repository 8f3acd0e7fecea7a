//! Event-sourced review state.
//!
//! Every accepted submission is appended to a line-delimited log before the
//! in-memory index changes, and [`Store::open`] rebuilds the index by
//! replaying that log through the same validation path.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use sceneqa::camera::front_camera;
use sceneqa::graph::{build_graph, SceneGraph, ThresholdSet};
use sceneqa::metadata::apply_human_label;
use sceneqa::qa::{Ability, Answer, QAItem, ReviewOutcome, ReviewStamp, TaskId};
use sceneqa::render::{camera_tile, render_bev, write_png, BevStyle, MultiviewStyle};
use sceneqa::schema::{Provenance, Scene};
use sceneqa::scoring::PredictionRecord;

pub const METADATA_FIELDS: [&str; 3] = ["weather", "time_of_day", "scene_type"];

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("asset missing: {0}")]
    MissingAsset(String),
    #[error("{annotator} already submitted a verdict for {target}")]
    DuplicateVerdict { annotator: String, target: String },
    #[error("{annotator} already answered {item}")]
    DuplicateAnswer { annotator: String, item: String },
    #[error("invalid record: {0}")]
    Invariant(String),
    #[error("answer type mismatch: {0}")]
    Type(String),
    #[error("bad filter: {0}")]
    BadFilter(String),
    #[error("render failed: {0}")]
    Render(String),
    #[error("log write failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("log line {line}: {message}")]
    Replay { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Qa { item_id: String },
    Metadata { scene_id: String, field: String },
}

impl Target {
    pub fn key(&self) -> String {
        match self {
            Target::Qa { item_id } => format!("qa:{item_id}"),
            Target::Metadata { scene_id, field } => format!("metadata:{scene_id}:{field}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject,
    Edit,
}

/// Per-item QA check list; `false` marks a failed criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionFlags {
    pub answer_correct: bool,
    pub option_unique: bool,
    pub plausible: bool,
    pub objects_visible: bool,
}

impl CriterionFlags {
    pub const NAMES: [&'static str; 4] = [
        "answer_correct",
        "option_unique",
        "plausible",
        "objects_visible",
    ];

    pub fn values(&self) -> [bool; 4] {
        [
            self.answer_correct,
            self.option_unique,
            self.plausible,
            self.objects_visible,
        ]
    }

    pub fn all_pass(&self) -> bool {
        self.values().iter().all(|v| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationRecord {
    pub target: Target,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<CriterionFlags>,
    /// Metadata edits carry the new label; QA edits carry the revised item.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edited_value: Option<Value>,
    pub annotator_id: String,
    pub started_at: f64,
    pub submitted_at: f64,
}

impl VerificationRecord {
    pub fn duration(&self) -> f64 {
        self.submitted_at - self.started_at
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanAnswer {
    pub item_id: String,
    pub annotator_id: String,
    pub answer: Answer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submitted_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Verdict(VerificationRecord),
    Answer(HumanAnswer),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueKind {
    Qa,
    Metadata,
    HumanEval,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct QueueQuery {
    pub kind: Option<String>,
    pub annotator: Option<String>,
    pub task: Option<String>,
    pub ability: Option<String>,
    pub scene_id: Option<String>,
    pub offset: Option<usize>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueuePage {
    pub kind: QueueKind,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub targets: Vec<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemStatus {
    Pending,
    Accepted,
    Edited,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QcStats {
    pub items: usize,
    pub reviewed: usize,
    pub pending: usize,
    pub accepted: usize,
    pub edited: usize,
    pub rejected: usize,
    /// Percentage of decided items that passed when edits count as passes.
    pub pass_rate_edit_as_pass: Option<f64>,
    /// Percentage of decided items that passed when edits count as failures.
    pub pass_rate_edit_as_fail: Option<f64>,
    /// True when no item has been decided yet.
    pub pass_rate_undefined: bool,
    pub criterion_rejects: BTreeMap<String, usize>,
    pub verdicts: usize,
    pub metadata_verdicts: usize,
    pub human_answers: usize,
    pub review_seconds: f64,
    pub human_eval_seconds: f64,
    pub annotator_seconds: BTreeMap<String, f64>,
}

/// Corpus filter shared by the queue and the export.
#[derive(Debug, Clone, Default)]
struct ItemFilter {
    task: Option<TaskId>,
    ability: Option<Ability>,
    scene_id: Option<String>,
}

impl ItemFilter {
    fn parse(
        task: Option<&str>,
        ability: Option<&str>,
        scene_id: Option<&str>,
    ) -> Result<Self, ReviewError> {
        let task = task
            .map(|t| {
                TaskId::parse(t)
                    .ok_or_else(|| ReviewError::BadFilter(format!("unknown task {t:?}")))
            })
            .transpose()?;
        let ability = ability
            .map(|a| {
                serde_json::from_value::<Ability>(Value::String(a.to_string()))
                    .map_err(|_| ReviewError::BadFilter(format!("unknown ability {a:?}")))
            })
            .transpose()?;
        Ok(ItemFilter {
            task,
            ability,
            scene_id: scene_id.map(str::to_string),
        })
    }

    fn keeps(&self, item: &QAItem) -> bool {
        self.task.is_none_or(|t| item.task_id == t)
            && self.ability.is_none_or(|a| item.ability == a)
            && self.scene_id.as_ref().is_none_or(|s| *s == item.scene_id)
    }
}

pub struct Store {
    items: BTreeMap<String, QAItem>,
    scenes: BTreeMap<String, Scene>,
    graphs: BTreeMap<String, SceneGraph>,
    verdicts: Vec<VerificationRecord>,
    answers: Vec<HumanAnswer>,
    decided: BTreeSet<(String, Target)>,
    answered: BTreeSet<(String, String)>,
    quorum: usize,
    edits_pass: bool,
    log: Option<(PathBuf, File)>,
}

impl Store {
    /// In-memory store without persistence.
    pub fn new(items: Vec<QAItem>, scenes: Vec<Scene>, quorum: usize) -> Self {
        let graphs = scenes
            .iter()
            .filter_map(|s| {
                build_graph(s, &ThresholdSet::default())
                    .ok()
                    .map(|g| (s.scene_id.clone(), g))
            })
            .collect();
        Store {
            items: items.into_iter().map(|i| (i.item_id.clone(), i)).collect(),
            scenes: scenes
                .into_iter()
                .map(|s| (s.scene_id.clone(), s))
                .collect(),
            graphs,
            verdicts: Vec::new(),
            answers: Vec::new(),
            decided: BTreeSet::new(),
            answered: BTreeSet::new(),
            quorum: quorum.max(1),
            edits_pass: true,
            log: None,
        }
    }

    pub fn with_edits_pass(mut self, edits_pass: bool) -> Self {
        self.edits_pass = edits_pass;
        self
    }

    /// Store backed by `log_path`: existing events are replayed, new ones appended.
    pub fn open(
        items: Vec<QAItem>,
        scenes: Vec<Scene>,
        quorum: usize,
        log_path: &Path,
    ) -> Result<Self, ReviewError> {
        let mut store = Store::new(items, scenes, quorum);
        if log_path.exists() {
            let reader = BufReader::new(File::open(log_path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let replay = |message: String| ReviewError::Replay {
                    line: n + 1,
                    message,
                };
                let event: LogEvent =
                    serde_json::from_str(&line).map_err(|e| replay(e.to_string()))?;
                store.apply(event).map_err(|e| replay(e.to_string()))?;
            }
        } else if let Some(dir) = log_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(log_path)?;
        store.log = Some((log_path.to_path_buf(), file));
        Ok(store)
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.log.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn item(&self, id: &str) -> Option<&QAItem> {
        self.items.get(id)
    }

    pub fn scene(&self, id: &str) -> Option<&Scene> {
        self.scenes.get(id)
    }

    pub fn scenes(&self) -> impl Iterator<Item = &Scene> {
        self.scenes.values()
    }

    pub fn verdicts(&self) -> &[VerificationRecord] {
        &self.verdicts
    }

    pub fn answers(&self) -> &[HumanAnswer] {
        &self.answers
    }

    pub fn submit_verdict(&mut self, record: VerificationRecord) -> Result<(), ReviewError> {
        self.check_verdict(&record)?;
        self.append(&LogEvent::Verdict(record.clone()))?;
        self.commit_verdict(record);
        Ok(())
    }

    /// Validates and stores a human-eval answer; returns it as a scoreable prediction.
    pub fn submit_answer(&mut self, answer: HumanAnswer) -> Result<PredictionRecord, ReviewError> {
        let record = self.check_answer(&answer)?;
        self.append(&LogEvent::Answer(answer.clone()))?;
        self.answered
            .insert((answer.annotator_id.clone(), answer.item_id.clone()));
        self.answers.push(answer);
        Ok(record)
    }

    fn apply(&mut self, event: LogEvent) -> Result<(), ReviewError> {
        match event {
            LogEvent::Verdict(v) => {
                self.check_verdict(&v)?;
                self.commit_verdict(v);
            }
            LogEvent::Answer(a) => {
                self.check_answer(&a)?;
                self.answered
                    .insert((a.annotator_id.clone(), a.item_id.clone()));
                self.answers.push(a);
            }
        }
        Ok(())
    }

    fn append(&mut self, event: &LogEvent) -> Result<(), ReviewError> {
        if let Some((_, file)) = &mut self.log {
            let mut line = serde_json::to_string(event).expect("events serialize");
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        Ok(())
    }

    fn check_verdict(&self, r: &VerificationRecord) -> Result<(), ReviewError> {
        let invalid = |m: &str| Err(ReviewError::Invariant(m.to_string()));
        if r.annotator_id.trim().is_empty() {
            return invalid("annotator_id is empty");
        }
        if !(r.started_at.is_finite()
            && r.submitted_at.is_finite()
            && r.submitted_at >= r.started_at)
        {
            return invalid("submitted_at must be a time at or after started_at");
        }
        if self
            .decided
            .contains(&(r.annotator_id.clone(), r.target.clone()))
        {
            return Err(ReviewError::DuplicateVerdict {
                annotator: r.annotator_id.clone(),
                target: r.target.key(),
            });
        }
        if r.verdict == Verdict::Edit && r.edited_value.is_none() {
            return invalid("edit verdicts carry edited_value");
        }
        if r.verdict != Verdict::Edit && r.edited_value.is_some() {
            return invalid("edited_value is only allowed on edit verdicts");
        }
        match &r.target {
            Target::Qa { item_id } => {
                let item = self
                    .items
                    .get(item_id)
                    .ok_or_else(|| ReviewError::NotFound(format!("item {item_id}")))?;
                match (r.verdict, r.criteria) {
                    (Verdict::Reject, None) => return invalid("reject requires criterion flags"),
                    (Verdict::Reject, Some(c)) if c.all_pass() => {
                        return invalid("reject requires at least one failed criterion")
                    }
                    (Verdict::Accept, Some(c)) if !c.all_pass() => {
                        return invalid("accept cannot carry a failed criterion")
                    }
                    _ => {}
                }
                if let Some(v) = &r.edited_value {
                    let revised: QAItem = serde_json::from_value(v.clone())
                        .map_err(|e| ReviewError::Invariant(format!("edited item: {e}")))?;
                    check_revision(item, &revised)?;
                }
            }
            Target::Metadata { scene_id, field } => {
                let scene = self
                    .scenes
                    .get(scene_id)
                    .ok_or_else(|| ReviewError::NotFound(format!("scene {scene_id}")))?;
                if !METADATA_FIELDS.contains(&field.as_str()) {
                    return invalid("unknown metadata field");
                }
                if r.criteria.is_some() {
                    return invalid("criterion flags apply to QA targets only");
                }
                match r.verdict {
                    Verdict::Reject => return invalid("metadata targets take accept or edit"),
                    Verdict::Accept if metadata_value(scene, field).is_none() => {
                        return invalid("cannot accept an empty field")
                    }
                    Verdict::Edit => {
                        let value =
                            r.edited_value
                                .as_ref()
                                .and_then(Value::as_str)
                                .ok_or_else(|| {
                                    ReviewError::Invariant(
                                        "metadata edited_value must be a string".into(),
                                    )
                                })?;
                        let mut probe = scene.clone();
                        apply_human_label(&mut probe, field, value)
                            .map_err(|e| ReviewError::Invariant(e.to_string()))?;
                    }
                    Verdict::Accept => {}
                }
            }
        }
        Ok(())
    }

    fn commit_verdict(&mut self, r: VerificationRecord) {
        if let Target::Metadata { scene_id, field } = &r.target {
            let scene = self.scenes.get_mut(scene_id).expect("checked");
            let value = match &r.edited_value {
                Some(v) => v.as_str().expect("checked").to_string(),
                None => metadata_value(scene, field).expect("checked").0,
            };
            apply_human_label(scene, field, &value).expect("checked");
        }
        self.decided
            .insert((r.annotator_id.clone(), r.target.clone()));
        self.verdicts.push(r);
    }

    fn check_answer(&self, a: &HumanAnswer) -> Result<PredictionRecord, ReviewError> {
        let item = self
            .items
            .get(&a.item_id)
            .ok_or_else(|| ReviewError::NotFound(format!("item {}", a.item_id)))?;
        if a.annotator_id.trim().is_empty() {
            return Err(ReviewError::Invariant("annotator_id is empty".into()));
        }
        if let (Some(s), Some(e)) = (a.started_at, a.submitted_at) {
            if !(s.is_finite() && e.is_finite() && e >= s) {
                return Err(ReviewError::Invariant(
                    "submitted_at must be at or after started_at".into(),
                ));
            }
        }
        if self
            .answered
            .contains(&(a.annotator_id.clone(), a.item_id.clone()))
        {
            return Err(ReviewError::DuplicateAnswer {
                annotator: a.annotator_id.clone(),
                item: a.item_id.clone(),
            });
        }
        match (&item.options, a.answer) {
            (Some(_), Answer::Value(_)) => {
                return Err(ReviewError::Type(format!(
                    "{} takes an option index",
                    item.item_id
                )))
            }
            (None, Answer::Index(_)) => {
                return Err(ReviewError::Type(format!(
                    "{} takes a numeric answer",
                    item.item_id
                )))
            }
            (Some(opts), Answer::Index(i)) if i >= opts.len() => {
                return Err(ReviewError::Type(format!(
                    "option {i} out of range for {}",
                    item.item_id
                )))
            }
            (None, Answer::Value(v)) if !v.is_finite() => {
                return Err(ReviewError::Type("numeric answer must be finite".into()))
            }
            _ => {}
        }
        Ok(PredictionRecord::from_answer(
            item,
            a.annotator_id.clone(),
            a.answer,
        ))
    }

    /// Human-eval answers as prediction records, grouped by annotator in submission order.
    pub fn predictions(&self) -> Vec<PredictionRecord> {
        let mut out: Vec<(String, usize, PredictionRecord)> = self
            .answers
            .iter()
            .enumerate()
            .map(|(n, a)| {
                let item = &self.items[&a.item_id];
                (
                    a.annotator_id.clone(),
                    n,
                    PredictionRecord::from_answer(item, a.annotator_id.clone(), a.answer),
                )
            })
            .collect();
        out.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
        out.into_iter().map(|(_, _, p)| p).collect()
    }

    fn item_verdicts<'a>(
        &'a self,
        item_id: &'a str,
    ) -> impl Iterator<Item = &'a VerificationRecord> + 'a {
        self.verdicts
            .iter()
            .filter(move |v| matches!(&v.target, Target::Qa { item_id: id } if id == item_id))
    }

    pub fn status(&self, item_id: &str) -> ItemStatus {
        let (mut accepts, mut edits, mut rejects) = (0, 0, 0);
        for v in self.item_verdicts(item_id) {
            match v.verdict {
                Verdict::Accept => accepts += 1,
                Verdict::Edit => edits += 1,
                Verdict::Reject => rejects += 1,
            }
        }
        if rejects > 0 {
            ItemStatus::Rejected
        } else if accepts + edits < self.quorum {
            ItemStatus::Pending
        } else if edits > 0 {
            ItemStatus::Edited
        } else {
            ItemStatus::Accepted
        }
    }

    /// Items that passed review, with edits applied and verdict provenance attached.
    pub fn export(
        &self,
        task: Option<&str>,
        ability: Option<&str>,
        scene_id: Option<&str>,
    ) -> Result<Vec<QAItem>, ReviewError> {
        let filter = ItemFilter::parse(task, ability, scene_id)?;
        let mut out = Vec::new();
        for item in self.items.values().filter(|i| filter.keeps(i)) {
            let outcome = match self.status(&item.item_id) {
                ItemStatus::Accepted => ReviewOutcome::Accepted,
                ItemStatus::Edited if self.edits_pass => ReviewOutcome::Edited,
                _ => continue,
            };
            let verdicts: Vec<&VerificationRecord> = self.item_verdicts(&item.item_id).collect();
            let mut exported = verdicts
                .iter()
                .rev()
                .find_map(|v| v.edited_value.clone())
                .map(|v| serde_json::from_value::<QAItem>(v).expect("checked on submit"))
                .unwrap_or_else(|| item.clone());
            exported.review = Some(ReviewStamp {
                outcome,
                accepts: verdicts
                    .iter()
                    .filter(|v| v.verdict == Verdict::Accept)
                    .count(),
                edits: verdicts
                    .iter()
                    .filter(|v| v.verdict == Verdict::Edit)
                    .count(),
                annotators: verdicts.iter().map(|v| v.annotator_id.clone()).collect(),
            });
            out.push(exported);
        }
        Ok(out)
    }

    pub fn stats(&self) -> QcStats {
        let mut s = QcStats {
            items: self.items.len(),
            reviewed: 0,
            pending: 0,
            accepted: 0,
            edited: 0,
            rejected: 0,
            pass_rate_edit_as_pass: None,
            pass_rate_edit_as_fail: None,
            pass_rate_undefined: true,
            criterion_rejects: CriterionFlags::NAMES
                .iter()
                .map(|n| (n.to_string(), 0))
                .collect(),
            verdicts: self.verdicts.len(),
            metadata_verdicts: self
                .verdicts
                .iter()
                .filter(|v| matches!(v.target, Target::Metadata { .. }))
                .count(),
            human_answers: self.answers.len(),
            review_seconds: 0.0,
            human_eval_seconds: 0.0,
            annotator_seconds: BTreeMap::new(),
        };
        for id in self.items.keys() {
            match self.status(id) {
                ItemStatus::Pending => s.pending += 1,
                ItemStatus::Accepted => s.accepted += 1,
                ItemStatus::Edited => s.edited += 1,
                ItemStatus::Rejected => s.rejected += 1,
            }
        }
        s.reviewed = s.accepted + s.edited + s.rejected;
        if s.reviewed > 0 {
            let n = s.reviewed as f64;
            s.pass_rate_edit_as_pass = Some(100.0 * (s.accepted + s.edited) as f64 / n);
            s.pass_rate_edit_as_fail = Some(100.0 * s.accepted as f64 / n);
            s.pass_rate_undefined = false;
        }
        for v in &self.verdicts {
            if let (Verdict::Reject, Some(c)) = (v.verdict, v.criteria) {
                for (name, ok) in CriterionFlags::NAMES.iter().zip(c.values()) {
                    if !ok {
                        *s.criterion_rejects
                            .get_mut(*name)
                            .expect("all names present") += 1;
                    }
                }
            }
            s.review_seconds += v.duration();
            *s.annotator_seconds
                .entry(v.annotator_id.clone())
                .or_default() += v.duration();
        }
        for a in &self.answers {
            if let (Some(start), Some(end)) = (a.started_at, a.submitted_at) {
                s.human_eval_seconds += end - start;
                *s.annotator_seconds
                    .entry(a.annotator_id.clone())
                    .or_default() += end - start;
            }
        }
        s
    }

    pub fn queue(&self, q: &QueueQuery, default_limit: usize) -> Result<QueuePage, ReviewError> {
        let kind = match q.kind.as_deref().unwrap_or("qa") {
            "qa" => QueueKind::Qa,
            "metadata" => QueueKind::Metadata,
            "human_eval" => QueueKind::HumanEval,
            other => {
                return Err(ReviewError::BadFilter(format!(
                    "unknown queue kind {other:?}"
                )))
            }
        };
        let limit = q.limit.unwrap_or(default_limit);
        if limit == 0 || limit > 1000 {
            return Err(ReviewError::BadFilter("limit must be in 1..=1000".into()));
        }
        let offset = q.offset.unwrap_or(0);
        let filter = ItemFilter::parse(
            q.task.as_deref(),
            q.ability.as_deref(),
            q.scene_id.as_deref(),
        )?;
        let done_by = |target: Target| {
            q.annotator
                .as_ref()
                .is_some_and(|a| self.decided.contains(&(a.clone(), target)))
        };
        let entries: Vec<Value> = match kind {
            QueueKind::Qa => self
                .items
                .values()
                .filter(|i| filter.keeps(i))
                .filter(|i| {
                    !done_by(Target::Qa {
                        item_id: i.item_id.clone(),
                    })
                })
                .map(
                    |i| json!({"item_id": i.item_id, "task_id": i.task_id, "scene_id": i.scene_id}),
                )
                .collect(),
            QueueKind::HumanEval => self
                .items
                .values()
                .filter(|i| filter.keeps(i))
                .filter(|i| {
                    q.annotator
                        .as_ref()
                        .is_none_or(|a| !self.answered.contains(&(a.clone(), i.item_id.clone())))
                })
                .map(
                    |i| json!({"item_id": i.item_id, "task_id": i.task_id, "scene_id": i.scene_id}),
                )
                .collect(),
            QueueKind::Metadata => {
                if filter.task.is_some() || filter.ability.is_some() {
                    return Err(ReviewError::BadFilter(
                        "task and ability filters apply to QA queues".into(),
                    ));
                }
                self.scenes
                    .values()
                    .filter(|s| filter.scene_id.as_ref().is_none_or(|id| *id == s.scene_id))
                    .flat_map(|s| METADATA_FIELDS.iter().map(move |f| (s, *f)))
                    .filter(|(s, f)| {
                        !done_by(Target::Metadata {
                            scene_id: s.scene_id.clone(),
                            field: f.to_string(),
                        })
                    })
                    .map(|(s, f)| {
                        let v = metadata_value(s, f);
                        json!({
                            "scene_id": s.scene_id,
                            "field": f,
                            "value": v.as_ref().map(|x| x.0.clone()),
                            "provenance": v.map(|x| x.1),
                        })
                    })
                    .collect()
            }
        };
        Ok(QueuePage {
            kind,
            total: entries.len(),
            offset,
            limit,
            targets: entries.into_iter().skip(offset).take(limit).collect(),
        })
    }

    /// Everything a reviewer needs for `id`, which names a QA item or a scene.
    pub fn bundle(&self, id: &str, asset_root: &Path) -> Result<Value, ReviewError> {
        if let Some(item) = self.items.get(id) {
            let scene = self
                .scenes
                .get(&item.scene_id)
                .ok_or_else(|| ReviewError::NotFound(format!("scene {}", item.scene_id)))?;
            let mut assets = Vec::new();
            for a in item.assets.iter().chain(&item.option_assets) {
                if !asset_root.join(&a.path).is_file() {
                    return Err(ReviewError::MissingAsset(a.path.clone()));
                }
                assets.push(json!({"path": a.path, "url": asset_url(&a.path)}));
            }
            let frames: Vec<Value> = item
                .frames
                .iter()
                .filter_map(|&t| scene.frames.get(t).map(|f| json!({"index": t, "frame": f})))
                .collect();
            let verdicts: Vec<&VerificationRecord> = self.item_verdicts(id).collect();
            return Ok(json!({
                "kind": "qa",
                "item": item,
                "status": self.status(id),
                "scene": {"scene_id": scene.scene_id, "metadata": scene.metadata, "frames": frames},
                "graph": self.graphs.get(&scene.scene_id).map(|g| graph_slice(g, &item.frames)),
                "assets": assets,
                "verdicts": verdicts,
            }));
        }
        if let Some(scene) = self.scenes.get(id) {
            let assets = metadata_assets(scene, asset_root)?;
            let fields: BTreeMap<&str, Value> = METADATA_FIELDS
                .iter()
                .map(|f| {
                    let v = metadata_value(scene, f);
                    (*f, json!({"value": v.as_ref().map(|x| x.0.clone()), "provenance": v.map(|x| x.1)}))
                })
                .collect();
            return Ok(json!({
                "kind": "metadata",
                "scene_id": scene.scene_id,
                "source": scene.metadata.source,
                "fields": fields,
                "frame": scene.frames.first(),
                "assets": assets,
            }));
        }
        Err(ReviewError::NotFound(id.to_string()))
    }
}

fn check_revision(original: &QAItem, revised: &QAItem) -> Result<(), ReviewError> {
    let invalid = |m: &str| Err(ReviewError::Invariant(format!("edited item: {m}")));
    if revised.item_id != original.item_id
        || revised.task_id != original.task_id
        || revised.scene_id != original.scene_id
    {
        return invalid("item_id, task_id and scene_id must not change");
    }
    match (&revised.options, revised.answer) {
        (Some(opts), Answer::Index(i)) if i < opts.len() => {
            let unique: BTreeSet<&String> = opts.iter().collect();
            if unique.len() != opts.len() {
                return invalid("options must be distinct");
            }
        }
        (None, Answer::Value(v)) if v.is_finite() => {}
        _ => return invalid("answer does not fit the options"),
    }
    Ok(())
}

fn metadata_value(scene: &Scene, field: &str) -> Option<(String, Provenance)> {
    let md = &scene.metadata;
    match field {
        "weather" => md
            .weather
            .map(|a| (a.value.as_str().to_string(), a.provenance)),
        "time_of_day" => md
            .time_of_day
            .map(|a| (a.value.as_str().to_string(), a.provenance)),
        "scene_type" => md
            .scene_type
            .map(|a| (a.value.as_str().to_string(), a.provenance)),
        _ => None,
    }
}

pub fn asset_url(path: &str) -> String {
    format!("/assets/{path}")
}

/// Renders the BEV map and front image for metadata review if they are not on disk yet.
fn metadata_assets(scene: &Scene, asset_root: &Path) -> Result<Vec<Value>, ReviewError> {
    let bev = format!("review/{}/bev.png", scene.scene_id);
    let front = format!("review/{}/front.png", scene.scene_id);
    let render_err = |e: sceneqa::render::RenderError| ReviewError::Render(e.to_string());
    let bev_path = asset_root.join(&bev);
    if !bev_path.is_file() {
        std::fs::create_dir_all(bev_path.parent().expect("has parent"))?;
        write_png(
            &render_bev(scene, 0, &BevStyle::default()).map_err(render_err)?,
            &bev_path,
        )?;
    }
    let mut out = vec![json!({"role": "bev", "path": bev, "url": asset_url(&bev)})];
    let camera = front_camera(scene.source());
    if scene
        .frames
        .first()
        .and_then(|f| f.camera(camera))
        .is_some()
    {
        let front_path = asset_root.join(&front);
        if !front_path.is_file() {
            let tile = camera_tile(scene, 0, camera, &[], &MultiviewStyle::default())
                .map_err(render_err)?;
            write_png(&tile, &front_path)?;
        }
        out.push(json!({"role": "front", "path": front, "url": asset_url(&front)}));
    }
    Ok(out)
}

fn graph_slice(g: &SceneGraph, frames: &[usize]) -> Value {
    let keep: BTreeSet<usize> = frames.iter().copied().collect();
    let nodes: Vec<Value> = g
        .nodes
        .iter()
        .filter(|n| keep.contains(&n.key.frame))
        .map(|n| serde_json::to_value(n).expect("nodes serialize"))
        .collect();
    let edges: Vec<Value> = [&g.relations, &g.actions, &g.interactions, &g.temporal]
        .into_iter()
        .flatten()
        .filter(|e| keep.contains(&e.src.frame))
        .map(|e| json!({"kind": e.label.kind(), "src": e.src, "dst": e.dst, "label": e.label.name()}))
        .collect();
    json!({"nodes": nodes, "edges": edges})
}
