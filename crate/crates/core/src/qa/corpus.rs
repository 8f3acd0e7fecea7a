//! Corpus-level generation, JSONL I/O and asset materialization.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{build_graph, SceneGraph};
use crate::render::{
    camera_tile, compose_camera_grid, multiview_tiles, render_bev, render_masked, render_multiview,
    write_png, BevStyle, MultiviewStyle, RenderError,
};
use crate::schema::Scene;

use super::{generate, Ability, AssetSpec, GenContext, GeneratorConfig, QAItem, TaskId};

/// Share of the corpus per ability used by [`Quotas::ability_mix`].
pub const ABILITY_MIX: [(Ability, f64); 3] = [
    (Ability::Const, 0.4744),
    (Ability::Unders, 0.3521),
    (Ability::Reas, 0.1735),
];

/// Consecutive failures on one scene after which it is treated as exhausted for a task.
const SCENE_PATIENCE: usize = 16;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown scene {0}")]
    UnknownScene(String),
    #[error("render error for {path}: {source}")]
    Render { path: String, source: RenderError },
}

/// Requested item count per task.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Quotas(pub BTreeMap<TaskId, usize>);

impl Quotas {
    pub fn uniform(n: usize) -> Self {
        Quotas(TaskId::ALL.iter().map(|t| (*t, n)).collect())
    }

    /// Splits `total` items across abilities by the reference mix, then evenly across each ability's tasks.
    pub fn ability_mix(total: usize) -> Self {
        let mut q = BTreeMap::new();
        for (ability, share) in ABILITY_MIX {
            let tasks: Vec<TaskId> = TaskId::ALL
                .into_iter()
                .filter(|t| t.ability() == ability)
                .collect();
            let budget = (total as f64 * share).round() as usize;
            for (i, t) in tasks.iter().enumerate() {
                let extra = usize::from(i < budget % tasks.len());
                q.insert(*t, budget / tasks.len() + extra);
            }
        }
        Quotas(q)
    }

    pub fn get(&self, task: TaskId) -> usize {
        self.0.get(&task).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.0.values().sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub quota: usize,
    pub attempts: usize,
    pub successes: usize,
    pub duplicates: usize,
    pub rejections: BTreeMap<String, usize>,
    pub shortfall: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub seed: u64,
    pub scenes: usize,
    pub graph_failures: BTreeMap<String, String>,
    pub tasks: BTreeMap<TaskId, TaskReport>,
    pub ability_mix: BTreeMap<Ability, f64>,
    pub total_items: usize,
}

impl GenerationReport {
    pub fn has_shortfall(&self) -> bool {
        self.tasks.values().any(|t| t.shortfall > 0)
    }
}

/// Builds a graph per scene; failures are reported by scene id.
pub fn build_graphs(
    scenes: &[Scene],
    cfg: &GeneratorConfig,
) -> (Vec<Option<SceneGraph>>, BTreeMap<String, String>) {
    let mut failures = BTreeMap::new();
    let graphs = scenes
        .iter()
        .map(|s| match build_graph(s, &cfg.thresholds) {
            Ok(g) => Some(g),
            Err(e) => {
                failures.insert(s.scene_id.clone(), e.to_string());
                None
            }
        })
        .collect();
    (graphs, failures)
}

fn dedupe_key(item: &QAItem) -> String {
    serde_json::to_string(&(
        &item.question,
        &item.assets,
        &item.option_assets,
        &item.options,
        &item.answer,
    ))
    .expect("serializable")
}

fn run_task(
    task: TaskId,
    quota: usize,
    ctxs: &[GenContext<'_>],
    cfg: &GeneratorConfig,
) -> (Vec<QAItem>, TaskReport) {
    let mut report = TaskReport {
        quota,
        ..TaskReport::default()
    };
    let mut items = Vec::new();
    let mut seen = BTreeSet::new();
    let mut misses = vec![0usize; ctxs.len()];
    let mut next_attempt = vec![0u64; ctxs.len()];
    'outer: while items.len() < quota {
        let mut progressed = false;
        for (i, ctx) in ctxs.iter().enumerate() {
            if items.len() >= quota {
                break 'outer;
            }
            if misses[i] >= SCENE_PATIENCE {
                continue;
            }
            progressed = true;
            let attempt = next_attempt[i];
            next_attempt[i] += 1;
            report.attempts += 1;
            match generate(task, ctx, cfg, attempt) {
                Ok(item) => {
                    if seen.insert(dedupe_key(&item)) {
                        misses[i] = 0;
                        items.push(item);
                    } else {
                        misses[i] += 1;
                        report.duplicates += 1;
                    }
                }
                Err(e) => {
                    misses[i] += 1;
                    *report
                        .rejections
                        .entry(e.constraint().to_string())
                        .or_insert(0) += 1;
                }
            }
        }
        if !progressed {
            break;
        }
    }
    report.successes = items.len();
    report.shortfall = quota - items.len();
    (items, report)
}

/// Generates every task up to its quota over the scene pool.
///
/// Output is ordered by task, then scene id, then attempt, and depends only on the pool and `cfg`.
pub fn generate_all(
    scenes: &[Scene],
    quotas: &Quotas,
    cfg: &GeneratorConfig,
) -> (Vec<QAItem>, GenerationReport) {
    let (graphs, graph_failures) = build_graphs(scenes, cfg);
    let ctxs: Vec<GenContext<'_>> = scenes
        .iter()
        .zip(&graphs)
        .filter_map(|(scene, g)| {
            g.as_ref().map(|graph| GenContext {
                scene,
                graph,
                pool: scenes,
            })
        })
        .collect();
    let results: Vec<(TaskId, Vec<QAItem>, TaskReport)> = std::thread::scope(|s| {
        let handles: Vec<_> = TaskId::ALL
            .into_iter()
            .map(|task| {
                let ctxs = &ctxs;
                s.spawn(move || {
                    let (items, report) = run_task(task, quotas.get(task), ctxs, cfg);
                    (task, items, report)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("generator thread panicked"))
            .collect()
    });

    let mut report = GenerationReport {
        seed: cfg.seed,
        scenes: scenes.len(),
        graph_failures,
        ..GenerationReport::default()
    };
    let mut items = Vec::new();
    for (task, mut task_items, task_report) in results {
        task_items.sort_by(|a, b| (&a.scene_id, &a.item_id).cmp(&(&b.scene_id, &b.item_id)));
        items.extend(task_items);
        report.tasks.insert(task, task_report);
    }
    report.total_items = items.len();
    report.ability_mix = ability_mix(&items);
    (items, report)
}

/// Fraction of items per ability.
pub fn ability_mix(items: &[QAItem]) -> BTreeMap<Ability, f64> {
    let n = items.len().max(1) as f64;
    Ability::ALL
        .into_iter()
        .map(|a| {
            (
                a,
                items.iter().filter(|i| i.ability == a).count() as f64 / n,
            )
        })
        .collect()
}

pub fn write_jsonl<W: Write>(items: &[QAItem], mut w: W) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn to_jsonl_string(items: &[QAItem]) -> String {
    let mut buf = Vec::new();
    write_jsonl(items, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<QAItem>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn render_asset(spec: &AssetSpec, scene: &Scene) -> Result<RgbImage, RenderError> {
    let style = MultiviewStyle::default();
    match spec {
        AssetSpec::Bev { frame, .. } => render_bev(scene, *frame, &BevStyle::default()),
        AssetSpec::Multiview {
            frame, highlights, ..
        } => render_multiview(scene, *frame, highlights, &style),
        AssetSpec::Camera { frame, camera, .. } => camera_tile(scene, *frame, camera, &[], &style),
        AssetSpec::CameraGrid { frame, order, .. } => {
            let views = multiview_tiles(scene, *frame, &[], &style)?;
            if order.iter().any(|&k| k >= views.len()) {
                return Err(RenderError::InvalidStyle("grid order out of range".into()));
            }
            Ok(compose_camera_grid(&views, order).0)
        }
        AssetSpec::Masked { frame, camera, .. } => render_masked(scene, *frame, camera, &style),
    }
}

/// Renders every distinct asset referenced by `items` under `dir`; returns the number of files written.
pub fn materialize_assets(
    items: &[QAItem],
    scenes: &[Scene],
    dir: &Path,
) -> Result<usize, CorpusError> {
    let by_id: BTreeMap<&str, &Scene> = scenes.iter().map(|s| (s.scene_id.as_str(), s)).collect();
    let mut done = BTreeSet::new();
    for asset in items
        .iter()
        .flat_map(|i| i.assets.iter().chain(&i.option_assets))
    {
        if !done.insert(asset.path.clone()) {
            continue;
        }
        let scene = by_id
            .get(asset.spec.scene_id())
            .ok_or_else(|| CorpusError::UnknownScene(asset.spec.scene_id().to_string()))?;
        let img = render_asset(&asset.spec, scene).map_err(|source| CorpusError::Render {
            path: asset.path.clone(),
            source,
        })?;
        let path = dir.join(&asset.path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        write_png(&img, &path)?;
    }
    Ok(done.len())
}
