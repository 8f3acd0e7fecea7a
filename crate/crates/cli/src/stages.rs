use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use sceneqa::calibration::{calibrate_auto, calibrate_scene};
use sceneqa::graph::{build_graph, ThresholdSet};
use sceneqa::metadata::{
    complete_metadata, MapLabelClient, MetadataClients, RemoteConfig, RemoteMapLabelClient,
    RemoteSimilarityClient, SimilarityClient, TableMapLabelClient, TableSimilarityClient,
};
use sceneqa::qa::corpus::{generate_all, materialize_assets, read_jsonl, write_jsonl, Quotas};
use sceneqa::qa::{GeneratorConfig, QAItem, TaskId};
use sceneqa::render::{render_bev, write_png, BevStyle};
use sceneqa::schema::{parse_canonical, parse_canonical_lines, to_canonical_string, Scene};
use sceneqa::scoring::{
    build_report, cohen_kappa, kappa_by_ability, read_predictions, PredictionRecord,
};
use sceneqa::synthetic::{bev_ref, fixture_pool, truth_clients};
use sceneqa_review::{open_store, ServiceConfig};

use crate::*;

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Validation(e.into())
}

/// Stub classifier tables keyed by image and BEV reference.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubTables {
    pub similarity: TableSimilarityClient,
    pub map_label: TableMapLabelClient,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Other(e.into()))
}

fn create_parent(path: &Path) -> std::io::Result<()> {
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(dir) => fs::create_dir_all(dir),
        None => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    create_parent(path)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_scenes(path: &Path) -> Result<Vec<Scene>, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_canonical_lines(&text).map_err(|e| invalid(anyhow!("{}: {e}", path.display())))
}

pub fn write_scenes(path: &Path, scenes: &[Scene]) -> Result<(), Failure> {
    write_text(
        path,
        &scenes.iter().map(to_canonical_string).collect::<String>(),
    )
}

pub fn read_corpus(path: &Path) -> Result<Vec<QAItem>, Failure> {
    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    read_jsonl(BufReader::new(file)).map_err(|e| invalid(anyhow!("{}: {e}", path.display())))
}

/// Reads a settings file as TOML when it has a `.toml` extension, JSON otherwise.
pub fn read_settings<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
    } else {
        serde_json::from_str(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
    };
    parsed.map_err(invalid)
}

pub fn thresholds(path: Option<&Path>, base: ThresholdSet) -> Result<ThresholdSet, Failure> {
    let th = match path {
        Some(p) => read_settings(p)?,
        None => base,
    };
    th.validate().map_err(|m| invalid(anyhow!(m)))?;
    Ok(th)
}

pub fn parse_quotas(spec: &str) -> Result<Quotas, Failure> {
    let number = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| invalid(anyhow!("bad quota count {s:?}")))
    };
    if let Some(n) = spec.strip_prefix("uniform:") {
        return Ok(Quotas::uniform(number(n)?));
    }
    if let Some(n) = spec.strip_prefix("mix:") {
        return Ok(Quotas::ability_mix(number(n)?));
    }
    if let Ok(n) = spec.parse::<usize>() {
        return Ok(Quotas::uniform(n));
    }
    read_settings(Path::new(spec))
}

pub fn parse_alpha(spec: &str) -> Result<Option<f64>, Failure> {
    if spec == "auto" {
        return Ok(None);
    }
    match spec.parse::<f64>() {
        Ok(a) if a.is_finite() => Ok(Some(a)),
        _ => Err(invalid(anyhow!(
            "--alpha takes radians or `auto`, got {spec:?}"
        ))),
    }
}

pub fn synth(a: &SynthArgs) -> Result<(), Failure> {
    let pool = fixture_pool(a.seed);
    let raw = a.out.join("raw");
    fs::create_dir_all(&raw)?;
    for (scene, _) in &pool {
        write_text(
            &raw.join(format!("{}.json", scene.scene_id)),
            &to_canonical_string(scene),
        )?;
    }
    let (similarity, map_label) = truth_clients(&pool);
    let tables = StubTables {
        similarity,
        map_label,
    };
    write_text(
        &a.out.join("stub_tables.json"),
        &serde_json::to_string_pretty(&tables).map_err(anyhow::Error::from)?,
    )?;
    eprintln!("wrote {} scenes to {}", pool.len(), raw.display());
    Ok(())
}

fn scene_files(input: &Path) -> Result<Vec<PathBuf>, Failure> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(input)
        .with_context(|| format!("reading {}", input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "json" || e == "jsonl"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(invalid(anyhow!(
            "no .json or .jsonl scene documents in {}",
            input.display()
        )));
    }
    Ok(files)
}

pub fn ingest(a: &IngestArgs) -> Result<(), Failure> {
    let mut scenes = Vec::new();
    for path in scene_files(&a.input)? {
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "jsonl") {
            let text = String::from_utf8(bytes)
                .map_err(|e| invalid(anyhow!("{}: {e}", path.display())))?;
            scenes.extend(
                parse_canonical_lines(&text)
                    .map_err(|e| invalid(anyhow!("{}: {e}", path.display())))?,
            );
        } else {
            scenes.push(
                parse_canonical(&bytes).map_err(|e| invalid(anyhow!("{}: {e}", path.display())))?,
            );
        }
    }
    scenes.sort_by(|x, y| x.scene_id.cmp(&y.scene_id));
    if let Some(w) = scenes.windows(2).find(|w| w[0].scene_id == w[1].scene_id) {
        return Err(invalid(anyhow!("duplicate scene_id {}", w[0].scene_id)));
    }
    write_scenes(&a.out, &scenes)?;
    eprintln!("ingested {} scenes", scenes.len());
    Ok(())
}

pub fn calibrate(a: &CalibrateArgs) -> Result<(), Failure> {
    let alpha = parse_alpha(&a.alpha)?;
    let scenes = read_scenes(&a.input)?;
    let out: Vec<Scene> = pool(a.common.jobs)?.install(|| {
        scenes
            .par_iter()
            .map(|s| match alpha {
                Some(alpha) => calibrate_scene(s, alpha),
                None => calibrate_auto(s),
            })
            .collect::<Result<_, _>>()
            .map_err(invalid)
    })?;
    write_scenes(&a.out, &out)?;
    eprintln!("calibrated {} scenes", out.len());
    Ok(())
}

pub fn complete(a: &CompleteArgs) -> Result<(), Failure> {
    let scenes = read_scenes(&a.input)?;
    let (sim, map): (Box<dyn SimilarityClient>, Box<dyn MapLabelClient>);
    let stub = a.stub_tables.is_some();
    if let Some(path) = &a.stub_tables {
        let t: StubTables = read_settings(path)?;
        sim = Box::new(t.similarity);
        map = Box::new(t.map_label);
    } else if let (Some(s), Some(m)) = (&a.similarity_endpoint, &a.map_endpoint) {
        sim = Box::new(RemoteSimilarityClient(RemoteConfig::new(s.clone())));
        map = Box::new(RemoteMapLabelClient(RemoteConfig::new(m.clone())));
    } else {
        return Err(invalid(anyhow!(
            "pass --stub-tables or both --similarity-endpoint and --map-endpoint"
        )));
    }
    let clients = MetadataClients {
        similarity: sim.as_ref(),
        map_label: map.as_ref(),
    };
    let results: Vec<(Scene, Vec<String>)> = pool(a.common.jobs)?.install(|| {
        scenes
            .par_iter()
            .map(|s| -> Result<(Scene, Vec<String>), Failure> {
                let reference = if stub {
                    bev_ref(&s.scene_id)
                } else {
                    let path = a.bev_dir.join(format!("{}.png", s.scene_id));
                    let img = render_bev(s, 0, &BevStyle::default())
                        .map_err(|e| Failure::Other(e.into()))?;
                    create_parent(&path)?;
                    write_png(&img, &path)?;
                    path.display().to_string()
                };
                let c = complete_metadata(s, &clients, Some(&reference));
                Ok((c.scene, c.errors.iter().map(|e| e.to_string()).collect()))
            })
            .collect::<Result<_, _>>()
    })?;
    let mut unresolved = 0;
    for (scene, errors) in &results {
        for e in errors {
            eprintln!("{}: {e}", scene.scene_id);
            unresolved += 1;
        }
    }
    let out: Vec<Scene> = results.into_iter().map(|(s, _)| s).collect();
    write_scenes(&a.out, &out)?;
    eprintln!(
        "completed {} scenes, {unresolved} fields left empty",
        out.len()
    );
    Ok(())
}

pub fn build_graphs(a: &GraphArgs) -> Result<(), Failure> {
    let th = thresholds(a.thresholds.as_deref(), ThresholdSet::default())?;
    let scenes = read_scenes(&a.input)?;
    let exports: Vec<(String, String, bool)> = pool(a.common.jobs)?.install(|| {
        scenes
            .par_iter()
            .map(|s| {
                build_graph(s, &th)
                    .map(|g| {
                        (
                            s.scene_id.clone(),
                            g.to_export_string(),
                            g.temporal_disabled,
                        )
                    })
                    .map_err(|e| invalid(anyhow!("{}: {e}", s.scene_id)))
            })
            .collect::<Result<_, _>>()
    })?;
    fs::create_dir_all(&a.out)?;
    for (id, text, untracked) in &exports {
        if *untracked {
            eprintln!("{id}: no track ids, temporal edges skipped");
        }
        write_text(&a.out.join(format!("{id}.json")), text)?;
    }
    eprintln!("built {} graphs", exports.len());
    Ok(())
}

pub fn render(a: &RenderArgs) -> Result<(), Failure> {
    let scenes = read_scenes(&a.scenes)?;
    let workers = pool(a.common.jobs)?;
    let written: usize = match &a.corpus {
        Some(corpus) => {
            let items = read_corpus(corpus)?;
            let mut by_scene: BTreeMap<&str, Vec<QAItem>> = BTreeMap::new();
            for item in &items {
                by_scene
                    .entry(item.scene_id.as_str())
                    .or_default()
                    .push(item.clone());
            }
            workers.install(|| {
                by_scene
                    .par_iter()
                    .map(|(_, group)| {
                        materialize_assets(group, &scenes, &a.out).map_err(|e| invalid(anyhow!(e)))
                    })
                    .sum::<Result<usize, Failure>>()
            })?
        }
        None => workers.install(|| {
            scenes
                .par_iter()
                .map(|s| -> Result<usize, Failure> {
                    let img = render_bev(s, a.frame, &BevStyle::default())
                        .map_err(|e| invalid(anyhow!("{}: {e}", s.scene_id)))?;
                    let path = a.out.join(format!("bev/{}_{:03}.png", s.scene_id, a.frame));
                    create_parent(&path)?;
                    write_png(&img, &path)?;
                    Ok(1)
                })
                .sum::<Result<usize, Failure>>()
        })?,
    };
    eprintln!("rendered {written} images into {}", a.out.display());
    Ok(())
}

pub fn generate(a: &GenerateArgs) -> Result<(), Failure> {
    let mut cfg: GeneratorConfig = match &a.config {
        Some(p) => read_settings(p)?,
        None => GeneratorConfig::default(),
    };
    cfg.seed = a.seed;
    cfg.thresholds = thresholds(a.thresholds.as_deref(), cfg.thresholds)?;
    let quotas = parse_quotas(&a.quotas)?;
    let scenes = read_scenes(&a.input)?;
    let (items, report) = generate_all(&scenes, &quotas, &cfg);

    create_parent(&a.out)?;
    let file = fs::File::create(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let mut w = BufWriter::new(file);
    write_jsonl(&items, &mut w)?;
    w.flush()?;
    let report_path = a.report.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".report.json");
        p.into()
    });
    write_text(
        &report_path,
        &serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?,
    )?;

    for (id, reason) in &report.graph_failures {
        eprintln!("{id}: graph failed: {reason}");
    }
    let mut short = Vec::new();
    for (task, r) in &report.tasks {
        eprintln!(
            "{:<28} {:>5}/{:<5} attempts {:>6}",
            task.as_str(),
            r.successes,
            r.quota,
            r.attempts
        );
        if r.shortfall > 0 {
            short.push(format!("{} ({} missing)", task.as_str(), r.shortfall));
        }
    }
    eprintln!("wrote {} items to {}", items.len(), a.out.display());
    if short.is_empty() {
        Ok(())
    } else {
        Err(Failure::Shortfall(short.join(", ")))
    }
}

fn predictions(path: &Path, items: &[QAItem]) -> Result<Vec<PredictionRecord>, Failure> {
    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    read_predictions(BufReader::new(file), items)
        .map_err(|e| invalid(anyhow!("{}: {e}", path.display())))
}

pub fn score(a: &ScoreArgs) -> Result<(), Failure> {
    let items = read_corpus(&a.corpus)?;
    let scenes = match &a.scenes {
        Some(p) => read_scenes(p)?,
        None => Vec::new(),
    };
    let mut json = String::new();
    for path in &a.predictions {
        let preds = predictions(path, &items)?;
        let report = build_report(&items, &preds, &scenes, a.min_count)
            .map_err(|e| invalid(anyhow!("{}: {e}", path.display())))?;
        print!("{}", report.to_text());
        json.push_str(&serde_json::to_string(&report).map_err(anyhow::Error::from)?);
        json.push('\n');
    }
    if let Some(out) = &a.json {
        write_text(out, &json)?;
    }
    Ok(())
}

pub fn kappa(a: &KappaArgs) -> Result<(), Failure> {
    let items = read_corpus(&a.corpus)?;
    let pa = predictions(&a.a, &items)?;
    let pb = predictions(&a.b, &items)?;
    let overall = cohen_kappa(&pa, &pb).map_err(invalid)?;
    println!(
        "{:<8} {:>8.4} {:<4} shared {}",
        "all",
        overall.kappa,
        overall.band.abbrev(),
        overall.shared
    );
    for (ability, k) in kappa_by_ability(&items, &pa, &pb) {
        println!(
            "{:<8} {:>8.4} {:<4} shared {}",
            ability.as_str(),
            k.kappa,
            k.band.abbrev(),
            k.shared
        );
    }
    Ok(())
}

fn service_config(path: Option<&Path>) -> Result<ServiceConfig, Failure> {
    ServiceConfig::from_env(path).map_err(invalid)
}

pub fn serve(a: &ServeArgs) -> Result<(), Failure> {
    let mut config = service_config(a.config.as_deref())?;
    if let Some(port) = a.port {
        config.port = port;
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime
        .block_on(sceneqa_review::serve(config))
        .map_err(|e| match e {
            sceneqa_review::ServeError::Input { .. } | sceneqa_review::ServeError::Review(_) => {
                invalid(e)
            }
            other => Failure::Other(other.into()),
        })
}

pub fn export(a: &ExportArgs) -> Result<(), Failure> {
    let config = service_config(a.config.as_deref())?;
    let store = open_store(&config).map_err(invalid)?;
    let items = store
        .export(
            a.task.as_deref(),
            a.ability.as_deref(),
            a.scene_id.as_deref(),
        )
        .map_err(invalid)?;
    create_parent(&a.out)?;
    let mut w = BufWriter::new(fs::File::create(&a.out)?);
    write_jsonl(&items, &mut w)?;
    w.flush()?;
    let stats = store.stats();
    if let Some(path) = &a.stats {
        write_text(
            path,
            &serde_json::to_string_pretty(&stats).map_err(anyhow::Error::from)?,
        )?;
    }
    let rate = |r: Option<f64>| r.map_or("undefined".to_string(), |v| format!("{v:.2}%"));
    eprintln!(
        "exported {} of {} items; pass rate {} counting edits, {} without",
        items.len(),
        stats.items,
        rate(stats.pass_rate_edit_as_pass),
        rate(stats.pass_rate_edit_as_fail)
    );
    Ok(())
}

/// Task ids present in a corpus file.
pub fn corpus_tasks(items: &[QAItem]) -> BTreeSet<TaskId> {
    items.iter().map(|i| i.task_id).collect()
}
