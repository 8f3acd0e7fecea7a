//! Scoring of model or human predictions against a generated corpus.
//!
//! Predictions are parsed only from the `<answer>…</answer>` span. Option
//! items are scored by exact match (unparseable counts as wrong), numeric
//! items by RMSE (unparseable is excluded and counted).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qa::{Ability, Answer, QAItem, TaskId};
use crate::schema::Scene;

/// Tolerance used when plotting counting RMSE as a percentage.
pub const COUNTING_TOLERANCE: f64 = 10.0;
/// Tolerance used when plotting distance RMSE as a percentage.
pub const DISTANCE_TOLERANCE: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("prediction {index} is for {got}, expected {expected}")]
    Pairing {
        index: usize,
        expected: String,
        got: String,
    },
    #[error("{items} items but {predictions} predictions")]
    Length { items: usize, predictions: usize },
    #[error("no prediction for item {0}")]
    Missing(String),
    #[error("prediction for unknown item {0}")]
    UnknownItem(String),
    #[error("duplicate prediction for item {item} by {responder}")]
    Duplicate { item: String, responder: String },
    #[error("no scoreable items")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub item_id: String,
    pub responder_id: String,
    pub raw_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsed: Option<Answer>,
}

impl PredictionRecord {
    /// Builds a record and parses its answer against `item`.
    pub fn new(
        item: &QAItem,
        responder_id: impl Into<String>,
        raw_answer: impl Into<String>,
    ) -> Self {
        let raw_answer = raw_answer.into();
        PredictionRecord {
            item_id: item.item_id.clone(),
            responder_id: responder_id.into(),
            parsed: parse_answer(&raw_answer, item),
            raw_answer,
        }
    }

    /// Record whose raw text is the canonical rendering of `answer`.
    pub fn from_answer(item: &QAItem, responder_id: impl Into<String>, answer: Answer) -> Self {
        Self::new(item, responder_id, format_answer(answer))
    }
}

/// Canonical `<answer>` text: an option letter or a plain number.
pub fn format_answer(answer: Answer) -> String {
    match answer {
        Answer::Index(i) => format!("<answer>{}</answer>", option_letter(i)),
        Answer::Value(v) => format!("<answer>{v}</answer>"),
    }
}

pub fn option_letter(i: usize) -> char {
    char::from(b'A' + u8::try_from(i).expect("fewer than 26 options"))
}

/// Text inside the last `<answer>…</answer>` pair, trimmed.
pub fn answer_span(raw: &str) -> Option<&str> {
    let start = raw.rfind("<answer>")? + "<answer>".len();
    let len = raw[start..].find("</answer>")?;
    Some(raw[start..start + len].trim())
}

/// Parses the answer span for `item`: a letter or option text for option
/// items, a number (optionally followed by a unit word) for numeric items.
pub fn parse_answer(raw: &str, item: &QAItem) -> Option<Answer> {
    let span = answer_span(raw)?;
    match &item.options {
        Some(options) => {
            let letter = span.trim_end_matches(['.', ')']).trim_start_matches('(');
            let mut chars = letter.chars();
            if let (Some(c), None) = (chars.next(), chars.next()) {
                let c = c.to_ascii_uppercase();
                if c.is_ascii_uppercase() {
                    let i = usize::from(c as u8 - b'A');
                    return (i < options.len()).then_some(Answer::Index(i));
                }
            }
            options
                .iter()
                .position(|o| o.eq_ignore_ascii_case(span))
                .map(Answer::Index)
        }
        None => {
            let number = span.split_whitespace().next()?;
            number
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Answer::Value)
        }
    }
}

/// Pairs items with predictions position by position; ids must agree.
pub fn check_pairing(items: &[QAItem], preds: &[PredictionRecord]) -> Result<(), ScoringError> {
    if items.len() != preds.len() {
        return Err(ScoringError::Length {
            items: items.len(),
            predictions: preds.len(),
        });
    }
    for (index, (item, pred)) in items.iter().zip(preds).enumerate() {
        if item.item_id != pred.item_id {
            return Err(ScoringError::Pairing {
                index,
                expected: item.item_id.clone(),
                got: pred.item_id.clone(),
            });
        }
    }
    Ok(())
}

/// Reorders one responder's predictions to follow `items`.
pub fn align<'a>(
    items: &[QAItem],
    preds: &'a [PredictionRecord],
) -> Result<Vec<&'a PredictionRecord>, ScoringError> {
    let mut by_id: HashMap<&str, &PredictionRecord> = HashMap::new();
    for p in preds {
        if by_id.insert(p.item_id.as_str(), p).is_some() {
            return Err(ScoringError::Duplicate {
                item: p.item_id.clone(),
                responder: p.responder_id.clone(),
            });
        }
    }
    let out = items
        .iter()
        .map(|i| {
            by_id
                .remove(i.item_id.as_str())
                .ok_or_else(|| ScoringError::Missing(i.item_id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(extra) = by_id.keys().next() {
        return Err(ScoringError::UnknownItem(extra.to_string()));
    }
    Ok(out)
}

fn is_correct(item: &QAItem, pred: &PredictionRecord) -> bool {
    matches!((item.answer, pred.parsed), (Answer::Index(a), Some(Answer::Index(b))) if a == b)
}

/// Percentage of option items answered correctly.
pub fn exact_match_accuracy(
    items: &[QAItem],
    preds: &[PredictionRecord],
) -> Result<f64, ScoringError> {
    check_pairing(items, preds)?;
    let (mut correct, mut total) = (0usize, 0usize);
    for (item, pred) in items.iter().zip(preds) {
        if item.options.is_some() {
            total += 1;
            correct += usize::from(is_correct(item, pred));
        }
    }
    if total == 0 {
        return Err(ScoringError::Empty);
    }
    Ok(100.0 * correct as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub rmse: Option<f64>,
    pub scored: usize,
    pub unparseable: usize,
}

/// Root mean squared error over numeric items.
pub fn rmse(items: &[QAItem], preds: &[PredictionRecord]) -> Result<RmseReport, ScoringError> {
    check_pairing(items, preds)?;
    let mut sum = 0.0;
    let mut report = RmseReport {
        rmse: None,
        scored: 0,
        unparseable: 0,
    };
    for (item, pred) in items.iter().zip(preds) {
        let Answer::Value(y) = item.answer else {
            continue;
        };
        match pred.parsed {
            Some(Answer::Value(p)) => {
                sum += (p - y).powi(2);
                report.scored += 1;
            }
            _ => report.unparseable += 1,
        }
    }
    if report.scored == 0 && report.unparseable == 0 {
        return Err(ScoringError::Empty);
    }
    if report.scored > 0 {
        report.rmse = Some((sum / report.scored as f64).sqrt());
    }
    Ok(report)
}

/// Landis and Koch agreement bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaBand {
    Poor,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl KappaBand {
    pub fn of(kappa: f64) -> Self {
        match kappa {
            k if k < 0.0 => KappaBand::Poor,
            k if k <= 0.20 => KappaBand::Slight,
            k if k <= 0.40 => KappaBand::Fair,
            k if k <= 0.60 => KappaBand::Moderate,
            k if k <= 0.80 => KappaBand::Substantial,
            _ => KappaBand::AlmostPerfect,
        }
    }

    pub fn abbrev(self) -> &'static str {
        match self {
            KappaBand::Poor => "P.",
            KappaBand::Slight => "S.",
            KappaBand::Fair => "F.",
            KappaBand::Moderate => "M.",
            KappaBand::Substantial => "Sub.",
            KappaBand::AlmostPerfect => "A.P.",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub kappa: f64,
    pub band: KappaBand,
    pub shared: usize,
}

fn category(p: &PredictionRecord) -> String {
    match p.parsed {
        Some(Answer::Index(i)) => format!("option:{i}"),
        Some(Answer::Value(v)) => format!("value:{v}"),
        None => "unparsed".to_string(),
    }
}

/// Cohen's κ over the item ids both responders answered.
///
/// Unparseable answers form their own category. When chance agreement is
/// total the responders agree everywhere and κ is 1.
pub fn cohen_kappa(a: &[PredictionRecord], b: &[PredictionRecord]) -> Result<Kappa, ScoringError> {
    let index_b: HashMap<&str, &PredictionRecord> =
        b.iter().map(|p| (p.item_id.as_str(), p)).collect();
    let pairs: Vec<(String, String)> = a
        .iter()
        .filter_map(|p| {
            index_b
                .get(p.item_id.as_str())
                .map(|q| (category(p), category(q)))
        })
        .collect();
    kappa_from_pairs(&pairs)
}

/// κ from paired category labels.
pub fn kappa_from_pairs<T: Ord + Clone>(pairs: &[(T, T)]) -> Result<Kappa, ScoringError> {
    if pairs.is_empty() {
        return Err(ScoringError::Empty);
    }
    let n = pairs.len() as f64;
    let mut left: BTreeMap<T, f64> = BTreeMap::new();
    let mut right: BTreeMap<T, f64> = BTreeMap::new();
    let mut agree = 0.0;
    for (x, y) in pairs {
        *left.entry(x.clone()).or_default() += 1.0;
        *right.entry(y.clone()).or_default() += 1.0;
        if x == y {
            agree += 1.0;
        }
    }
    let p_o = agree / n;
    let p_e: f64 = left
        .iter()
        .map(|(k, c)| c / n * right.get(k).copied().unwrap_or(0.0) / n)
        .sum();
    let kappa = if (1.0 - p_e).abs() < 1e-15 {
        1.0
    } else {
        (p_o - p_e) / (1.0 - p_e)
    };
    Ok(Kappa {
        kappa,
        band: KappaBand::of(kappa),
        shared: pairs.len(),
    })
}

/// κ per ability over shared items.
pub fn kappa_by_ability(
    items: &[QAItem],
    a: &[PredictionRecord],
    b: &[PredictionRecord],
) -> BTreeMap<Ability, Kappa> {
    let ability: HashMap<&str, Ability> = items
        .iter()
        .map(|i| (i.item_id.as_str(), i.ability))
        .collect();
    Ability::ALL
        .into_iter()
        .filter_map(|ab| {
            let keep = |p: &&PredictionRecord| ability.get(p.item_id.as_str()) == Some(&ab);
            let sa: Vec<PredictionRecord> = a.iter().filter(keep).cloned().collect();
            let sb: Vec<PredictionRecord> = b.iter().filter(keep).cloned().collect();
            cohen_kappa(&sa, &sb).ok().map(|k| (ab, k))
        })
        .collect()
}

/// Headline average: option accuracy of the three abilities, with the
/// understanding RMSE subtracted. A missing RMSE counts as zero.
pub fn ability_average(
    const_acc: f64,
    unders_acc: f64,
    unders_rmse: Option<f64>,
    reas_acc: f64,
) -> f64 {
    (const_acc + unders_acc - unders_rmse.unwrap_or(0.0) + reas_acc) / 3.0
}

/// Maps an RMSE onto a 0..100 scale where 100 is exact and 0 is at or beyond `tolerance`.
pub fn rescale_rmse_for_plot(rmse: f64, tolerance: f64) -> f64 {
    ((tolerance - rmse) / tolerance * 100.0).clamp(0.0, 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub dimension: String,
    pub value: String,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    /// Fewer than the minimum count of items.
    pub low_count: bool,
}

pub const CONDITION_DIMENSIONS: [&str; 4] = ["weather", "time_of_day", "scene_type", "source"];

fn condition_value(scene: Option<&Scene>, dimension: &str) -> String {
    let md = scene.map(|s| &s.metadata);
    let v = match dimension {
        "weather" => md
            .and_then(|m| m.weather.as_ref())
            .map(|a| a.value.as_str()),
        "time_of_day" => md
            .and_then(|m| m.time_of_day.as_ref())
            .map(|a| a.value.as_str()),
        "scene_type" => md
            .and_then(|m| m.scene_type.as_ref())
            .map(|a| a.value.as_str()),
        "source" => md.map(|m| m.source.as_str()),
        _ => None,
    };
    v.unwrap_or("other").to_string()
}

/// Option-item accuracy grouped by each scene-level condition.
pub fn condition_breakdown(
    items: &[QAItem],
    preds: &[PredictionRecord],
    scenes: &[Scene],
    min_count: usize,
) -> Result<Vec<ConditionRow>, ScoringError> {
    check_pairing(items, preds)?;
    let by_id: HashMap<&str, &Scene> = scenes.iter().map(|s| (s.scene_id.as_str(), s)).collect();
    let mut rows = Vec::new();
    for dimension in CONDITION_DIMENSIONS {
        let mut groups: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for (item, pred) in items.iter().zip(preds) {
            if item.options.is_none() {
                continue;
            }
            let value = condition_value(by_id.get(item.scene_id.as_str()).copied(), dimension);
            let g = groups.entry(value).or_default();
            g.0 += usize::from(is_correct(item, pred));
            g.1 += 1;
        }
        rows.extend(
            groups
                .into_iter()
                .map(|(value, (correct, total))| ConditionRow {
                    dimension: dimension.to_string(),
                    value,
                    correct,
                    total,
                    accuracy: 100.0 * correct as f64 / total as f64,
                    low_count: total < min_count,
                }),
        );
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub responder_id: String,
    pub items: usize,
    pub task_accuracy: BTreeMap<TaskId, f64>,
    pub task_rmse: BTreeMap<TaskId, RmseReport>,
    pub ability_accuracy: BTreeMap<Ability, f64>,
    pub unders_rmse: Option<f64>,
    pub average: Option<f64>,
    pub unparseable: usize,
    pub conditions: Vec<ConditionRow>,
}

fn subset<'a>(
    items: &'a [QAItem],
    preds: &[&'a PredictionRecord],
    keep: impl Fn(&QAItem) -> bool,
) -> (Vec<QAItem>, Vec<PredictionRecord>) {
    items
        .iter()
        .zip(preds)
        .filter(|(i, _)| keep(i))
        .map(|(i, p)| (i.clone(), (*p).clone()))
        .unzip()
}

/// Full report for one responder; predictions may be in any order but must cover every item.
pub fn build_report(
    items: &[QAItem],
    preds: &[PredictionRecord],
    scenes: &[Scene],
    min_count: usize,
) -> Result<MetricsReport, ScoringError> {
    let aligned = align(items, preds)?;
    let mut report = MetricsReport {
        responder_id: preds
            .first()
            .map(|p| p.responder_id.clone())
            .unwrap_or_default(),
        items: items.len(),
        task_accuracy: BTreeMap::new(),
        task_rmse: BTreeMap::new(),
        ability_accuracy: BTreeMap::new(),
        unders_rmse: None,
        average: None,
        unparseable: aligned.iter().filter(|p| p.parsed.is_none()).count(),
        conditions: Vec::new(),
    };
    for task in TaskId::ALL {
        let (ti, tp) = subset(items, &aligned, |i| i.task_id == task);
        if ti.is_empty() {
            continue;
        }
        if task.is_numeric() {
            report.task_rmse.insert(task, rmse(&ti, &tp)?);
        } else {
            report
                .task_accuracy
                .insert(task, exact_match_accuracy(&ti, &tp)?);
        }
    }
    for ability in Ability::ALL {
        let (ai, ap) = subset(items, &aligned, |i| i.ability == ability);
        if let Ok(acc) = exact_match_accuracy(&ai, &ap) {
            report.ability_accuracy.insert(ability, acc);
        }
        if ability == Ability::Unders {
            report.unders_rmse = rmse(&ai, &ap).ok().and_then(|r| r.rmse);
        }
    }
    let acc = |a| report.ability_accuracy.get(&a).copied();
    if let (Some(c), Some(u), Some(r)) = (
        acc(Ability::Const),
        acc(Ability::Unders),
        acc(Ability::Reas),
    ) {
        report.average = Some(ability_average(c, u, report.unders_rmse, r));
    }
    let (oi, op): (Vec<QAItem>, Vec<PredictionRecord>) = subset(items, &aligned, |_| true);
    report.conditions = condition_breakdown(&oi, &op, scenes, min_count)?;
    Ok(report)
}

impl MetricsReport {
    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "responder {}  items {}  unparseable {}",
            self.responder_id, self.items, self.unparseable
        );
        for (task, acc) in &self.task_accuracy {
            let _ = writeln!(s, "  {:<30} acc  {:>7.2}", task.as_str(), acc);
        }
        for (task, r) in &self.task_rmse {
            let v = r.rmse.map_or("-".to_string(), |v| format!("{v:.2}"));
            let _ = writeln!(
                s,
                "  {:<30} rmse {:>7}  (excluded {})",
                task.as_str(),
                v,
                r.unparseable
            );
        }
        for (ability, acc) in &self.ability_accuracy {
            let _ = writeln!(s, "  {:<30} acc  {:>7.2}", ability.as_str(), acc);
        }
        if let Some(r) = self.unders_rmse {
            let _ = writeln!(s, "  {:<30} rmse {:>7.2}", "unders", r);
        }
        if let Some(avg) = self.average {
            let _ = writeln!(s, "  {:<30}      {:>7.2}", "avg", avg);
        }
        for row in &self.conditions {
            let flag = if row.low_count { " *" } else { "" };
            let _ = writeln!(
                s,
                "  {:<12} {:<24} {:>7.2}  ({}/{}){flag}",
                row.dimension, row.value, row.accuracy, row.correct, row.total
            );
        }
        s
    }
}

/// Reads prediction records, re-parsing each raw answer against its item.
pub fn read_predictions<R: BufRead>(
    r: R,
    items: &[QAItem],
) -> Result<Vec<PredictionRecord>, ScoringError> {
    let by_id: HashMap<&str, &QAItem> = items.iter().map(|i| (i.item_id.as_str(), i)).collect();
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| ScoringError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut rec: PredictionRecord =
            serde_json::from_str(&line).map_err(|e| ScoringError::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
        let item = by_id
            .get(rec.item_id.as_str())
            .ok_or_else(|| ScoringError::UnknownItem(rec.item_id.clone()))?;
        rec.parsed = parse_answer(&rec.raw_answer, item);
        out.push(rec);
    }
    Ok(out)
}

pub fn write_predictions<W: Write>(preds: &[PredictionRecord], mut w: W) -> std::io::Result<()> {
    for p in preds {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}
