//! Run evaluation: fixed evaluation subsets, per-checkpoint metrics,
//! checkpoint series, collapse detection, and CSV/JSON reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::answer::{score_response, ScoreError};
use crate::metrics::{EvalConfig, EvalResult, EvalTally, Metric, MetricsDoc, MetricsDocError, MetricsError};
use crate::parse::parse_response;
use crate::profile::FormatProfile;

pub const DEFAULT_SUBSET_SIZE: usize = 256;
pub const DEFAULT_VR_DROP: f64 = 0.15;
pub const DEFAULT_RPASS1_TOLERANCE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("subset of {requested} requested from {available} ids")]
    SubsetTooLarge { requested: usize, available: usize },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("records mix steps {first} and {other}")]
    MixedSteps { first: u64, other: u64 },
    #[error("record `{id}`: {source}")]
    Record { id: String, source: ScoreError },
    #[error("duplicate step {0} in series")]
    DuplicateStep(u64),
    #[error("series needs at least {needed} points, has {len}")]
    SeriesTooShort { needed: usize, len: usize },
    #[error("malformed report document: {0}")]
    MalformedDocument(String),
    #[error(transparent)]
    Doc(#[from] MetricsDocError),
}

fn id_string<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    match serde_json::Value::deserialize(d)? {
        serde_json::Value::String(s) => Ok(s),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        other => Err(serde::de::Error::custom(format!(
            "id must be a string or number, got {other}"
        ))),
    }
}

/// One evaluated generation at one training step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(deserialize_with = "id_string")]
    pub id: String,
    #[serde(default)]
    pub task: String,
    #[serde(default)]
    pub prompt: String,
    pub generation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_result: Option<bool>,
    #[serde(default)]
    pub step: u64,
}

/// Deterministic uniform sample of `n` items without replacement, kept in
/// input order.
pub fn sample_subset<T: Clone>(ids: &[T], n: usize, seed: u64) -> Result<Vec<T>, ReportError> {
    if n > ids.len() {
        return Err(ReportError::SubsetTooLarge {
            requested: n,
            available: ids.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, ids.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| ids[i].clone()).collect())
}

/// Parses, scores and tallies one record.
pub fn tally_record(
    tally: &mut EvalTally,
    record: &RunRecord,
    profile: &FormatProfile,
) -> Result<(), ReportError> {
    let parsed = parse_response(&record.generation, profile);
    let score = score_response(&parsed, record.gold.as_deref(), record.external_result).map_err(
        |source| ReportError::Record {
            id: record.id.clone(),
            source,
        },
    )?;
    tally.observe(&score);
    Ok(())
}

/// Metrics for the records of a single checkpoint.
pub fn evaluate_checkpoint<'a, I>(
    records: I,
    profile: &FormatProfile,
    config: &EvalConfig,
) -> Result<EvalResult, ReportError>
where
    I: IntoIterator<Item = &'a RunRecord>,
{
    let mut tally = EvalTally::default();
    let mut step = None;
    for record in records {
        match step {
            None => step = Some(record.step),
            Some(first) if first != record.step => {
                return Err(ReportError::MixedSteps {
                    first,
                    other: record.step,
                })
            }
            Some(_) => {}
        }
        tally_record(&mut tally, record, profile)?;
    }
    Ok(tally.finish(config)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub step: u64,
    pub result: EvalResult,
}

/// Per-step results for one task, steps strictly ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointSeries {
    pub task: String,
    pub points: Vec<SeriesPoint>,
}

impl CheckpointSeries {
    pub fn single(task: impl Into<String>, step: u64, result: EvalResult) -> Self {
        Self {
            task: task.into(),
            points: vec![SeriesPoint { step, result }],
        }
    }
}

pub fn build_series(
    results: Vec<(u64, EvalResult)>,
    task: impl Into<String>,
) -> Result<CheckpointSeries, ReportError> {
    if results.is_empty() {
        return Err(ReportError::SeriesTooShort { needed: 1, len: 0 });
    }
    let mut points: Vec<SeriesPoint> = results
        .into_iter()
        .map(|(step, result)| SeriesPoint { step, result })
        .collect();
    points.sort_by_key(|p| p.step);
    if let Some(w) = points.windows(2).find(|w| w[0].step == w[1].step) {
        return Err(ReportError::DuplicateStep(w[0].step));
    }
    Ok(CheckpointSeries {
        task: task.into(),
        points,
    })
}

/// Streams records of a whole run into one series per task.
pub fn evaluate_run<I>(
    records: I,
    profile: &FormatProfile,
    config: &EvalConfig,
) -> Result<Vec<CheckpointSeries>, ReportError>
where
    I: IntoIterator<Item = RunRecord>,
{
    let mut tallies: BTreeMap<(String, u64), EvalTally> = BTreeMap::new();
    for record in records {
        let tally = tallies
            .entry((record.task.clone(), record.step))
            .or_default();
        tally_record(tally, &record, profile)?;
    }
    let mut by_task: BTreeMap<String, Vec<(u64, EvalResult)>> = BTreeMap::new();
    for ((task, step), tally) in tallies {
        by_task
            .entry(task)
            .or_default()
            .push((step, tally.finish(config)?));
    }
    by_task
        .into_iter()
        .map(|(task, results)| build_series(results, task))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    /// VR fell while Rpass@1 held or improved.
    CollapseSignature,
    /// VR and Rpass@1 both fell.
    JointDegradation,
    Stable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseThresholds {
    /// Minimum absolute VR drop that counts as a fall.
    pub vr_drop: f64,
    /// Largest absolute Rpass@1 decline still considered stable.
    pub rpass1_tolerance: f64,
}

impl Default for CollapseThresholds {
    fn default() -> Self {
        Self {
            vr_drop: DEFAULT_VR_DROP,
            rpass1_tolerance: DEFAULT_RPASS1_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseFinding {
    pub task: String,
    pub window: (u64, u64),
    pub vr_drop: f64,
    pub rpass1_drift: f64,
    pub kind: FindingKind,
}

/// Classifies the whole-series trajectory of VR and Rpass@1.
///
/// Rpass@1 endpoints fall back to the nearest step where it is reported; a
/// series with no reportable Rpass@1 has zero drift.
pub fn detect_collapse(
    series: &CheckpointSeries,
    thresholds: &CollapseThresholds,
) -> Result<Vec<CollapseFinding>, ReportError> {
    let len = series.points.len();
    if len < 2 {
        return Err(ReportError::SeriesTooShort { needed: 2, len });
    }
    let first = &series.points[0];
    let last = &series.points[len - 1];
    let vr = |p: &SeriesPoint| p.result.stats.valid_reasoning_rate();
    let vr_drop = (vr(first) - vr(last)).max(0.0);

    let reportable = || series.points.iter().filter_map(|p| p.result.rpass1);
    let rpass1_drift = match (reportable().next(), reportable().next_back()) {
        (Some(start), Some(end)) => end - start,
        _ => 0.0,
    };

    let kind = if vr_drop < thresholds.vr_drop {
        FindingKind::Stable
    } else if rpass1_drift >= -thresholds.rpass1_tolerance {
        FindingKind::CollapseSignature
    } else {
        FindingKind::JointDegradation
    };
    Ok(vec![CollapseFinding {
        task: series.task.clone(),
        window: (first.step, last.step),
        vr_drop,
        rpass1_drift,
        kind,
    }])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

const CI_METRICS: [Metric; 6] = Metric::ALL;

fn csv_header() -> String {
    let mut cols = vec![
        "task".to_owned(),
        "step".to_owned(),
        "pass1".to_owned(),
        "rpass1".to_owned(),
        "vr".to_owned(),
        "er".to_owned(),
        "mr".to_owned(),
        "tr".to_owned(),
    ];
    for m in CI_METRICS {
        cols.push(format!("{m}_ci_low"));
        cols.push(format!("{m}_ci_high"));
    }
    cols.join(",")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn series_to_csv(series: &[CheckpointSeries]) -> String {
    let mut out = csv_header();
    out.push('\n');
    for s in series {
        for p in &s.points {
            let r = &p.result;
            let mut row = vec![csv_field(&s.task), p.step.to_string()];
            for m in [Metric::Pass1, Metric::Rpass1, Metric::Vr, Metric::Er, Metric::Mr, Metric::Tr] {
                row.push(opt_num(r.value(m)));
            }
            for m in CI_METRICS {
                let ci = r.ci.get(&m);
                row.push(opt_num(ci.map(|i| i.low)));
                row.push(opt_num(ci.map(|i| i.high)));
            }
            let _ = writeln!(out, "{}", row.join(","));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointDoc {
    pub step: u64,
    pub metrics: MetricsDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesDoc {
    pub task: String,
    pub points: Vec<PointDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDoc {
    pub series: Vec<SeriesDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub findings: Vec<CollapseFinding>,
}

impl ReportDoc {
    pub fn new(series: &[CheckpointSeries], findings: Vec<CollapseFinding>) -> Self {
        ReportDoc {
            series: series
                .iter()
                .map(|s| SeriesDoc {
                    task: s.task.clone(),
                    points: s
                        .points
                        .iter()
                        .map(|p| PointDoc {
                            step: p.step,
                            metrics: MetricsDoc::from(&p.result),
                        })
                        .collect(),
                })
                .collect(),
            findings,
        }
    }

    pub fn to_series(&self) -> Result<Vec<CheckpointSeries>, ReportError> {
        self.series
            .iter()
            .map(|s| {
                let results = s
                    .points
                    .iter()
                    .map(|p| Ok((p.step, p.metrics.eval_result()?)))
                    .collect::<Result<Vec<_>, ReportError>>()?;
                build_series(results, s.task.clone())
            })
            .collect()
    }
}

pub fn series_to_json(series: &[CheckpointSeries], findings: Vec<CollapseFinding>) -> String {
    let mut out = serde_json::to_string_pretty(&ReportDoc::new(series, findings))
        .expect("report serialization is infallible");
    out.push('\n');
    out
}

pub fn series_from_json(doc: &str) -> Result<Vec<CheckpointSeries>, ReportError> {
    let doc: ReportDoc =
        serde_json::from_str(doc).map_err(|e| ReportError::MalformedDocument(e.to_string()))?;
    doc.to_series()
}

pub fn emit_report(series: &[CheckpointSeries], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => series_to_json(series, Vec::new()),
        ReportFormat::Csv => series_to_csv(series),
    }
}
