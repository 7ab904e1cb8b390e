//! Versioned experiment reports and their JSON/CSV emission.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Mean and sample standard deviation.
    MeanStd,
    /// Median and median absolute deviation.
    MedianMad,
}

/// One estimator's result within one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub group: String,
    pub trial: usize,
    pub estimator: String,
    /// `None` marks a metric that is not available for this trial.
    pub metrics: BTreeMap<String, Option<f64>>,
    /// Wall-clock quantities; excluded from the determinism hash.
    pub timings: BTreeMap<String, f64>,
    pub failure: Option<String>,
}

impl TrialRecord {
    pub fn new(group: impl Into<String>, trial: usize, estimator: impl Into<String>) -> Self {
        Self {
            group: group.into(),
            trial,
            estimator: estimator.into(),
            metrics: BTreeMap::new(),
            timings: BTreeMap::new(),
            failure: None,
        }
    }

    pub fn metric(mut self, name: &str, value: f64) -> Self {
        self.metrics.insert(name.to_owned(), value.is_finite().then_some(value));
        self
    }

    pub fn optional(mut self, name: &str, value: Option<f64>) -> Self {
        self.metrics.insert(name.to_owned(), value.filter(|v| v.is_finite()));
        self
    }

    pub fn timing(mut self, name: &str, seconds: f64) -> Self {
        self.timings.insert(name.to_owned(), seconds);
        self
    }

    pub fn failed(group: impl Into<String>, trial: usize, estimator: impl Into<String>, why: String) -> Self {
        Self { failure: Some(why), ..Self::new(group, trial, estimator) }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied().flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub group: String,
    pub estimator: String,
    pub metric: String,
    pub statistic: Statistic,
    pub center: f64,
    pub spread: f64,
    /// Trials contributing a value.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub protocol: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub trials: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
    /// Protocol-level scalars such as P_SIG.
    pub summary: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub determinism_hash: String,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    (pim::stats::mean(v), pim::stats::sample_std(v))
}

fn median_mad(v: &[f64]) -> (f64, f64) {
    (pim::stats::median(v), pim::stats::mad(v))
}

/// Aggregates every numeric metric per (group, estimator) over successful trials.
pub fn aggregate(trials: &[TrialRecord], statistic: Statistic) -> Vec<Aggregate> {
    let mut pooled: BTreeMap<(&str, &str, &str), Vec<f64>> = BTreeMap::new();
    // Keep first-seen order of groups and estimators for readable output.
    let mut order: Vec<(&str, &str)> = Vec::new();
    for t in trials.iter().filter(|t| t.failure.is_none()) {
        if !order.contains(&(t.group.as_str(), t.estimator.as_str())) {
            order.push((&t.group, &t.estimator));
        }
        for (name, value) in &t.metrics {
            let slot = pooled.entry((&t.group, &t.estimator, name)).or_default();
            if let Some(v) = value {
                slot.push(*v);
            }
        }
    }
    let mut out = Vec::new();
    for (g, e) in order {
        for ((_, _, metric), values) in pooled.range((g, e, "")..).take_while(|((pg, pe, _), _)| *pg == g && *pe == e) {
            let (center, spread) = if values.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                match statistic {
                    Statistic::MeanStd => mean_std(values),
                    Statistic::MedianMad => median_mad(values),
                }
            };
            if center.is_finite() {
                out.push(Aggregate {
                    group: g.to_owned(),
                    estimator: e.to_owned(),
                    metric: (*metric).to_owned(),
                    statistic,
                    center,
                    spread: if spread.is_finite() { spread } else { 0.0 },
                    n: values.len(),
                });
            }
        }
    }
    out
}

impl ExperimentReport {
    pub fn new(protocol: &str, seed: u64, config: &impl Serialize, trials: Vec<TrialRecord>, statistic: Statistic) -> Self {
        let aggregates = aggregate(&trials, statistic);
        let mut notes = Vec::new();
        for t in trials.iter().filter(|t| t.failure.is_some()) {
            notes.push(format!(
                "trial {} ({}, {}) excluded: {}",
                t.trial,
                t.group,
                t.estimator,
                t.failure.as_deref().unwrap_or_default()
            ));
        }
        let mut report = Self {
            schema_version: SCHEMA_VERSION,
            protocol: protocol.to_owned(),
            seed,
            config: serde_json::to_value(config).expect("configs serialise"),
            trials,
            aggregates,
            summary: BTreeMap::new(),
            notes,
            determinism_hash: String::new(),
        };
        report.seal();
        report
    }

    pub fn with_summary(mut self, name: &str, value: f64) -> Self {
        self.summary.insert(name.to_owned(), value);
        self.seal();
        self
    }

    pub fn find(&self, group: &str, estimator: &str, metric: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.group == group && a.estimator == estimator && a.metric == metric)
    }

    /// SHA-256 over the canonical JSON with timings and the hash field blanked.
    pub fn content_hash(&self) -> String {
        let mut stripped = self.clone();
        stripped.determinism_hash.clear();
        for t in &mut stripped.trials {
            t.timings.clear();
        }
        let bytes = serde_json::to_vec(&stripped).expect("reports serialise");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn seal(&mut self) {
        self.determinism_hash = self.content_hash();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialise")
    }

    pub fn from_json(text: &str) -> AppResult<Self> {
        let report: Self = serde_json::from_str(text).map_err(|e| AppError::Data(format!("report: {e}")))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(AppError::Data(format!("unsupported report schema {}", report.schema_version)));
        }
        Ok(report)
    }

    /// One row per trial record; metric columns then `time_*` columns, both sorted.
    pub fn to_csv(&self) -> String {
        let metrics: BTreeSet<&str> = self.trials.iter().flat_map(|t| t.metrics.keys().map(String::as_str)).collect();
        let timings: BTreeSet<&str> = self.trials.iter().flat_map(|t| t.timings.keys().map(String::as_str)).collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["protocol".to_owned(), "group".into(), "trial".into(), "estimator".into()];
        header.extend(metrics.iter().map(|m| (*m).to_owned()));
        header.extend(timings.iter().map(|t| format!("time_{t}")));
        header.push("failure".into());
        w.write_record(&header).expect("in-memory write");
        for t in &self.trials {
            let mut row = vec![self.protocol.clone(), t.group.clone(), t.trial.to_string(), t.estimator.clone()];
            row.extend(metrics.iter().map(|m| t.get(m).map_or_else(String::new, |v| v.to_string())));
            row.extend(timings.iter().map(|k| t.timings.get(*k).map_or_else(String::new, |v| v.to_string())));
            row.push(t.failure.clone().unwrap_or_default());
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

pub fn render(report: &ExperimentReport, format: Format) -> String {
    match format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    }
}

pub fn emit_report(report: &ExperimentReport, format: Format, path: &Path) -> AppResult<()> {
    std::fs::write(path, render(report, format)).map_err(|e| AppError::io(path, e))
}
