//! Per-night errors against annotations and corpus aggregates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Annotation, PipelineConfig, Recording, SleepMetrics, TimePoint};
use crate::par::{self, Execution};
use crate::periods::primary_metrics;
use crate::pipeline::run_pipeline;

const MINUTES_PER_DAY: f64 = 1440.0;

/// Absolute timing difference in minutes.
///
/// Two dated values are compared directly. Otherwise both are reduced to
/// minutes of day and the shorter way around the 24-hour clock is taken.
pub fn timing_error(predicted: TimePoint, truth: TimePoint) -> f64 {
    match (predicted, truth) {
        (TimePoint::Dated(a), TimePoint::Dated(b)) => (a - b).abs() / 60.0,
        (a, b) => {
            let d = (a.minutes_of_day() - b.minutes_of_day()).abs();
            d.min(MINUTES_PER_DAY - d)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NightErrors {
    pub id: String,
    pub tst_abs_err_min: f64,
    pub waso_abs_err_min: Option<f64>,
    pub efficiency_abs_err_pct: Option<f64>,
    pub onset_err_min: f64,
    pub offset_err_min: f64,
}

pub fn night_errors(recording_id: &str, metrics: &SleepMetrics, annotation: &Annotation) -> Result<NightErrors> {
    if recording_id != annotation.id {
        return Err(Error::IdMismatch { recording: recording_id.to_string(), annotation: annotation.id.clone() });
    }
    Ok(NightErrors {
        id: annotation.id.clone(),
        tst_abs_err_min: (metrics.tst_minutes - annotation.reference_tst_minutes()).abs(),
        waso_abs_err_min: annotation.waso_minutes.map(|w| (metrics.waso_minutes - w).abs()),
        efficiency_abs_err_pct: annotation.efficiency_pct.map(|e| (metrics.efficiency * 100.0 - e).abs()),
        onset_err_min: timing_error(TimePoint::Dated(metrics.onset_time), annotation.onset),
        offset_err_min: timing_error(TimePoint::Dated(metrics.offset_time), annotation.offset),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (n - 1); zero for a single value.
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Summary { mean, median, std, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub nights: usize,
    pub tst: Summary,
    pub waso: Option<Summary>,
    pub efficiency: Option<Summary>,
    pub onset: Summary,
    pub offset: Summary,
    pub rows: Vec<NightErrors>,
}

pub fn aggregate(errors: &[NightErrors]) -> Result<EvalReport> {
    let collect = |f: fn(&NightErrors) -> Option<f64>| errors.iter().filter_map(f).collect::<Vec<_>>();
    let required = |f: fn(&NightErrors) -> Option<f64>| Summary::of(&collect(f)).ok_or(Error::EmptyInput);
    Ok(EvalReport {
        nights: errors.len(),
        tst: required(|e| Some(e.tst_abs_err_min))?,
        waso: Summary::of(&collect(|e| e.waso_abs_err_min)),
        efficiency: Summary::of(&collect(|e| e.efficiency_abs_err_pct)),
        onset: required(|e| Some(e.onset_err_min))?,
        offset: required(|e| Some(e.offset_err_min))?,
        rows: errors.to_vec(),
    })
}

/// What the pipeline produced for one annotated night.
#[derive(Debug, Clone, PartialEq)]
pub enum NightOutcome {
    Detected { metrics: SleepMetrics, errors: NightErrors, degenerate_spread: bool },
    /// No sleep period was found.
    Undetected { id: String, degenerate_spread: bool },
}

pub fn evaluate_night(recording: &Recording, annotation: &Annotation, config: &PipelineConfig) -> Result<NightOutcome> {
    let (scores, labels) = run_pipeline(recording, config)?;
    Ok(match primary_metrics(&labels, config) {
        Some((_, metrics)) => NightOutcome::Detected {
            errors: night_errors(recording.id(), &metrics, annotation)?,
            metrics,
            degenerate_spread: scores.degenerate_spread,
        },
        None => NightOutcome::Undetected { id: recording.id().to_string(), degenerate_spread: scores.degenerate_spread },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEvaluation {
    pub outcomes: Vec<NightOutcome>,
    /// Aggregates over detected nights; `None` when nothing was detected.
    pub report: Option<EvalReport>,
    pub undetected: Vec<String>,
}

/// Runs every night through the pipeline and aggregates the detected ones.
pub fn evaluate_corpus(
    corpus: &[(Recording, Annotation)],
    config: &PipelineConfig,
    exec: Execution,
) -> Result<CorpusEvaluation> {
    let outcomes = par::map(exec, corpus, |(rec, ann)| evaluate_night(rec, ann, config))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut errors = Vec::new();
    let mut undetected = Vec::new();
    for outcome in &outcomes {
        match outcome {
            NightOutcome::Detected { errors: e, .. } => errors.push(e.clone()),
            NightOutcome::Undetected { id, .. } => undetected.push(id.clone()),
        }
    }
    let report = if errors.is_empty() { None } else { Some(aggregate(&errors)?) };
    Ok(CorpusEvaluation { outcomes, report, undetected })
}
