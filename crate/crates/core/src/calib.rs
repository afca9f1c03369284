//! Global threshold calibration by grid search over a labelled corpus.
//!
//! Scores do not depend on the threshold, so each night is scored once and
//! only classification, period detection and error computation are repeated
//! per candidate. Candidates are evaluated independently and reduced in grid
//! order, so results do not depend on the execution mode.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Annotation, PipelineConfig, Recording, ScoreSeries};
use crate::par::{self, Execution};
use crate::periods::primary_metrics;
use crate::pipeline::{label_scores, run_pipeline};

pub const DEFAULT_GRID_MIN: f64 = -0.4;
pub const DEFAULT_GRID_MAX: f64 = 1.0;
pub const DEFAULT_GRID_STEP: f64 = 0.05;

const MAX_CANDIDATES: usize = 1_000_000;
const TIE_EPS: f64 = 1e-9;

/// Candidate thresholds `min, min + step, ...` up to and including `max`,
/// snapped to a 1e-9 lattice so e.g. -0.05 is represented exactly.
pub fn threshold_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) {
        return Err(Error::BadGrid("bounds and step must be finite".into()));
    }
    if step <= 0.0 {
        return Err(Error::BadGrid(format!("step must be > 0, got {step}")));
    }
    if min >= max {
        return Err(Error::BadGrid(format!("grid_min {min} must be below grid_max {max}")));
    }
    let last = ((max - min) / step + 1e-9).floor();
    if last >= MAX_CANDIDATES as f64 {
        return Err(Error::BadGrid(format!("{last} candidates exceed the limit of {MAX_CANDIDATES}")));
    }
    Ok((0..=last as usize)
        .map(|i| ((min + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta: f64,
    pub tst_mae: f64,
    /// Over nights annotated with WASO; `None` if there are none.
    pub waso_mae: Option<f64>,
    pub efficiency_mae: Option<f64>,
    /// Nights without a detected period at this threshold.
    pub undetected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub grid: Vec<SweepRow>,
    pub selected_threshold: f64,
    /// Thresholds sharing the minimum TST MAE, in grid order.
    pub tie_trace: Vec<f64>,
}

/// Per-threshold errors of one night, with undetected nights penalized by
/// treating predicted TST and WASO as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NightAtThreshold {
    pub tst_err: f64,
    pub waso_err: Option<f64>,
    pub efficiency_err: Option<f64>,
    pub detected: bool,
    pub predicted_tst: f64,
}

pub fn night_at_threshold(scores: &ScoreSeries, annotation: &Annotation, config: &PipelineConfig, theta: f64) -> NightAtThreshold {
    let labels = label_scores(scores, theta, config.epoch_seconds());
    let truth_tst = annotation.reference_tst_minutes();
    match primary_metrics(&labels, config) {
        Some((_, m)) => NightAtThreshold {
            tst_err: (m.tst_minutes - truth_tst).abs(),
            waso_err: annotation.waso_minutes.map(|w| (m.waso_minutes - w).abs()),
            efficiency_err: annotation.efficiency_pct.map(|e| (m.efficiency * 100.0 - e).abs()),
            detected: true,
            predicted_tst: m.tst_minutes,
        },
        None => NightAtThreshold {
            tst_err: truth_tst,
            waso_err: annotation.waso_minutes,
            efficiency_err: annotation.efficiency_pct,
            detected: false,
            predicted_tst: 0.0,
        },
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn score_corpus(corpus: &[(Recording, Annotation)], config: &PipelineConfig, exec: Execution) -> Result<Vec<ScoreSeries>> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    par::map(exec, corpus, |(rec, _)| run_pipeline(rec, config).map(|(scores, _)| scores))
        .into_iter()
        .collect()
}

/// Corpus-level TST/WASO/efficiency MAE for every grid threshold.
pub fn sensitivity_sweep(
    corpus: &[(Recording, Annotation)],
    grid: &[f64],
    config: &PipelineConfig,
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::BadGrid("grid must be non-empty and strictly increasing".into()));
    }
    let scores = score_corpus(corpus, config, exec)?;
    Ok(par::map(exec, grid, |&theta| {
        let nights: Vec<NightAtThreshold> = scores
            .iter()
            .zip(corpus)
            .map(|(s, (_, ann))| night_at_threshold(s, ann, config, theta))
            .collect();
        SweepRow {
            theta,
            tst_mae: mean(nights.iter().map(|n| n.tst_err)).expect("corpus is non-empty"),
            waso_mae: mean(nights.iter().filter_map(|n| n.waso_err)),
            efficiency_mae: mean(nights.iter().filter_map(|n| n.efficiency_err)),
            undetected: nights.iter().filter(|n| !n.detected).count(),
        }
    }))
}

/// Picks the row with the lowest TST MAE; ties go to the lower WASO MAE,
/// then to the lower threshold.
pub fn select(rows: &[SweepRow]) -> Option<(f64, Vec<f64>)> {
    let best_tst = rows.iter().map(|r| r.tst_mae).min_by(f64::total_cmp)?;
    let tied: Vec<&SweepRow> = rows.iter().filter(|r| r.tst_mae - best_tst <= TIE_EPS).collect();
    let best_waso = tied.iter().filter_map(|r| r.waso_mae).min_by(f64::total_cmp);
    let chosen = tied
        .iter()
        .find(|r| match (best_waso, r.waso_mae) {
            (Some(b), Some(w)) => w - b <= TIE_EPS,
            (Some(_), None) => false,
            (None, _) => true,
        })
        .expect("at least one tied row");
    Some((chosen.theta, tied.iter().map(|r| r.theta).collect()))
}

pub fn grid_search(
    corpus: &[(Recording, Annotation)],
    grid_min: f64,
    grid_max: f64,
    grid_step: f64,
    config: &PipelineConfig,
    exec: Execution,
) -> Result<CalibrationResult> {
    let grid = threshold_grid(grid_min, grid_max, grid_step)?;
    let rows = sensitivity_sweep(corpus, &grid, config, exec)?;
    let (selected_threshold, tie_trace) = select(&rows).expect("grid is non-empty");
    Ok(CalibrationResult { grid: rows, selected_threshold, tie_trace })
}
