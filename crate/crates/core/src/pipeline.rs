//! Batch scoring: vector magnitude, five-epoch smoothing, seven-epoch
//! contextual score, median/90th-percentile normalization and thresholding.
//!
//! Both windowed filters extend the series at its ends by repeating the edge
//! value, so every stage returns exactly one value per epoch. The per-window
//! kernels are shared with [`crate::stream`] so the two paths perform the same
//! floating-point operations in the same order.

use crate::error::{Error, Result};
use crate::ingest::segment_epochs;
use crate::model::{
    check_weights, AccelSample, EpochActivity, Label, PipelineConfig, Recording, ScoreSeries, SleepWakeSeries,
    DEGENERATE_SPREAD_EPS, SMOOTHING_HALFWIDTH,
};

pub(crate) const SMOOTH_TAPS: usize = 2 * SMOOTHING_HALFWIDTH + 1;
pub(crate) const CONTEXT_TAPS: usize = 7;
pub(crate) const CONTEXT_HALFWIDTH: usize = CONTEXT_TAPS / 2;

pub fn vector_magnitude(sample: &AccelSample) -> Result<f64> {
    if !(sample.x.is_finite() && sample.y.is_finite() && sample.z.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok(magnitude(sample))
}

#[inline]
pub(crate) fn magnitude(s: &AccelSample) -> f64 {
    (s.x * s.x + s.y * s.y + s.z * s.z).sqrt()
}

#[inline]
pub(crate) fn smooth_kernel(window: &[f64; SMOOTH_TAPS]) -> f64 {
    window.iter().fold(0.0, |acc, v| acc + v) / SMOOTH_TAPS as f64
}

#[inline]
pub(crate) fn context_kernel(window: &[f64; CONTEXT_TAPS], weights: &[f64; CONTEXT_TAPS]) -> f64 {
    window.iter().zip(weights).fold(0.0, |acc, (v, w)| acc + w * v)
}

#[inline]
fn clamped(len: usize, t: usize, offset: isize) -> usize {
    (t as isize + offset).clamp(0, len as isize - 1) as usize
}

/// Centered five-epoch moving average with clamp-to-edge extension.
pub fn smooth(activity: &[f64]) -> Result<Vec<f64>> {
    if activity.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = activity.len();
    let half = SMOOTHING_HALFWIDTH as isize;
    Ok((0..n)
        .map(|t| {
            let window: [f64; SMOOTH_TAPS] = std::array::from_fn(|k| activity[clamped(n, t, k as isize - half)]);
            smooth_kernel(&window)
        })
        .collect())
}

/// Weighted seven-epoch contextual score over the smoothed series.
pub fn contextual_score(smoothed: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    let weights = check_weights(weights)?;
    if smoothed.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = smoothed.len();
    let half = CONTEXT_HALFWIDTH as isize;
    Ok((0..n)
        .map(|t| {
            let window: [f64; CONTEXT_TAPS] = std::array::from_fn(|k| smoothed[clamped(n, t, k as isize - half)]);
            context_kernel(&window, &weights)
        })
        .collect())
}

/// Quantile of an ascending slice by linear interpolation between order
/// statistics (position `q * (n - 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    pub q_lower: f64,
    pub q_upper: f64,
    pub degenerate_spread: bool,
}

/// Robust normalization `(S - Q_lo) / (Q_hi - Q_lo)`.
///
/// Quantiles are taken over valid epochs only; every epoch still receives a
/// normalized value. A spread at or below `1e-12` yields all zeros and sets
/// `degenerate_spread`.
pub fn normalize(scores: &[f64], valid_mask: &[bool], q_lo: f64, q_hi: f64) -> Result<Normalized> {
    if !(q_lo < q_hi) {
        return Err(Error::InvalidConfig(format!("quantiles must satisfy lower < upper, got {q_lo} / {q_hi}")));
    }
    assert_eq!(scores.len(), valid_mask.len(), "score and mask lengths differ");
    let mut valid: Vec<f64> = scores
        .iter()
        .zip(valid_mask)
        .filter_map(|(s, ok)| ok.then_some(*s))
        .collect();
    if valid.is_empty() {
        return Err(Error::NoValidEpochs);
    }
    valid.sort_by(f64::total_cmp);
    let q_lower = quantile_sorted(&valid, q_lo);
    let q_upper = quantile_sorted(&valid, q_hi);
    let spread = q_upper - q_lower;
    if spread <= DEGENERATE_SPREAD_EPS {
        return Ok(Normalized { values: vec![0.0; scores.len()], q_lower, q_upper, degenerate_spread: true });
    }
    Ok(Normalized {
        values: scores.iter().map(|s| (s - q_lower) / spread).collect(),
        q_lower,
        q_upper,
        degenerate_spread: false,
    })
}

/// Sleep iff the normalized score is strictly below the threshold; invalid
/// epochs are always Wake.
pub fn classify(normalized: &[f64], valid_mask: &[bool], threshold: f64) -> Vec<Label> {
    normalized
        .iter()
        .zip(valid_mask)
        .map(|(s, ok)| if *ok && *s < threshold { Label::Sleep } else { Label::Wake })
        .collect()
}

/// Smoothing, contextual scoring and normalization over segmented epochs.
pub fn score_epochs(epochs: &[EpochActivity], config: &PipelineConfig) -> Result<ScoreSeries> {
    let activity: Vec<f64> = epochs.iter().map(|e| e.activity).collect();
    let valid_mask: Vec<bool> = epochs.iter().map(|e| e.valid).collect();
    let start_times = epochs.iter().map(|e| e.start_time).collect();
    let smoothed = smooth(&activity)?;
    let contextual = contextual_score(&smoothed, config.context_weights())?;
    let norm = normalize(&contextual, &valid_mask, config.lower_quantile(), config.upper_quantile())?;
    Ok(ScoreSeries {
        start_times,
        activity,
        smoothed,
        contextual,
        normalized: norm.values,
        valid_mask,
        q_lower: norm.q_lower,
        q_upper: norm.q_upper,
        degenerate_spread: norm.degenerate_spread,
    })
}

/// Applies a threshold to an already-scored series. A degenerate spread
/// carries no sleep evidence and is all Wake at any threshold.
pub fn label_scores(scores: &ScoreSeries, threshold: f64, epoch_seconds: f64) -> SleepWakeSeries {
    let labels = if scores.degenerate_spread {
        vec![Label::Wake; scores.normalized.len()]
    } else {
        classify(&scores.normalized, &scores.valid_mask, threshold)
    };
    SleepWakeSeries {
        labels,
        epoch_seconds,
        start_times: scores.start_times.clone(),
    }
}

/// Full batch pipeline from raw samples to per-epoch labels.
pub fn run_pipeline(recording: &Recording, config: &PipelineConfig) -> Result<(ScoreSeries, SleepWakeSeries)> {
    let epochs = segment_epochs(recording, config)?;
    let scores = score_epochs(&epochs, config)?;
    let labels = label_scores(&scores, config.threshold(), config.epoch_seconds());
    Ok((scores, labels))
}
