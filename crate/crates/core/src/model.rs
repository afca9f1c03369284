//! Domain types shared across the crate.
//!
//! Time is always real-valued seconds since the Unix epoch (UTC). Calendar
//! parsing happens in [`crate::ingest`]; everything downstream works on this
//! single axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Five-tap centered moving average half-width.
pub const SMOOTHING_HALFWIDTH: usize = 2;

/// Weights of the seven-epoch contextual score, centered on the current epoch.
pub const CONTEXT_WEIGHTS: [f64; 7] = [0.04, 0.12, 0.20, 0.28, 0.20, 0.12, 0.04];

/// Spread below which the median/90th-percentile normalization is undefined.
pub const DEGENERATE_SPREAD_EPS: f64 = 1e-12;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// One tri-axial accelerometer reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelSample {
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl AccelSample {
    pub fn new(timestamp: f64, x: f64, y: f64, z: f64) -> Self {
        Self { timestamp, x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.timestamp.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// An ordered accelerometer recording from one device.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    id: String,
    samples: Vec<AccelSample>,
    nominal_rate_hz: f64,
}

impl Recording {
    /// Builds a recording, checking that samples are finite and time-ordered.
    ///
    /// When `nominal_rate_hz` is `None` the rate is inferred as the reciprocal
    /// of the median positive inter-sample interval (1 Hz if that is undefined).
    pub fn new(id: impl Into<String>, samples: Vec<AccelSample>, nominal_rate_hz: Option<f64>) -> Result<Self> {
        let id = id.into();
        if samples.is_empty() {
            return Err(Error::EmptyRecording(id));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        for (row, pair) in samples.windows(2).enumerate() {
            if pair[1].timestamp < pair[0].timestamp {
                return Err(Error::NonMonotonicTime {
                    row: row + 1,
                    previous: pair[0].timestamp,
                    current: pair[1].timestamp,
                });
            }
        }
        let nominal_rate_hz = match nominal_rate_hz {
            Some(rate) if rate.is_finite() && rate > 0.0 => rate,
            Some(rate) => return Err(Error::InvalidConfig(format!("sampling rate must be positive, got {rate}"))),
            None => infer_rate_hz(&samples),
        };
        Ok(Self { id, samples, nominal_rate_hz })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn samples(&self) -> &[AccelSample] {
        &self.samples
    }

    pub fn nominal_rate_hz(&self) -> f64 {
        self.nominal_rate_hz
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].timestamp
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].timestamp
    }

    /// Returns the sub-recording with timestamps in `[from, to)`, if any samples fall there.
    pub fn window(&self, from: f64, to: f64) -> Option<Recording> {
        let lo = self.samples.partition_point(|s| s.timestamp < from);
        let hi = self.samples.partition_point(|s| s.timestamp < to);
        (lo < hi).then(|| Recording {
            id: self.id.clone(),
            samples: self.samples[lo..hi].to_vec(),
            nominal_rate_hz: self.nominal_rate_hz,
        })
    }

    pub fn into_samples(self) -> Vec<AccelSample> {
        self.samples
    }
}

fn infer_rate_hz(samples: &[AccelSample]) -> f64 {
    let mut intervals: Vec<f64> = samples
        .windows(2)
        .map(|w| w[1].timestamp - w[0].timestamp)
        .filter(|d| *d > 0.0)
        .collect();
    if intervals.is_empty() {
        return 1.0;
    }
    intervals.sort_by(f64::total_cmp);
    let n = intervals.len();
    let median = if n % 2 == 1 {
        intervals[n / 2]
    } else {
        0.5 * (intervals[n / 2 - 1] + intervals[n / 2])
    };
    1.0 / median
}

/// Per-epoch activity: the sum of sample vector magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochActivity {
    pub index: usize,
    pub start_time: f64,
    pub activity: f64,
    pub sample_count: usize,
    pub valid: bool,
}

/// Tunable constants of the pipeline.
///
/// Fields are private so every instance in circulation satisfies its
/// invariants; use the `with_*` methods to derive a modified copy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    epoch_seconds: f64,
    threshold: f64,
    context_weights: [f64; 7],
    onset_run_minutes: f64,
    offset_run_minutes: f64,
    validity_fraction: f64,
    lower_quantile: f64,
    upper_quantile: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            epoch_seconds: 30.0,
            threshold: -0.05,
            context_weights: CONTEXT_WEIGHTS,
            onset_run_minutes: 5.0,
            offset_run_minutes: 10.0,
            validity_fraction: 0.5,
            lower_quantile: 0.50,
            upper_quantile: 0.90,
        }
    }
}

pub fn default_config() -> PipelineConfig {
    PipelineConfig::default()
}

impl PipelineConfig {
    pub fn epoch_seconds(&self) -> f64 {
        self.epoch_seconds
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn smoothing_halfwidth(&self) -> usize {
        SMOOTHING_HALFWIDTH
    }

    pub fn context_weights(&self) -> &[f64; 7] {
        &self.context_weights
    }

    pub fn onset_run_minutes(&self) -> f64 {
        self.onset_run_minutes
    }

    pub fn offset_run_minutes(&self) -> f64 {
        self.offset_run_minutes
    }

    pub fn validity_fraction(&self) -> f64 {
        self.validity_fraction
    }

    pub fn lower_quantile(&self) -> f64 {
        self.lower_quantile
    }

    pub fn upper_quantile(&self) -> f64 {
        self.upper_quantile
    }

    /// Consecutive sleep epochs needed to open a period.
    pub fn onset_run_epochs(&self) -> usize {
        minutes_to_epochs(self.onset_run_minutes, self.epoch_seconds)
    }

    /// Consecutive wake epochs needed to close a period.
    pub fn offset_run_epochs(&self) -> usize {
        minutes_to_epochs(self.offset_run_minutes, self.epoch_seconds)
    }

    pub fn with_epoch_seconds(mut self, epoch_seconds: f64) -> Result<Self> {
        self.epoch_seconds = epoch_seconds;
        self.validated()
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        self.threshold = threshold;
        self.validated()
    }

    pub fn with_context_weights(mut self, weights: &[f64]) -> Result<Self> {
        self.context_weights = check_weights(weights)?;
        self.validated()
    }

    pub fn with_run_minutes(mut self, onset: f64, offset: f64) -> Result<Self> {
        self.onset_run_minutes = onset;
        self.offset_run_minutes = offset;
        self.validated()
    }

    pub fn with_validity_fraction(mut self, fraction: f64) -> Result<Self> {
        self.validity_fraction = fraction;
        self.validated()
    }

    pub fn with_quantiles(mut self, lower: f64, upper: f64) -> Result<Self> {
        self.lower_quantile = lower;
        self.upper_quantile = upper;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.epoch_seconds.is_finite() && self.epoch_seconds > 0.0) {
            return bad(format!("epoch_seconds must be > 0, got {}", self.epoch_seconds));
        }
        if !self.threshold.is_finite() {
            return bad("threshold must be finite".into());
        }
        if !(self.onset_run_minutes.is_finite() && self.onset_run_minutes > 0.0) {
            return bad(format!("onset_run_minutes must be > 0, got {}", self.onset_run_minutes));
        }
        if !(self.offset_run_minutes.is_finite() && self.offset_run_minutes > 0.0) {
            return bad(format!("offset_run_minutes must be > 0, got {}", self.offset_run_minutes));
        }
        if !(0.0..=1.0).contains(&self.validity_fraction) {
            return bad(format!("validity_fraction must lie in [0, 1], got {}", self.validity_fraction));
        }
        if !(0.0 <= self.lower_quantile && self.lower_quantile < self.upper_quantile && self.upper_quantile <= 1.0) {
            return bad(format!(
                "quantiles must satisfy 0 <= lower < upper <= 1, got {} / {}",
                self.lower_quantile, self.upper_quantile
            ));
        }
        Ok(self)
    }
}

/// Checks arity and unit sum of a contextual weight vector.
pub fn check_weights(weights: &[f64]) -> Result<[f64; 7]> {
    let sum: f64 = weights.iter().sum();
    let arr: [f64; 7] = weights
        .try_into()
        .map_err(|_| Error::BadWeights { len: weights.len(), sum })?;
    if !sum.is_finite() || (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::BadWeights { len: 7, sum });
    }
    Ok(arr)
}

fn minutes_to_epochs(minutes: f64, epoch_seconds: f64) -> usize {
    let exact = minutes * 60.0 / epoch_seconds;
    // 5 min / 30 s must give exactly 10, not 11 through rounding noise
    let rounded = exact.round();
    let epochs = if (exact - rounded).abs() < 1e-9 { rounded } else { exact.ceil() };
    (epochs as usize).max(1)
}

/// Per-epoch score trajectories of one recording.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreSeries {
    pub start_times: Vec<f64>,
    pub activity: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub contextual: Vec<f64>,
    pub normalized: Vec<f64>,
    pub valid_mask: Vec<bool>,
    pub q_lower: f64,
    pub q_upper: f64,
    /// Set when the quantile spread was too small to normalize by.
    pub degenerate_spread: bool,
}

impl ScoreSeries {
    pub fn len(&self) -> usize {
        self.activity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activity.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Sleep,
    Wake,
}

impl Label {
    pub fn is_sleep(self) -> bool {
        self == Label::Sleep
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Sleep => "sleep",
            Label::Wake => "wake",
        }
    }
}

/// Per-epoch sleep/wake labels on the epoch grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SleepWakeSeries {
    pub labels: Vec<Label>,
    pub epoch_seconds: f64,
    pub start_times: Vec<f64>,
}

impl SleepWakeSeries {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sleep_epochs(&self) -> usize {
        self.labels.iter().filter(|l| l.is_sleep()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SleepPeriod {
    pub onset_index: usize,
    pub offset_index: usize,
    pub onset_time: f64,
    pub offset_time: f64,
}

impl SleepPeriod {
    pub fn span(&self) -> usize {
        self.offset_index - self.onset_index
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SleepMetrics {
    pub onset_time: f64,
    pub offset_time: f64,
    pub tst_minutes: f64,
    pub waso_minutes: f64,
    pub time_in_bed_minutes: f64,
    /// Fraction in `[0, 1]`.
    pub efficiency: f64,
}

/// A ground-truth instant: either a full timestamp or only a time of day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TimePoint {
    /// Seconds since the Unix epoch.
    Dated(f64),
    /// Seconds since midnight, in `[0, 86400)`.
    TimeOfDay(f64),
}

pub const SECONDS_PER_DAY: f64 = 86_400.0;

impl TimePoint {
    /// Minutes since midnight (UTC for dated values), in `[0, 1440)`.
    pub fn minutes_of_day(self) -> f64 {
        let secs = match self {
            TimePoint::Dated(t) => t.rem_euclid(SECONDS_PER_DAY),
            TimePoint::TimeOfDay(s) => s.rem_euclid(SECONDS_PER_DAY),
        };
        secs / 60.0
    }
}

/// A ground-truth sleep window for one recording.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Annotation {
    pub id: String,
    pub onset: TimePoint,
    pub offset: TimePoint,
    pub tst_minutes: Option<f64>,
    pub waso_minutes: Option<f64>,
    /// Percent, `0..=100`.
    pub efficiency_pct: Option<f64>,
}

impl Annotation {
    /// Onset-to-offset duration in minutes, unwrapping over midnight when
    /// either end is only a time of day.
    pub fn span_minutes(&self) -> f64 {
        match (self.onset, self.offset) {
            (TimePoint::Dated(a), TimePoint::Dated(b)) => (b - a) / 60.0,
            (a, b) => {
                let d = b.minutes_of_day() - a.minutes_of_day();
                if d < 0.0 {
                    d + 1440.0
                } else {
                    d
                }
            }
        }
    }

    /// Reference TST: the annotated value, or the annotated window when absent.
    pub fn reference_tst_minutes(&self) -> f64 {
        self.tst_minutes.unwrap_or_else(|| self.span_minutes())
    }
}
