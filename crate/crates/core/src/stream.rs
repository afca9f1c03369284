//! Incremental scoring with a fixed working set.
//!
//! Samples are folded into the open epoch as they arrive. When an epoch
//! closes, its activity enters an 11-slot ring (the support of the 5-tap
//! smoother composed with the 7-tap contextual window) and the contextual
//! score of the epoch five positions back is emitted. Scores are appended to
//! an output log; the recording-wide quantiles are computed from that log in
//! [`StreamState::finalize`], which makes the result label-identical to
//! [`crate::pipeline::run_pipeline`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{epoch_of, min_valid_count};
use crate::model::{AccelSample, PipelineConfig, Recording, ScoreSeries, SleepWakeSeries};
use crate::pipeline::{
    context_kernel, label_scores, magnitude, normalize, smooth_kernel, CONTEXT_HALFWIDTH, CONTEXT_TAPS, SMOOTH_TAPS,
};
use crate::model::SMOOTHING_HALFWIDTH;

/// Raw-activity history needed to score one epoch.
pub const RING_CAPACITY: usize = 2 * (SMOOTHING_HALFWIDTH + CONTEXT_HALFWIDTH) + 1;

/// Epochs between an epoch closing and its contextual score being emitted.
pub const EMISSION_LATENCY: usize = SMOOTHING_HALFWIDTH + CONTEXT_HALFWIDTH;

// Arithmetic tallies per kernel invocation.
const SMOOTH_OPS: u64 = SMOOTH_TAPS as u64 + 1;
const CONTEXT_OPS: u64 = 2 * CONTEXT_TAPS as u64;
const VM_OPS: u64 = 6;
const ACCUMULATE_OPS: u64 = 1;
const BINNING_OPS: u64 = 4;
const NORMALIZE_OPS: u64 = 2;
const CLASSIFY_OPS: u64 = 1;

/// Fixed-capacity history of the most recent closed epoch activities.
#[derive(Debug, Clone)]
struct EpochRing {
    activity: [f64; RING_CAPACITY],
    len: usize,
}

impl EpochRing {
    fn new() -> Self {
        Self { activity: [0.0; RING_CAPACITY], len: 0 }
    }

    /// `index` is the absolute epoch ordinal, `closed` the number closed so far.
    fn push(&mut self, index: usize, activity: f64) {
        self.activity[index % RING_CAPACITY] = activity;
        self.len = (self.len + 1).min(RING_CAPACITY);
    }

    fn get(&self, index: usize, closed: usize) -> f64 {
        debug_assert!(index < closed && index + self.len >= closed, "epoch {index} evicted");
        self.activity[index % RING_CAPACITY]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ResourceReport {
    /// Peak number of closed epochs held in the ring.
    pub peak_ring_epochs: usize,
    /// Peak ring occupancy plus the open epoch accumulator.
    pub peak_transient_epochs: usize,
    pub closed_epochs: usize,
    /// Counted arithmetic in the filtering, scoring, normalization and classification path.
    pub filter_ops: u64,
    /// Counted per-sample arithmetic (vector magnitude, accumulation, binning).
    pub sample_ops: u64,
}

impl ResourceReport {
    pub fn filter_ops_per_epoch(&self) -> u64 {
        per_epoch(self.filter_ops, self.closed_epochs)
    }

    pub fn ops_per_epoch(&self) -> u64 {
        per_epoch(self.filter_ops + self.sample_ops, self.closed_epochs)
    }

    /// `(peak ring occupancy, total counted operations per closed epoch)`.
    pub fn summary(&self) -> (usize, u64) {
        (self.peak_ring_epochs, self.ops_per_epoch())
    }
}

fn per_epoch(ops: u64, epochs: usize) -> u64 {
    if epochs == 0 {
        0
    } else {
        ops.div_ceil(epochs as u64)
    }
}

/// Output of [`StreamState::finalize`].
#[derive(Debug, Clone)]
pub struct Finalized {
    pub scores: ScoreSeries,
    pub labels: SleepWakeSeries,
    pub resources: ResourceReport,
}

/// Streaming scorer. Single writer; call [`push_sample`](Self::push_sample)
/// in timestamp order, then [`finalize`](Self::finalize).
#[derive(Debug, Clone)]
pub struct StreamState {
    config: PipelineConfig,
    min_count: usize,
    origin: Option<f64>,
    last_timestamp: f64,
    open_epoch: usize,
    partial_sum: f64,
    partial_count: usize,
    ring: EpochRing,
    closed: usize,
    // output log, one entry per epoch
    start_times: Vec<f64>,
    activity: Vec<f64>,
    valid: Vec<bool>,
    smoothed: Vec<f64>,
    contextual: Vec<f64>,
    peak_ring: usize,
    peak_transient: usize,
    filter_ops: u64,
    sample_ops: u64,
}

impl StreamState {
    pub fn new(config: &PipelineConfig, nominal_rate_hz: f64) -> Result<Self> {
        if !(nominal_rate_hz.is_finite() && nominal_rate_hz > 0.0) {
            return Err(Error::InvalidConfig(format!("sampling rate must be positive, got {nominal_rate_hz}")));
        }
        Ok(Self {
            config: config.clone(),
            min_count: min_valid_count(config, nominal_rate_hz),
            origin: None,
            last_timestamp: f64::NEG_INFINITY,
            open_epoch: 0,
            partial_sum: 0.0,
            partial_count: 0,
            ring: EpochRing::new(),
            closed: 0,
            start_times: Vec::new(),
            activity: Vec::new(),
            valid: Vec::new(),
            smoothed: Vec::new(),
            contextual: Vec::new(),
            peak_ring: 0,
            peak_transient: 0,
            filter_ops: 0,
            sample_ops: 0,
        })
    }

    pub fn closed_epochs(&self) -> usize {
        self.closed
    }

    /// Contextual scores emitted so far, indexed by epoch.
    pub fn emitted_scores(&self) -> &[f64] {
        &self.contextual
    }

    pub fn ring_occupancy(&self) -> usize {
        self.ring.len
    }

    /// Adds one sample. Returns `(epoch, contextual score)` for every score
    /// that became available, which is empty unless an epoch boundary was
    /// crossed and at least six epochs have closed.
    pub fn push_sample(&mut self, sample: &AccelSample) -> Result<Vec<(usize, f64)>> {
        if !sample.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        if sample.timestamp < self.last_timestamp {
            return Err(Error::OutOfOrderSample { previous: self.last_timestamp, current: sample.timestamp });
        }
        self.last_timestamp = sample.timestamp;
        let origin = *self.origin.get_or_insert(sample.timestamp);
        let epoch = epoch_of(sample.timestamp, origin, self.config.epoch_seconds());
        self.sample_ops += BINNING_OPS;

        let mut emitted = Vec::new();
        while self.open_epoch < epoch {
            if let Some(score) = self.close_open_epoch() {
                emitted.push(score);
            }
        }
        self.partial_sum += magnitude(sample);
        self.partial_count += 1;
        self.sample_ops += VM_OPS + ACCUMULATE_OPS;
        self.peak_transient = self.peak_transient.max(self.ring.len + 1);
        Ok(emitted)
    }

    fn close_open_epoch(&mut self) -> Option<(usize, f64)> {
        let index = self.open_epoch;
        let activity = self.partial_sum;
        let valid = self.partial_count >= self.min_count;
        self.partial_sum = 0.0;
        self.partial_count = 0;
        self.open_epoch += 1;

        self.ring.push(index, activity);
        self.closed += 1;
        self.peak_ring = self.peak_ring.max(self.ring.len);
        self.start_times.push(self.origin.unwrap_or(0.0) + index as f64 * self.config.epoch_seconds());
        self.activity.push(activity);
        self.valid.push(valid);

        if index >= SMOOTHING_HALFWIDTH {
            let s = self.smoothed_at(index - SMOOTHING_HALFWIDTH);
            self.smoothed.push(s);
        }
        if index >= EMISSION_LATENCY {
            let t = index - EMISSION_LATENCY;
            let score = self.contextual_at(t);
            self.contextual.push(score);
            return Some((t, score));
        }
        None
    }

    fn activity_at(&self, index: isize) -> f64 {
        let i = index.clamp(0, self.closed as isize - 1) as usize;
        self.ring.get(i, self.closed)
    }

    fn smoothed_at(&mut self, t: usize) -> f64 {
        let half = SMOOTHING_HALFWIDTH as isize;
        let window: [f64; SMOOTH_TAPS] = std::array::from_fn(|k| self.activity_at(t as isize + k as isize - half));
        self.filter_ops += SMOOTH_OPS;
        smooth_kernel(&window)
    }

    fn contextual_at(&mut self, t: usize) -> f64 {
        let half = CONTEXT_HALFWIDTH as isize;
        let last = self.closed as isize - 1;
        let mut window = [0.0; CONTEXT_TAPS];
        for (k, slot) in window.iter_mut().enumerate() {
            let j = (t as isize + k as isize - half).clamp(0, last) as usize;
            *slot = self.smoothed_at(j);
        }
        self.filter_ops += CONTEXT_OPS;
        context_kernel(&window, self.config.context_weights())
    }

    pub fn resource_report(&self) -> ResourceReport {
        ResourceReport {
            peak_ring_epochs: self.peak_ring,
            peak_transient_epochs: self.peak_transient,
            closed_epochs: self.closed,
            filter_ops: self.filter_ops,
            sample_ops: self.sample_ops,
        }
    }

    /// Closes the open epoch, resolves the trailing edge epochs with the
    /// clamp rule, normalizes over the whole recording and classifies.
    ///
    /// An underfilled final epoch is dropped unless it is the only epoch,
    /// mirroring [`crate::ingest::segment_epochs`].
    pub fn finalize(mut self) -> Result<Finalized> {
        if self.partial_count > 0 && (self.partial_count >= self.min_count || self.closed == 0) {
            self.close_open_epoch();
        }
        if self.closed == 0 {
            return Err(Error::NoCompletedEpochs);
        }
        while self.smoothed.len() < self.closed {
            let s = self.smoothed_at(self.smoothed.len());
            self.smoothed.push(s);
        }
        while self.contextual.len() < self.closed {
            let s = self.contextual_at(self.contextual.len());
            self.contextual.push(s);
        }
        let norm = normalize(
            &self.contextual,
            &self.valid,
            self.config.lower_quantile(),
            self.config.upper_quantile(),
        )?;
        self.filter_ops += (NORMALIZE_OPS + CLASSIFY_OPS) * self.closed as u64;
        let resources = self.resource_report();
        let scores = ScoreSeries {
            start_times: self.start_times,
            activity: self.activity,
            smoothed: self.smoothed,
            contextual: self.contextual,
            normalized: norm.values,
            valid_mask: self.valid,
            q_lower: norm.q_lower,
            q_upper: norm.q_upper,
            degenerate_spread: norm.degenerate_spread,
        };
        let labels = label_scores(&scores, self.config.threshold(), self.config.epoch_seconds());
        Ok(Finalized { scores, labels, resources })
    }
}

/// Feeds a whole recording through a [`StreamState`].
pub fn stream_recording(recording: &Recording, config: &PipelineConfig) -> Result<Finalized> {
    let mut state = StreamState::new(config, recording.nominal_rate_hz())?;
    for s in recording.samples() {
        state.push_sample(s)?;
    }
    state.finalize()
}
