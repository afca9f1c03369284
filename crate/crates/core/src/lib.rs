//! Accelerometer-only sleep tracking.
//!
//! Raw tri-axial samples are summed into fixed-length epochs, smoothed,
//! combined into a contextual activity score, normalized by the recording's
//! median and 90th percentile, and thresholded into sleep/wake labels. Sleep
//! periods are found from run lengths of those labels, and the usual sleep
//! metrics are computed for the primary period.
//!
//! ```
//! use actisleep::{periods, pipeline, synth, PipelineConfig};
//!
//! let (recording, _truth) = synth::generate(&synth::SynthSpec::default()).unwrap();
//! let config = PipelineConfig::default();
//! let (_scores, labels) = pipeline::run_pipeline(&recording, &config).unwrap();
//! let (_period, metrics) = periods::primary_metrics(&labels, &config).unwrap();
//! assert!(metrics.tst_minutes > 400.0);
//! ```

// `!(a < b)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calib;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod par;
pub mod periods;
pub mod pipeline;
pub mod stream;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    default_config, AccelSample, Annotation, EpochActivity, Label, PipelineConfig, Recording, ScoreSeries,
    SleepMetrics, SleepPeriod, SleepWakeSeries, TimePoint,
};
pub use par::Execution;
