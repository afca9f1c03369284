#![allow(dead_code)]

use actisleep::model::CONTEXT_WEIGHTS;
use actisleep::synth::SynthSpec;
use actisleep::{Label, Recording};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random night: 1 Hz (8-24 h) or 25 Hz (1-3 h), random levels and noise,
/// a few sample gaps, and a duration that usually leaves a partial final epoch.
pub fn random_spec(seed: u64) -> SynthSpec {
    let mut r = rng(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let rate_hz = if r.gen_bool(0.5) { 1.0 } else { 25.0 };
    let hours = if rate_hz == 1.0 { r.gen_range(8.0..24.0) } else { r.gen_range(1.0..3.0) };
    let duration_s = (hours * 3600.0_f64).floor() + r.gen_range(0.0..30.0);
    let night = duration_s * r.gen_range(0.2..0.45);
    let onset_s = r.gen_range(0.1..0.5) * (duration_s - night);
    let offset_s = onset_s + night;
    let wake_level = r.gen_range(2.0..20.0);
    let mut gaps = Vec::new();
    for _ in 0..r.gen_range(0..4) {
        let len = r.gen_range(5.0..600.0);
        let start = r.gen_range(0.0..duration_s - len);
        gaps.push((start, len));
    }
    let mut awakenings = Vec::new();
    if r.gen_bool(0.5) {
        let len = r.gen_range(60.0..1200.0);
        awakenings.push((onset_s + r.gen_range(0.2..0.7) * (night - len), len));
    }
    SynthSpec {
        id: format!("rand{seed}"),
        seed,
        rate_hz,
        start_time: 1_700_000_000.0 + r.gen_range(0.0..86_400.0),
        duration_s,
        onset_s,
        offset_s,
        wake_level,
        wake_noise: r.gen_range(0.0..wake_level * 0.5),
        sleep_level: r.gen_range(0.0..wake_level * 0.3),
        sleep_noise: r.gen_range(0.0..0.5),
        burst_level: wake_level * r.gen_range(1.2..3.0),
        burst_period_s: r.gen_range(900.0..3600.0),
        burst_len_s: r.gen_range(120.0..800.0),
        awakenings,
        gaps,
    }
}

/// Straight-line reference of the whole batch path: bucket, sum, clamp-edge
/// filters, interpolated quantiles over valid epochs, threshold.
pub struct Reference {
    pub activity: Vec<f64>,
    pub valid: Vec<bool>,
    pub contextual: Vec<f64>,
    pub normalized: Vec<f64>,
    pub labels: Vec<Label>,
}

pub fn reference_pipeline(rec: &Recording, epoch_seconds: f64, validity_fraction: f64, threshold: f64) -> Reference {
    let samples = rec.samples();
    let origin = samples[0].timestamp;
    let bucket = |t: f64| ((t - origin) / epoch_seconds + 1e-6).floor() as usize;
    let n = bucket(samples[samples.len() - 1].timestamp) + 1;
    let mut activity = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for s in samples {
        let k = bucket(s.timestamp);
        activity[k] += (s.x * s.x + s.y * s.y + s.z * s.z).sqrt();
        counts[k] += 1;
    }
    let expected = (rec.nominal_rate_hz() * epoch_seconds).round();
    let need = ((validity_fraction * expected).ceil() as usize).max(1);
    let mut valid: Vec<bool> = counts.iter().map(|c| *c >= need).collect();
    if n > 1 && !valid[n - 1] {
        activity.pop();
        valid.pop();
    }
    let n = activity.len() as i64;
    let at = |xs: &[f64], i: i64| xs[i.clamp(0, n - 1) as usize];

    let mut smoothed = Vec::new();
    for t in 0..n {
        let mut s = 0.0;
        for k in -2..=2 {
            s += at(&activity, t + k);
        }
        smoothed.push(s / 5.0);
    }
    let mut contextual = Vec::new();
    for t in 0..n {
        let mut s = 0.0;
        for k in -3i64..=3 {
            s += CONTEXT_WEIGHTS[(k + 3) as usize] * at(&smoothed, t + k);
        }
        contextual.push(s);
    }
    let mut pool: Vec<f64> = contextual.iter().zip(&valid).filter(|(_, v)| **v).map(|(s, _)| *s).collect();
    pool.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| {
        let h = p * (pool.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(pool.len() - 1);
        pool[lo] + (h - lo as f64) * (pool[hi] - pool[lo])
    };
    let (q50, q90) = (q(0.5), q(0.9));
    let normalized: Vec<f64> = if q90 - q50 <= 1e-12 {
        vec![0.0; contextual.len()]
    } else {
        contextual.iter().map(|s| (s - q50) / (q90 - q50)).collect()
    };
    let labels = normalized
        .iter()
        .zip(&valid)
        .map(|(s, v)| if *v && *s < threshold { Label::Sleep } else { Label::Wake })
        .collect();
    Reference { activity, valid, contextual, normalized, labels }
}

/// Look-ahead period scanner written independently of the run-length version.
pub fn reference_scan(labels: &[Label], on: usize, off: usize) -> Vec<(usize, usize)> {
    let n = labels.len();
    let all = |from: usize, len: usize, l: Label| from + len <= n && labels[from..from + len].iter().all(|x| *x == l);
    let mut out = Vec::new();
    let mut i = 0;
    let mut open: Option<usize> = None;
    let mut last_sleep = 0;
    while i < n {
        match open {
            None => {
                if all(i, on, Label::Sleep) {
                    open = Some(i);
                    last_sleep = i;
                }
                i += 1;
            }
            Some(start) => {
                if all(i, off, Label::Wake) {
                    out.push((start, last_sleep));
                    open = None;
                    i += off;
                } else {
                    if labels[i] == Label::Sleep {
                        last_sleep = i;
                    }
                    i += 1;
                }
            }
        }
    }
    if let Some(start) = open {
        out.push((start, last_sleep));
    }
    out
}
