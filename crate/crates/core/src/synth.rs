//! Seeded synthetic nights with a planted sleep window.
//!
//! Each sample's vector magnitude is the level of its segment (wake, wake
//! burst, or sleep) plus uniform noise in `[-sigma, sigma]`, clipped at zero.
//! Bursts repeat through the waking hours so that the median score is a
//! baseline-wake value and the 90th percentile a burst value. The whole
//! magnitude is placed on one randomly chosen axis with a random sign, so the
//! magnitude recovered downstream is exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AccelSample, Annotation, Recording, TimePoint};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSpec {
    pub id: String,
    pub seed: u64,
    pub rate_hz: f64,
    /// Unix time of the first sample.
    pub start_time: f64,
    pub duration_s: f64,
    /// Planted onset/offset, seconds after `start_time`.
    pub onset_s: f64,
    pub offset_s: f64,
    pub wake_level: f64,
    pub wake_noise: f64,
    pub sleep_level: f64,
    pub sleep_noise: f64,
    /// Wake level during bursts; a burst occupies the first `burst_len_s`
    /// of every `burst_period_s` outside the night. `burst_len_s = 0` disables them.
    pub burst_level: f64,
    pub burst_period_s: f64,
    pub burst_len_s: f64,
    /// `(start, duration)` in seconds after `start_time`, inside the night.
    pub awakenings: Vec<(f64, f64)>,
    /// `(start, duration)` intervals with no samples.
    pub gaps: Vec<(f64, f64)>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            id: "synth".into(),
            seed: 0,
            rate_hz: 1.0,
            // 2024-01-01T16:00:00Z, night 23:00 to 07:00
            start_time: 1_704_124_800.0,
            duration_s: 24.0 * 3600.0,
            onset_s: 7.0 * 3600.0,
            offset_s: 15.0 * 3600.0,
            wake_level: 10.0,
            wake_noise: 2.0,
            sleep_level: 0.5,
            sleep_noise: 0.2,
            burst_level: 20.0,
            burst_period_s: 1800.0,
            burst_len_s: 600.0,
            awakenings: Vec::new(),
            gaps: Vec::new(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadSpec(msg));
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return bad(format!("rate_hz must be > 0, got {}", self.rate_hz));
        }
        if !(self.start_time.is_finite() && self.start_time >= 0.0) {
            return bad("start_time must be a non-negative Unix time".into());
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad(format!("duration must be > 0, got {}", self.duration_s));
        }
        if !(0.0 <= self.onset_s && self.onset_s < self.offset_s && self.offset_s <= self.duration_s) {
            return bad(format!(
                "night [{}, {}] must lie inside [0, {}]",
                self.onset_s, self.offset_s, self.duration_s
            ));
        }
        for (name, v) in [
            ("wake_level", self.wake_level),
            ("wake_noise", self.wake_noise),
            ("sleep_level", self.sleep_level),
            ("sleep_noise", self.sleep_noise),
            ("burst_level", self.burst_level),
            ("burst_len_s", self.burst_len_s),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.burst_len_s > 0.0 && !(self.burst_period_s.is_finite() && self.burst_period_s > self.burst_len_s) {
            return bad("burst_period_s must exceed burst_len_s".into());
        }
        if self.sleep_level >= self.wake_level {
            return bad("sleep_level must be below wake_level".into());
        }
        for &(start, len) in &self.awakenings {
            if !(len > 0.0 && start >= self.onset_s && start + len <= self.offset_s) {
                return bad(format!("awakening ({start}, {len}) outside the night"));
            }
        }
        for &(start, len) in &self.gaps {
            if !(len > 0.0 && start >= 0.0 && start + len <= self.duration_s) {
                return bad(format!("gap ({start}, {len}) outside the recording"));
            }
        }
        Ok(())
    }

    pub fn awake_minutes_in_night(&self) -> f64 {
        self.awakenings.iter().map(|(_, d)| d).sum::<f64>() / 60.0
    }

    /// Ground truth implied by the plant.
    pub fn annotation(&self) -> Annotation {
        let span = (self.offset_s - self.onset_s) / 60.0;
        let waso = self.awake_minutes_in_night();
        Annotation {
            id: self.id.clone(),
            onset: TimePoint::Dated(self.start_time + self.onset_s),
            offset: TimePoint::Dated(self.start_time + self.offset_s),
            tst_minutes: Some(span - waso),
            waso_minutes: Some(waso),
            efficiency_pct: Some((span - waso) / span * 100.0),
        }
    }

    fn asleep_at(&self, t: f64) -> bool {
        t >= self.onset_s && t < self.offset_s && !self.awakenings.iter().any(|&(s, d)| t >= s && t < s + d)
    }

    fn bursting_at(&self, t: f64) -> bool {
        let in_night = t >= self.onset_s && t < self.offset_s;
        !in_night && self.burst_len_s > 0.0 && t.rem_euclid(self.burst_period_s) < self.burst_len_s
    }

    fn in_gap(&self, t: f64) -> bool {
        self.gaps.iter().any(|&(s, d)| t >= s && t < s + d)
    }
}

/// Draws the recording and its planted annotation. Deterministic in `spec`.
pub fn generate(spec: &SynthSpec) -> Result<(Recording, Annotation)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = (spec.duration_s * spec.rate_hz).floor() as usize;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / spec.rate_hz;
        let (level, noise) = if spec.asleep_at(t) {
            (spec.sleep_level, spec.sleep_noise)
        } else if spec.bursting_at(t) {
            (spec.burst_level, spec.wake_noise)
        } else {
            (spec.wake_level, spec.wake_noise)
        };
        let jitter = if noise > 0.0 { rng.gen_range(-noise..=noise) } else { 0.0 };
        let axis = rng.gen_range(0..3);
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        if spec.in_gap(t) {
            continue;
        }
        let vm = (level + jitter).max(0.0) * sign;
        let mut xyz = [0.0; 3];
        xyz[axis] = vm;
        samples.push(AccelSample::new(spec.start_time + t, xyz[0], xyz[1], xyz[2]));
    }
    if samples.is_empty() {
        return Err(Error::BadSpec("spec produces no samples".into()));
    }
    let recording = Recording::new(spec.id.clone(), samples, Some(spec.rate_hz))?;
    Ok((recording, spec.annotation()))
}

/// `nights` specs derived from `base`: night `k` gets seed `base.seed + k`,
/// starts `k` days later, and has its window shifted by a seeded offset of up
/// to `jitter_minutes` either way.
pub fn nightly_specs(base: &SynthSpec, nights: usize, jitter_minutes: f64) -> Result<Vec<SynthSpec>> {
    base.validate()?;
    if !(jitter_minutes.is_finite() && jitter_minutes >= 0.0) {
        return Err(Error::BadSpec(format!("jitter must be >= 0, got {jitter_minutes}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(base.seed ^ 0x5eed_5eed);
    (0..nights)
        .map(|k| {
            let shift = if jitter_minutes > 0.0 {
                (rng.gen_range(-jitter_minutes..=jitter_minutes) * 60.0).round()
            } else {
                0.0
            };
            let room = (base.onset_s).min(base.duration_s - base.offset_s);
            let shift = shift.clamp(-room, room);
            let spec = SynthSpec {
                id: format!("night{:03}", k + 1),
                seed: base.seed.wrapping_add(k as u64),
                start_time: base.start_time + k as f64 * 86_400.0,
                onset_s: base.onset_s + shift,
                offset_s: base.offset_s + shift,
                awakenings: base.awakenings.iter().map(|&(s, d)| (s + shift, d)).collect(),
                ..base.clone()
            };
            spec.validate().map(|_| spec)
        })
        .collect()
}
