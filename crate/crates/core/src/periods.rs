//! Sleep period detection from run lengths and per-period metrics.

use crate::error::{Error, Result};
use crate::model::{Label, PipelineConfig, SleepMetrics, SleepPeriod, SleepWakeSeries};

/// Maximal run of identical labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Run {
    label: Label,
    start: usize,
    len: usize,
}

fn runs(labels: &[Label]) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        match out.last_mut() {
            Some(run) if run.label == label => run.len += 1,
            _ => out.push(Run { label, start: i, len: 1 }),
        }
    }
    out
}

/// Period detection with explicit run thresholds in epochs.
///
/// A period opens at the first epoch of a sleep run of at least `onset_run`
/// epochs and closes at the last sleep epoch before a wake run of at least
/// `offset_run` epochs, or at the last sleep epoch of the series.
pub fn detect_periods_with(labels: &[Label], onset_run: usize, offset_run: usize) -> Vec<(usize, usize)> {
    let mut periods = Vec::new();
    let mut open: Option<(usize, usize)> = None;
    for run in runs(labels) {
        match (run.label, open.as_mut()) {
            (Label::Sleep, None) if run.len >= onset_run => open = Some((run.start, run.start + run.len - 1)),
            (Label::Sleep, Some((_, last))) => *last = run.start + run.len - 1,
            (Label::Wake, Some(_)) if run.len >= offset_run => periods.extend(open.take()),
            _ => {}
        }
    }
    periods.extend(open);
    periods
}

pub fn detect_periods(labels: &SleepWakeSeries, config: &PipelineConfig) -> Vec<SleepPeriod> {
    detect_periods_with(&labels.labels, config.onset_run_epochs(), config.offset_run_epochs())
        .into_iter()
        .map(|(onset_index, offset_index)| SleepPeriod {
            onset_index,
            offset_index,
            onset_time: labels.start_times[onset_index],
            offset_time: labels.start_times[offset_index],
        })
        .collect()
}

/// Longest period by index span; the earliest wins a tie.
pub fn select_primary(periods: &[SleepPeriod]) -> Option<SleepPeriod> {
    periods
        .iter()
        .copied()
        .reduce(|best, p| if p.span() > best.span() { p } else { best })
}

pub fn compute_metrics(labels: &SleepWakeSeries, period: &SleepPeriod) -> Result<SleepMetrics> {
    let len = labels.len();
    for index in [period.onset_index, period.offset_index] {
        if index >= len {
            return Err(Error::IndexOutOfRange { index, len });
        }
    }
    if period.onset_index > period.offset_index {
        return Err(Error::IndexOutOfRange { index: period.onset_index, len: period.offset_index + 1 });
    }
    let window = &labels.labels[period.onset_index..=period.offset_index];
    let sleep = window.iter().filter(|l| l.is_sleep()).count();
    let wake = window.len() - sleep;
    let minutes = labels.epoch_seconds / 60.0;
    let tst_minutes = sleep as f64 * minutes;
    let waso_minutes = wake as f64 * minutes;
    Ok(SleepMetrics {
        onset_time: period.onset_time,
        offset_time: period.offset_time,
        tst_minutes,
        waso_minutes,
        time_in_bed_minutes: tst_minutes + waso_minutes,
        efficiency: sleep as f64 / window.len() as f64,
    })
}

/// Detects periods, picks the primary one and computes its metrics.
pub fn primary_metrics(labels: &SleepWakeSeries, config: &PipelineConfig) -> Option<(SleepPeriod, SleepMetrics)> {
    let primary = select_primary(&detect_periods(labels, config))?;
    let metrics = compute_metrics(labels, &primary).expect("detected period lies within labels");
    Some((primary, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_config;
    use proptest::prelude::*;
    use Label::{Sleep as S, Wake as W};

    fn series(labels: Vec<Label>) -> SleepWakeSeries {
        let n = labels.len();
        SleepWakeSeries { labels, epoch_seconds: 30.0, start_times: (0..n).map(|i| i as f64 * 30.0).collect() }
    }

    fn build(parts: &[(Label, usize)]) -> Vec<Label> {
        parts.iter().flat_map(|&(l, n)| std::iter::repeat_n(l, n)).collect()
    }

    /// Epoch-by-epoch scanner with look-ahead window checks.
    fn reference_scan(labels: &[Label], on: usize, off: usize) -> Vec<(usize, usize)> {
        let n = labels.len();
        let all = |from: usize, len: usize, l: Label| from + len <= n && labels[from..from + len].iter().all(|x| *x == l);
        let mut out = Vec::new();
        let mut i = 0;
        let mut open: Option<usize> = None;
        let mut last_sleep = 0;
        while i < n {
            match open {
                None => {
                    if all(i, on, S) {
                        open = Some(i);
                        last_sleep = i;
                    }
                    i += 1;
                }
                Some(start) => {
                    if all(i, off, W) {
                        out.push((start, last_sleep));
                        open = None;
                        i += off;
                    } else {
                        if labels[i] == S {
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

    #[test]
    fn clean_run() {
        let labels = series(build(&[(W, 50), (S, 30), (W, 50)]));
        let p = detect_periods(&labels, &default_config());
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].onset_index, p[0].offset_index), (50, 79));
        assert_eq!((p[0].onset_time, p[0].offset_time), (1500.0, 79.0 * 30.0));
    }

    #[test]
    fn short_run_opens_nothing() {
        let labels = series(build(&[(W, 30), (S, 9), (W, 30)]));
        assert!(detect_periods(&labels, &default_config()).is_empty());
    }

    #[test]
    fn short_wake_does_not_split() {
        let labels = build(&[(S, 40), (W, 19), (S, 40)]);
        assert_eq!(reference_scan(&labels, 10, 20), vec![(0, 98)]);
        let p = detect_periods(&series(labels), &default_config());
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].onset_index, p[0].offset_index), (0, 98));
        assert_eq!(p[0].offset_index - p[0].onset_index + 1, 99);
    }

    #[test]
    fn long_wake_splits() {
        let labels = build(&[(S, 40), (W, 20), (S, 40), (W, 5)]);
        assert_eq!(detect_periods_with(&labels, 10, 20), vec![(0, 39), (60, 99)]);
    }

    #[test]
    fn primary_selection() {
        let p = |on: usize, off: usize| SleepPeriod { onset_index: on, offset_index: off, onset_time: 0.0, offset_time: 0.0 };
        assert_eq!(select_primary(&[p(0, 40), p(100, 200)]), Some(p(100, 200)));
        assert_eq!(select_primary(&[p(10, 60), p(500, 550)]), Some(p(10, 60)));
        assert_eq!(select_primary(&[]), None);
    }

    #[test]
    fn metrics_arithmetic() {
        let labels = series(build(&[(S, 10), (W, 4), (S, 6)]));
        let period = SleepPeriod { onset_index: 0, offset_index: 19, onset_time: 0.0, offset_time: 570.0 };
        let m = compute_metrics(&labels, &period).unwrap();
        assert_eq!((m.tst_minutes, m.waso_minutes, m.time_in_bed_minutes, m.efficiency), (8.0, 2.0, 10.0, 0.8));

        let labels = series(vec![S; 960]);
        let period = SleepPeriod { onset_index: 0, offset_index: 959, onset_time: 0.0, offset_time: 0.0 };
        let m = compute_metrics(&labels, &period).unwrap();
        assert_eq!((m.tst_minutes, m.waso_minutes, m.efficiency), (480.0, 0.0, 1.0));

        let alternating: Vec<Label> = (0..21).map(|i| if i % 2 == 0 { S } else { W }).collect();
        let labels = series(alternating);
        let period = SleepPeriod { onset_index: 0, offset_index: 20, onset_time: 0.0, offset_time: 0.0 };
        let m = compute_metrics(&labels, &period).unwrap();
        assert_eq!(m.waso_minutes, m.time_in_bed_minutes - m.tst_minutes);

        let bad = SleepPeriod { onset_index: 0, offset_index: 21, onset_time: 0.0, offset_time: 0.0 };
        assert!(matches!(compute_metrics(&labels, &bad), Err(Error::IndexOutOfRange { index: 21, len: 21 })));
    }

    #[test]
    fn exhaustive_short_sequences() {
        for bits in 0u32..(1 << 14) {
            let labels: Vec<Label> = (0..14).map(|i| if bits >> i & 1 == 1 { S } else { W }).collect();
            assert_eq!(detect_periods_with(&labels, 3, 5), reference_scan(&labels, 3, 5), "{bits:014b}");
        }
    }

    proptest! {
        #[test]
        fn periods_satisfy_rules(bits in proptest::collection::vec(any::<bool>(), 1..200)) {
            let labels: Vec<Label> = bits.iter().map(|b| if *b { S } else { W }).collect();
            let periods = detect_periods_with(&labels, 4, 6);
            prop_assert_eq!(&periods, &reference_scan(&labels, 4, 6));
            let mut prev_end = None;
            for &(on, off) in &periods {
                prop_assert!(on <= off);
                prop_assert_eq!(labels[on], S);
                prop_assert_eq!(labels[off], S);
                prop_assert!(labels[on..on + 4].iter().all(|l| *l == S));
                let interior = runs(&labels[on..=off]);
                prop_assert!(interior.iter().all(|r| r.label == S || r.len < 6));
                if let Some(e) = prev_end {
                    prop_assert!(on > e);
                }
                prev_end = Some(off);
            }
        }

        #[test]
        fn metrics_identity(bits in proptest::collection::vec(any::<bool>(), 1..300), epoch in 1.0f64..120.0) {
            let labels: Vec<Label> = bits.iter().map(|b| if *b { S } else { W }).collect();
            let n = labels.len();
            let s = SleepWakeSeries { labels, epoch_seconds: epoch, start_times: vec![0.0; n] };
            let period = SleepPeriod { onset_index: 0, offset_index: n - 1, onset_time: 0.0, offset_time: 0.0 };
            let m = compute_metrics(&s, &period).unwrap();
            prop_assert_eq!(m.tst_minutes + m.waso_minutes, m.time_in_bed_minutes);
            prop_assert!((0.0..=1.0).contains(&m.efficiency));
        }
    }
}
