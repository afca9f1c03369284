mod common;

use actisleep::calib::{grid_search, sensitivity_sweep, threshold_grid};
use actisleep::eval::{evaluate_corpus, NightOutcome};
use actisleep::periods::{detect_periods, primary_metrics};
use actisleep::pipeline::{label_scores, run_pipeline};
use actisleep::synth::{generate, nightly_specs, SynthSpec};
use actisleep::{AccelSample, Annotation, Execution, Label, PipelineConfig, Recording, TimePoint};
use common::{random_spec, reference_pipeline, reference_scan};

fn corpus(nights: usize, seed: u64) -> Vec<(Recording, Annotation)> {
    let base = SynthSpec { seed, awakenings: vec![(10.0 * 3600.0, 480.0)], ..SynthSpec::default() };
    nightly_specs(&base, nights, 45.0)
        .unwrap()
        .iter()
        .map(|s| generate(s).unwrap())
        .collect()
}

#[test]
fn batch_matches_straight_line_reference() {
    let config = PipelineConfig::default();
    for seed in 0..100 {
        let (rec, _) = generate(&random_spec(seed)).unwrap();
        let (scores, labels) = run_pipeline(&rec, &config).unwrap();
        let reference = reference_pipeline(&rec, 30.0, 0.5, config.threshold());
        assert_eq!(scores.valid_mask, reference.valid, "seed {seed}");
        for (a, b) in scores.activity.iter().zip(&reference.activity) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "seed {seed}: {a} vs {b}");
        }
        for (a, b) in scores.contextual.iter().zip(&reference.contextual) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "seed {seed}");
        }
        for (a, b) in scores.normalized.iter().zip(&reference.normalized) {
            assert!((a - b).abs() <= 1e-9, "seed {seed}");
        }
        // labels may only differ where a score sits on the threshold within rounding
        for (i, (a, b)) in labels.labels.iter().zip(&reference.labels).enumerate() {
            if a != b {
                assert!((scores.normalized[i] - config.threshold()).abs() < 1e-9, "seed {seed} epoch {i}");
            }
        }
    }
}

#[test]
fn integer_upsampling_keeps_labels() {
    // repeating every 1 Hz sample k times at k Hz scales activity by k
    let config = PipelineConfig::default();
    let spec = SynthSpec { seed: 9, ..SynthSpec::default() };
    let (rec, _) = generate(&spec).unwrap();
    let (base_scores, base) = run_pipeline(&rec, &config).unwrap();
    for k in [2usize, 4, 5] {
        let samples: Vec<AccelSample> = rec
            .samples()
            .iter()
            .flat_map(|s| (0..k).map(move |j| AccelSample { timestamp: s.timestamp + j as f64 / k as f64, ..*s }))
            .collect();
        let up = Recording::new("up", samples, Some(k as f64)).unwrap();
        let (scores, labels) = run_pipeline(&up, &config).unwrap();
        assert_eq!(labels.labels, base.labels, "k = {k}");
        for (a, b) in scores.normalized.iter().zip(&base_scores.normalized) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn raising_the_threshold_only_adds_sleep() {
    let config = PipelineConfig::default();
    for seed in 0..20 {
        let (rec, _) = generate(&random_spec(500 + seed)).unwrap();
        let (scores, _) = run_pipeline(&rec, &config).unwrap();
        let mut previous: Option<Vec<Label>> = None;
        for theta in threshold_grid(-0.4, 1.0, 0.05).unwrap() {
            let labels = label_scores(&scores, theta, 30.0).labels;
            if let Some(prev) = &previous {
                for (p, l) in prev.iter().zip(&labels) {
                    assert!(!(p.is_sleep() && !l.is_sleep()), "seed {seed}, theta {theta}");
                }
            }
            previous = Some(labels);
        }
    }
}

#[test]
fn sweep_agrees_with_direct_evaluation() {
    let nights = corpus(6, 21);
    let base = PipelineConfig::default();
    let grid = threshold_grid(-0.4, 1.0, 0.05).unwrap();
    let rows = sensitivity_sweep(&nights, &grid, &base, Execution::Sequential).unwrap();
    for row in &rows {
        let config = base.clone().with_threshold(row.theta).unwrap();
        let mut tst = 0.0;
        let mut waso = 0.0;
        for (rec, ann) in &nights {
            let (_, labels) = run_pipeline(rec, &config).unwrap();
            match primary_metrics(&labels, &config) {
                Some((_, m)) => {
                    tst += (m.tst_minutes - ann.tst_minutes.unwrap()).abs();
                    waso += (m.waso_minutes - ann.waso_minutes.unwrap()).abs();
                }
                None => {
                    tst += ann.tst_minutes.unwrap();
                    waso += ann.waso_minutes.unwrap();
                }
            }
        }
        let n = nights.len() as f64;
        assert!((row.tst_mae - tst / n).abs() < 1e-9, "theta {}", row.theta);
        assert!((row.waso_mae.unwrap() - waso / n).abs() < 1e-9, "theta {}", row.theta);
    }
    let result = grid_search(&nights, -0.4, 1.0, 0.05, &base, Execution::Sequential).unwrap();
    let best = rows.iter().map(|r| r.tst_mae).fold(f64::INFINITY, f64::min);
    let chosen = rows.iter().find(|r| r.theta == result.selected_threshold).unwrap();
    assert!(chosen.tst_mae - best <= 1e-9);
    assert!(result.tie_trace.contains(&result.selected_threshold));
    assert!(result.tie_trace.iter().all(|t| *t >= result.selected_threshold || {
        let r = rows.iter().find(|r| r.theta == *t).unwrap();
        r.waso_mae > chosen.waso_mae
    }));
}

#[test]
fn flat_recordings_are_undetected() {
    let nights: Vec<(Recording, Annotation)> = (0..3)
        .map(|k| {
            let (rec, ann) = generate(&SynthSpec { id: format!("flat{k}"), seed: k, ..SynthSpec::default() }).unwrap();
            let flat: Vec<AccelSample> =
                rec.samples().iter().map(|s| AccelSample::new(s.timestamp, 3.0, 0.0, 0.0)).collect();
            (Recording::new(rec.id(), flat, Some(1.0)).unwrap(), ann)
        })
        .collect();
    let eval = evaluate_corpus(&nights, &PipelineConfig::default(), Execution::Sequential).unwrap();
    assert!(eval.report.is_none());
    assert_eq!(eval.undetected, vec!["flat0", "flat1", "flat2"]);
    for outcome in &eval.outcomes {
        assert!(matches!(outcome, NightOutcome::Undetected { degenerate_spread: true, .. }));
    }
    let calib = grid_search(&nights, -0.4, 1.0, 0.05, &PipelineConfig::default(), Execution::Sequential).unwrap();
    assert!(calib.grid.iter().all(|r| r.undetected == 3));
    assert_eq!(calib.selected_threshold, -0.4);
}

#[test]
fn short_awakening_stays_inside_the_period() {
    let config = PipelineConfig::default();
    let spec = SynthSpec { wake_noise: 0.0, sleep_noise: 0.0, awakenings: vec![(10.0 * 3600.0, 480.0)], ..SynthSpec::default() };
    let (rec, truth) = generate(&spec).unwrap();
    let (_, labels) = run_pipeline(&rec, &config).unwrap();
    let periods: Vec<(usize, usize)> = detect_periods(&labels, &config).iter().map(|p| (p.onset_index, p.offset_index)).collect();
    assert_eq!(periods, reference_scan(&labels.labels, 10, 20));
    assert_eq!(periods.len(), 1);
    let (_, m) = primary_metrics(&labels, &config).unwrap();
    assert!(m.waso_minutes > 0.0);
    assert!((m.waso_minutes - truth.waso_minutes.unwrap()).abs() <= 5.0, "waso {}", m.waso_minutes);
    assert_eq!(m.time_in_bed_minutes, m.tst_minutes + m.waso_minutes);
}

#[test]
fn long_awakening_splits_the_night() {
    // 15 min of wake is 30 epochs, past the 20-epoch closing run
    let config = PipelineConfig::default();
    let spec = SynthSpec { wake_noise: 0.0, sleep_noise: 0.0, awakenings: vec![(10.0 * 3600.0, 900.0)], ..SynthSpec::default() };
    let (rec, _) = generate(&spec).unwrap();
    let (_, labels) = run_pipeline(&rec, &config).unwrap();
    let periods = detect_periods(&labels, &config);
    assert_eq!(periods.len(), 2);
    let expected: Vec<(usize, usize)> = periods.iter().map(|p| (p.onset_index, p.offset_index)).collect();
    assert_eq!(expected, reference_scan(&labels.labels, 10, 20));
    // the later part of the night is longer and becomes primary
    let (primary, _) = primary_metrics(&labels, &config).unwrap();
    assert_eq!(primary, periods[1]);
}

#[test]
fn tst_grows_with_threshold() {
    let config = PipelineConfig::default();
    for (rec, _) in corpus(3, 40) {
        let (scores, _) = run_pipeline(&rec, &config).unwrap();
        let mut last = 0.0;
        for theta in threshold_grid(-0.4, 1.0, 0.05).unwrap() {
            let labels = label_scores(&scores, theta, 30.0);
            let total_sleep = labels.sleep_epochs() as f64 * 0.5;
            assert!(total_sleep >= last);
            last = total_sleep;
        }
    }
}

#[test]
fn execution_modes_agree_and_repeat() {
    let nights = corpus(8, 77);
    let config = PipelineConfig::default();
    let seq = evaluate_corpus(&nights, &config, Execution::Sequential).unwrap();
    let par = evaluate_corpus(&nights, &config, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    assert_eq!(seq, evaluate_corpus(&nights, &config, Execution::Parallel).unwrap());
    let a = grid_search(&nights, -0.4, 1.0, 0.05, &config, Execution::Sequential).unwrap();
    let b = grid_search(&nights, -0.4, 1.0, 0.05, &config, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(corpus(8, 77), nights);
    let onset = seq.report.unwrap().onset;
    assert!(onset.mean < 5.0, "onset error {}", onset.mean);
}

#[test]
fn wrap_mode_timing_with_time_of_day_annotations() {
    let config = PipelineConfig::default();
    let (rec, truth) = generate(&SynthSpec::default()).unwrap();
    let tod = |p: TimePoint| TimePoint::TimeOfDay(p.minutes_of_day() * 60.0);
    let ann = Annotation { onset: tod(truth.onset), offset: tod(truth.offset), ..truth.clone() };
    let dated = evaluate_corpus(&[(rec.clone(), truth)], &config, Execution::Sequential).unwrap();
    let wrapped = evaluate_corpus(&[(rec, ann)], &config, Execution::Sequential).unwrap();
    let (d, w) = (dated.report.unwrap(), wrapped.report.unwrap());
    assert!((d.onset.mean - w.onset.mean).abs() < 1e-6);
    assert!((d.offset.mean - w.offset.mean).abs() < 1e-6);
}
