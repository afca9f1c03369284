//! Loader for the public MMASH dataset layout (`user_N/Actigraph.csv` plus
//! `user_N/sleep.csv`). The dataset is not redistributable; these functions
//! are only exercised when a local copy is supplied.

use std::fs::File;
use std::path::Path;

use chrono::NaiveDate;

use super::{parse_clock, parse_recording, CsvSchema};
use crate::error::{Error, Result};
use crate::model::{Annotation, Recording, TimePoint};

/// Padding around the annotated in-bed interval when cropping a night.
pub const NIGHT_MARGIN_SECONDS: f64 = 6.0 * 3600.0;

/// Calendar date assigned to MMASH day 1. The dataset only carries day ordinals.
pub fn base_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date")
}

#[derive(Debug, Clone)]
pub struct SleepRow {
    pub in_bed: f64,
    pub out_bed: f64,
    pub onset: f64,
    pub efficiency_pct: Option<f64>,
    pub tst_minutes: Option<f64>,
    pub waso_minutes: Option<f64>,
}

fn day_time(base: f64, day: &str, time: &str) -> Option<f64> {
    let day: f64 = day.trim().parse().ok()?;
    (day >= 1.0 && day.fract() == 0.0).then_some(())?;
    Some(base + (day - 1.0) * 86_400.0 + parse_clock(time)?)
}

/// Parses MMASH `sleep.csv`.
pub fn parse_sleep_rows<R: std::io::Read>(source: R) -> Result<Vec<SleepRow>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (ib_d, ib_t) = (col("In Bed Date")?, col("In Bed Time")?);
    let (ob_d, ob_t) = (col("Out Bed Date")?, col("Out Bed Time")?);
    let (on_d, on_t) = (col("Onset Date")?, col("Onset Time")?);
    let eff = col("Efficiency").ok();
    let tst = col("Total Sleep Time (TST)").ok();
    let waso = col("Wake After Sleep Onset (WASO)").ok();
    let base = base_date().and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp() as f64;

    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let at = |d: usize, t: usize| {
            day_time(base, field(d), field(t)).ok_or_else(|| Error::BadTimeFormat {
                row,
                value: format!("{} {}", field(d), field(t)),
            })
        };
        let number = |c: Option<usize>| c.and_then(|c| field(c).parse::<f64>().ok()).filter(|v| v.is_finite());
        let mut out_bed = at(ob_d, ob_t)?;
        let in_bed = at(ib_d, ib_t)?;
        if out_bed <= in_bed {
            out_bed += 86_400.0;
        }
        rows.push(SleepRow {
            in_bed,
            out_bed,
            onset: at(on_d, on_t)?,
            efficiency_pct: number(eff).map(|e| if e <= 1.0 { e * 100.0 } else { e }),
            tst_minutes: number(tst),
            waso_minutes: number(waso),
        });
    }
    Ok(rows)
}

/// Loads every annotated night of one MMASH user directory.
///
/// Each night is the accelerometer recording cropped to the in-bed interval
/// padded by [`NIGHT_MARGIN_SECONDS`] on both sides. Ground-truth onset is the
/// annotated sleep onset and offset is the out-of-bed time.
pub fn load_user(dir: &Path) -> Result<Vec<(Recording, Annotation)>> {
    let user = dir.file_name().and_then(|n| n.to_str()).unwrap_or("user").to_string();
    let parsed = parse_recording(
        File::open(dir.join("Actigraph.csv"))?,
        &CsvSchema::mmash(base_date()).with_rate(1.0),
        &user,
    )?;
    let rows = parse_sleep_rows(File::open(dir.join("sleep.csv"))?)?;
    let many = rows.len() > 1;
    let mut nights = Vec::new();
    for (k, row) in rows.into_iter().enumerate() {
        let id = if many { format!("{user}#{}", k + 1) } else { user.clone() };
        let Some(window) = parsed
            .recording
            .window(row.in_bed - NIGHT_MARGIN_SECONDS, row.out_bed + NIGHT_MARGIN_SECONDS)
        else {
            continue;
        };
        let recording = Recording::new(&id, window.into_samples(), Some(1.0))?;
        nights.push((
            recording,
            Annotation {
                id,
                onset: TimePoint::Dated(row.onset),
                offset: TimePoint::Dated(row.out_bed),
                tst_minutes: row.tst_minutes,
                waso_minutes: row.waso_minutes,
                efficiency_pct: row.efficiency_pct,
            },
        ));
    }
    Ok(nights)
}

/// Loads all `user_*` directories under `root` (searching `root/DataPaper` too).
pub fn load_corpus(root: &Path) -> Result<Vec<(Recording, Annotation)>> {
    let root = if root.join("DataPaper").is_dir() { root.join("DataPaper") } else { root.to_path_buf() };
    let mut dirs: Vec<_> = std::fs::read_dir(&root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join("Actigraph.csv").is_file() && p.join("sleep.csv").is_file())
        .collect();
    dirs.sort();
    let mut corpus = Vec::new();
    for dir in dirs {
        corpus.extend(load_user(&dir)?);
    }
    Ok(corpus)
}
