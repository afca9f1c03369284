//! CSV ingestion and epoch segmentation.

pub mod mmash;

use std::io::Read;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};
use crate::model::{AccelSample, Annotation, EpochActivity, PipelineConfig, Recording, TimePoint};
use crate::pipeline::magnitude;

/// A column addressed by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl ColumnRef {
    fn resolve(&self, headers: &csv::StringRecord) -> Result<usize> {
        match self {
            ColumnRef::Name(name) => headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingColumn(name.clone())),
            ColumnRef::Index(i) if *i < headers.len() => Ok(*i),
            ColumnRef::Index(i) => Err(Error::MissingColumn(format!("#{i}"))),
        }
    }
}

impl From<&str> for ColumnRef {
    fn from(name: &str) -> Self {
        ColumnRef::Name(name.to_string())
    }
}

impl From<usize> for ColumnRef {
    fn from(index: usize) -> Self {
        ColumnRef::Index(index)
    }
}

/// How a row's timestamp is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeColumns {
    /// Real-valued seconds since the Unix epoch.
    UnixSeconds(ColumnRef),
    /// ISO-8601 date-time; naive values are taken as UTC.
    Iso8601(ColumnRef),
    /// A day ordinal (1 = `base_date`) plus a clock time, as in MMASH.
    DayTime { day: ColumnRef, time: ColumnRef, base_date: NaiveDate },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub time: TimeColumns,
    pub x: ColumnRef,
    pub y: ColumnRef,
    pub z: ColumnRef,
    pub delimiter: u8,
    /// Backwards steps up to this many seconds are clamped instead of rejected.
    pub jitter_tolerance: f64,
    /// Declared sampling rate; inferred from the data when `None`.
    pub nominal_rate_hz: Option<f64>,
}

impl CsvSchema {
    pub fn new(time: TimeColumns, x: impl Into<ColumnRef>, y: impl Into<ColumnRef>, z: impl Into<ColumnRef>) -> Self {
        Self {
            time,
            x: x.into(),
            y: y.into(),
            z: z.into(),
            delimiter: b',',
            jitter_tolerance: 0.0,
            nominal_rate_hz: None,
        }
    }

    /// `timestamp,x,y,z` with Unix-second timestamps.
    pub fn unix() -> Self {
        Self::new(TimeColumns::UnixSeconds("timestamp".into()), "x", "y", "z")
    }

    /// `timestamp,x,y,z` with ISO-8601 timestamps.
    pub fn iso8601() -> Self {
        Self::new(TimeColumns::Iso8601("timestamp".into()), "x", "y", "z")
    }

    /// MMASH `Actigraph.csv` layout.
    pub fn mmash(base_date: NaiveDate) -> Self {
        Self::new(
            TimeColumns::DayTime { day: "day".into(), time: "time".into(), base_date },
            "Axis1",
            "Axis2",
            "Axis3",
        )
    }

    pub fn with_delimiter(mut self, delimiter: u8) -> Self {
        self.delimiter = delimiter;
        self
    }

    pub fn with_rate(mut self, rate_hz: f64) -> Self {
        self.nominal_rate_hz = Some(rate_hz);
        self
    }

    pub fn with_jitter_tolerance(mut self, seconds: f64) -> Self {
        self.jitter_tolerance = seconds;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.x == self.y || self.y == self.z || self.x == self.z {
            return Err(Error::InvalidConfig("x, y and z columns must be distinct".into()));
        }
        if !(self.jitter_tolerance >= 0.0) {
            return Err(Error::InvalidConfig("jitter tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRecording {
    pub recording: Recording,
    /// Data rows dropped because a field failed to parse.
    pub skipped_rows: usize,
}

enum ResolvedTime {
    Unix(usize),
    Iso(usize),
    DayTime { day: usize, time: usize, base: f64 },
}

impl ResolvedTime {
    fn parse(&self, row: &csv::StringRecord) -> Option<f64> {
        match *self {
            ResolvedTime::Unix(c) => row.get(c)?.trim().parse::<f64>().ok().filter(|t| t.is_finite()),
            ResolvedTime::Iso(c) => parse_iso8601(row.get(c)?),
            ResolvedTime::DayTime { day, time, base } => {
                let day: f64 = row.get(day)?.trim().parse().ok()?;
                if day.fract() != 0.0 || day < 1.0 {
                    return None;
                }
                let clock = parse_clock(row.get(time)?)?;
                Some(base + (day - 1.0) * 86_400.0 + clock)
            }
        }
    }
}

/// Reads an accelerometer CSV with a header row into a [`Recording`].
pub fn parse_recording<R: Read>(source: R, schema: &CsvSchema, id: &str) -> Result<ParsedRecording> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let time = match &schema.time {
        TimeColumns::UnixSeconds(c) => ResolvedTime::Unix(c.resolve(&headers)?),
        TimeColumns::Iso8601(c) => ResolvedTime::Iso(c.resolve(&headers)?),
        TimeColumns::DayTime { day, time, base_date } => ResolvedTime::DayTime {
            day: day.resolve(&headers)?,
            time: time.resolve(&headers)?,
            base: base_date.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp() as f64,
        },
    };
    let (xc, yc, zc) = (schema.x.resolve(&headers)?, schema.y.resolve(&headers)?, schema.z.resolve(&headers)?);

    let mut samples = Vec::new();
    let mut skipped_rows = 0;
    let mut record = csv::StringRecord::new();
    let mut row = 0;
    while reader.read_record(&mut record)? {
        row += 1;
        let axis = |c: usize| record.get(c).and_then(|v| v.trim().parse::<f64>().ok()).filter(|v| v.is_finite());
        let (Some(mut t), Some(x), Some(y), Some(z)) = (time.parse(&record), axis(xc), axis(yc), axis(zc)) else {
            skipped_rows += 1;
            continue;
        };
        if let Some(prev) = samples.last().map(|s: &AccelSample| s.timestamp) {
            if t < prev {
                if prev - t > schema.jitter_tolerance {
                    return Err(Error::NonMonotonicTime { row, previous: prev, current: t });
                }
                t = prev;
            }
        }
        samples.push(AccelSample::new(t, x, y, z));
    }
    if samples.is_empty() {
        return Err(Error::EmptyRecording(id.to_string()));
    }
    let recording = Recording::new(id, samples, schema.nominal_rate_hz)?;
    Ok(ParsedRecording { recording, skipped_rows })
}

/// Parses `HH:MM`, `HH:MM:SS` or `HH:MM:SS.fff` into seconds since midnight.
pub fn parse_clock(value: &str) -> Option<f64> {
    let mut parts = value.trim().split(':');
    let h: u32 = parts.next()?.parse().ok()?;
    let m: u32 = parts.next()?.parse().ok()?;
    let s: f64 = match parts.next() {
        Some(s) => s.parse().ok()?,
        None => 0.0,
    };
    if parts.next().is_some() || h > 23 || m > 59 || !(0.0..60.0).contains(&s) {
        return None;
    }
    Some(f64::from(h * 3600 + m * 60) + s)
}

/// Parses an ISO-8601 date-time into Unix seconds; naive values are UTC.
pub fn parse_iso8601(value: &str) -> Option<f64> {
    let value = value.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(value) {
        return Some(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9);
    }
    const FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];
    FORMATS.iter().find_map(|f| {
        NaiveDateTime::parse_from_str(value, f).ok().map(|dt| {
            let dt = dt.and_utc();
            dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9
        })
    })
}

/// A dated ISO timestamp, or a bare clock time.
pub fn parse_time_point(value: &str) -> Option<TimePoint> {
    if value.contains('-') {
        parse_iso8601(value).map(TimePoint::Dated)
    } else {
        parse_clock(value).map(TimePoint::TimeOfDay)
    }
}

/// Reads `id,onset,offset[,tst_min,waso_min,efficiency_pct]` annotation rows.
///
/// Efficiency values at or below 1 are read as fractions and scaled to percent.
pub fn parse_annotations<R: Read>(source: R) -> Result<Vec<Annotation>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let required = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let (id_col, onset_col, offset_col) = (required("id")?, required("onset")?, required("offset")?);
    let optional = [("tst_min", find("tst_min")), ("waso_min", find("waso_min")), ("efficiency_pct", find("efficiency_pct"))];

    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let time = |col: usize| {
            let raw = record.get(col).unwrap_or("");
            parse_time_point(raw).ok_or_else(|| Error::BadTimeFormat { row, value: raw.to_string() })
        };
        let onset = time(onset_col)?;
        let offset = time(offset_col)?;
        let mut numbers = [None; 3];
        for (slot, (name, col)) in numbers.iter_mut().zip(optional) {
            let raw = col.and_then(|c| record.get(c)).unwrap_or("");
            if raw.is_empty() {
                continue;
            }
            let v: f64 = raw.parse().ok().filter(|v: &f64| v.is_finite() && *v >= 0.0).ok_or_else(|| Error::BadField {
                row,
                column: name.to_string(),
                value: raw.to_string(),
            })?;
            *slot = Some(v);
        }
        let [tst_minutes, waso_minutes, efficiency] = numbers;
        out.push(Annotation {
            id: record.get(id_col).unwrap_or("").to_string(),
            onset,
            offset,
            tst_minutes,
            waso_minutes,
            efficiency_pct: efficiency.map(|e| if e <= 1.0 { e * 100.0 } else { e }),
        });
    }
    Ok(out)
}

// Absorbs rounding in `t - origin` for large Unix times (~30 us at 30 s epochs).
const BUCKET_EPS: f64 = 1e-6;

/// Epoch ordinal of a timestamp on the grid anchored at `origin`.
#[inline]
pub(crate) fn epoch_of(timestamp: f64, origin: f64, epoch_seconds: f64) -> usize {
    (((timestamp - origin) / epoch_seconds) + BUCKET_EPS).floor().max(0.0) as usize
}

/// Minimum sample count for a valid epoch.
pub(crate) fn min_valid_count(config: &PipelineConfig, rate_hz: f64) -> usize {
    let expected = (rate_hz * config.epoch_seconds()).round();
    ((config.validity_fraction() * expected).ceil() as usize).max(1)
}

/// Buckets samples into epochs of `epoch_seconds` anchored at the first sample.
///
/// Interior epochs without samples are kept as invalid zero-activity epochs.
/// The final epoch is dropped when it is underfilled, unless it is the only one.
pub fn segment_epochs(recording: &Recording, config: &PipelineConfig) -> Result<Vec<EpochActivity>> {
    let samples = recording.samples();
    if samples.is_empty() {
        return Err(Error::EmptyRecording(recording.id().to_string()));
    }
    let origin = samples[0].timestamp;
    let t_e = config.epoch_seconds();
    let last = epoch_of(samples[samples.len() - 1].timestamp, origin, t_e);
    let mut sums = vec![0.0; last + 1];
    let mut counts = vec![0usize; last + 1];
    for s in samples {
        let k = epoch_of(s.timestamp, origin, t_e);
        sums[k] += magnitude(s);
        counts[k] += 1;
    }
    let floor = min_valid_count(config, recording.nominal_rate_hz());
    let mut epochs: Vec<EpochActivity> = sums
        .into_iter()
        .zip(counts)
        .enumerate()
        .map(|(index, (activity, sample_count))| EpochActivity {
            index,
            start_time: origin + index as f64 * t_e,
            activity,
            sample_count,
            valid: sample_count >= floor,
        })
        .collect();
    if epochs.len() > 1 && !epochs[epochs.len() - 1].valid {
        epochs.pop();
    }
    Ok(epochs)
}
