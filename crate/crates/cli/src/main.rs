mod output;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use actisleep::calib::grid_search;
use actisleep::eval::{evaluate_corpus, NightOutcome, Summary};
use actisleep::ingest::{self, mmash, ColumnRef, CsvSchema, TimeColumns};
use actisleep::periods::primary_metrics;
use actisleep::pipeline::run_pipeline;
use actisleep::stream::stream_recording;
use actisleep::synth::{generate, nightly_specs, SynthSpec};
use actisleep::{Annotation, Execution, PipelineConfig, Recording, ScoreSeries, SleepWakeSeries};

use output::{emit, iso};

#[derive(Parser)]
#[command(name = "actisleep", version, about = "Sleep/wake scoring from raw wrist accelerometry")]
struct Cli {
    /// Run corpus-level work on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score one recording and report its primary sleep period.
    Analyze(AnalyzeArgs),
    /// Compare detected periods against annotations over a corpus.
    Evaluate(EvaluateArgs),
    /// Grid-search the classification threshold over a corpus.
    Calibrate(CalibrateArgs),
    /// Write seeded synthetic recordings and their annotations.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaKind {
    /// `timestamp,x,y,z` with Unix seconds.
    Unix,
    /// `timestamp,x,y,z` with ISO-8601 timestamps.
    Iso,
    /// MMASH `Actigraph.csv` (day ordinal + clock time, Axis1..3).
    Mmash,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long, value_enum, default_value = "unix")]
    schema: SchemaKind,
    /// Timestamp column (name or 0-based index).
    #[arg(long)]
    time_col: Option<String>,
    #[arg(long)]
    x_col: Option<String>,
    #[arg(long)]
    y_col: Option<String>,
    #[arg(long)]
    z_col: Option<String>,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Declared sampling rate; inferred from timestamps when omitted.
    #[arg(long)]
    rate_hz: Option<f64>,
    /// Backwards timestamp steps up to this many seconds are clamped.
    #[arg(long, default_value_t = 0.0)]
    jitter_tolerance: f64,
    /// Date of day 1 for the mmash schema.
    #[arg(long, default_value = "2000-01-01")]
    base_date: NaiveDate,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, default_value_t = 30.0)]
    epoch_seconds: f64,
    #[arg(long, default_value_t = -0.05, allow_hyphen_values = true)]
    threshold: f64,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Recording id; defaults to the file stem.
    #[arg(long)]
    id: Option<String>,
    #[command(flatten)]
    io: InputArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Use the bounded-memory streaming scorer.
    #[arg(long)]
    stream: bool,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch score trajectory CSV.
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Args)]
struct CorpusArgs {
    /// Directory of recording CSVs (one night per file, id = file stem), or
    /// an MMASH root with `--schema mmash`.
    #[arg(long)]
    corpus: PathBuf,
    /// `id,onset,offset[,tst_min,waso_min,efficiency_pct]`; not used with `--schema mmash`.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Skip recordings without an annotation instead of failing.
    #[arg(long)]
    allow_missing: bool,
    #[command(flatten)]
    io: InputArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, default_value_t = 30.0)]
    epoch_seconds: f64,
    #[arg(long, default_value_t = -0.4, allow_hyphen_values = true)]
    grid_min: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    grid_max: f64,
    #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
    grid_step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    nights: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    rate_hz: f64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Start of the first recording (RFC 3339).
    #[arg(long, default_value = "2024-01-01T16:00:00Z")]
    start: String,
    #[arg(long, default_value_t = 24.0)]
    duration_hours: f64,
    /// Planted onset, hours after the start.
    #[arg(long, default_value_t = 7.0)]
    onset_hours: f64,
    #[arg(long, default_value_t = 8.0)]
    sleep_hours: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    wake_level: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    wake_noise: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    sleep_level: f64,
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    sleep_noise: f64,
    #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
    burst_level: f64,
    /// Length of one awakening at the middle of the night; 0 for none.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    awakening_minutes: f64,
    /// Seeded per-night shift of the sleep window, up to this many minutes either way.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    jitter_minutes: f64,
}

fn column(value: Option<&String>, default: &str) -> ColumnRef {
    match value {
        Some(v) => match v.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(v.clone()),
        },
        None => ColumnRef::Name(default.to_string()),
    }
}

impl InputArgs {
    fn schema(&self) -> Result<CsvSchema> {
        if !self.delimiter.is_ascii() {
            bail!("delimiter must be a single ASCII character");
        }
        let (x, y, z) = match self.schema {
            SchemaKind::Mmash => ("Axis1", "Axis2", "Axis3"),
            _ => ("x", "y", "z"),
        };
        let time = match self.schema {
            SchemaKind::Unix => TimeColumns::UnixSeconds(column(self.time_col.as_ref(), "timestamp")),
            SchemaKind::Iso => TimeColumns::Iso8601(column(self.time_col.as_ref(), "timestamp")),
            SchemaKind::Mmash => TimeColumns::DayTime { day: "day".into(), time: "time".into(), base_date: self.base_date },
        };
        let mut schema = CsvSchema::new(time, column(self.x_col.as_ref(), x), column(self.y_col.as_ref(), y), column(self.z_col.as_ref(), z))
            .with_delimiter(self.delimiter as u8)
            .with_jitter_tolerance(self.jitter_tolerance);
        if let Some(rate) = self.rate_hz {
            schema = schema.with_rate(rate);
        }
        Ok(schema)
    }

    fn read(&self, path: &Path, id: &str) -> Result<Recording> {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let parsed = ingest::parse_recording(file, &self.schema()?, id).with_context(|| format!("cannot read {}", path.display()))?;
        if parsed.skipped_rows > 0 {
            eprintln!("warning: {}: skipped {} malformed rows", path.display(), parsed.skipped_rows);
        }
        Ok(parsed.recording)
    }
}

impl ConfigArgs {
    fn build(&self) -> Result<PipelineConfig> {
        Ok(PipelineConfig::default().with_epoch_seconds(self.epoch_seconds)?.with_threshold(self.threshold)?)
    }
}

fn config_echo(config: &PipelineConfig) -> Value {
    json!({
        "epoch_seconds": config.epoch_seconds(),
        "threshold": config.threshold(),
        "context_weights": config.context_weights(),
        "onset_run_min": config.onset_run_minutes(),
        "offset_run_min": config.offset_run_minutes(),
        "validity_fraction": config.validity_fraction(),
        "quantiles": [config.lower_quantile(), config.upper_quantile()],
    })
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "recording".into())
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let config = args.config.build()?;
    let id = args.id.clone().unwrap_or_else(|| file_stem(&args.input));
    let recording = args.io.read(&args.input, &id)?;
    let (scores, labels, resources) = if args.stream {
        let out = stream_recording(&recording, &config)?;
        (out.scores, out.labels, Some(out.resources))
    } else {
        let (scores, labels) = run_pipeline(&recording, &config)?;
        (scores, labels, None)
    };
    let mut report = json!({
        "id": id,
        "mode": if args.stream { "stream" } else { "batch" },
        "epochs": scores.len(),
        "degenerate_spread": scores.degenerate_spread,
        "config": config_echo(&config),
    });
    let fields = match primary_metrics(&labels, &config) {
        Some((_, m)) => json!({
            "undetected": false,
            "onset": iso(m.onset_time),
            "offset": iso(m.offset_time),
            "tst_min": m.tst_minutes,
            "waso_min": m.waso_minutes,
            "tib_min": m.time_in_bed_minutes,
            "efficiency": m.efficiency,
        }),
        None => json!({
            "undetected": true,
            "onset": null,
            "offset": null,
            "tst_min": null,
            "waso_min": null,
            "tib_min": null,
            "efficiency": null,
        }),
    };
    report.as_object_mut().unwrap().extend(fields.as_object().unwrap().clone());
    if let Some(r) = resources {
        report["stream_resources"] = serde_json::to_value(r)?;
    }
    if let Some(path) = &args.scores {
        write_scores(path, &scores, &labels)?;
    }
    emit(report, args.out.as_deref())
}

fn write_scores(path: &Path, scores: &ScoreSeries, labels: &SleepWakeSeries) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "epoch,start_time,activity,smoothed,contextual,normalized,label,valid")?;
    for i in 0..scores.len() {
        writeln!(
            w,
            "{i},{},{},{},{},{},{},{}",
            iso(scores.start_times[i]),
            scores.activity[i],
            scores.smoothed[i],
            scores.contextual[i],
            scores.normalized[i],
            labels.labels[i].as_str(),
            u8::from(scores.valid_mask[i]),
        )?;
    }
    w.flush()?;
    Ok(())
}

fn load_corpus(args: &CorpusArgs) -> Result<Vec<(Recording, Annotation)>> {
    if !args.corpus.is_dir() {
        bail!("corpus directory {} does not exist", args.corpus.display());
    }
    if let SchemaKind::Mmash = args.io.schema {
        let corpus = mmash::load_corpus(&args.corpus).with_context(|| format!("cannot load MMASH corpus {}", args.corpus.display()))?;
        if corpus.is_empty() {
            bail!("no MMASH nights found under {}", args.corpus.display());
        }
        return Ok(corpus);
    }
    let Some(ann_path) = &args.annotations else {
        bail!("--annotations is required unless --schema mmash");
    };
    let file = File::open(ann_path).with_context(|| format!("cannot open {}", ann_path.display()))?;
    let mut annotations = BTreeMap::new();
    for ann in ingest::parse_annotations(file).with_context(|| format!("cannot read {}", ann_path.display()))? {
        if annotations.contains_key(&ann.id) {
            bail!("duplicate annotation id {:?} in {}", ann.id, ann_path.display());
        }
        annotations.insert(ann.id.clone(), ann);
    }

    let mut paths: Vec<PathBuf> = fs::read_dir(&args.corpus)
        .with_context(|| format!("cannot list {}", args.corpus.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .filter(|p| p.canonicalize().ok() != ann_path.canonicalize().ok())
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no recording CSVs found in {}", args.corpus.display());
    }
    let mut corpus = Vec::new();
    let mut missing = Vec::new();
    for path in paths {
        let id = file_stem(&path);
        match annotations.remove(&id) {
            Some(ann) => corpus.push((args.io.read(&path, &id)?, ann)),
            None => missing.push(id),
        }
    }
    if !missing.is_empty() {
        if !args.allow_missing {
            bail!("no annotation for recording(s): {} (use --allow-missing to skip them)", missing.join(", "));
        }
        eprintln!("warning: skipping unannotated recording(s): {}", missing.join(", "));
    }
    if !annotations.is_empty() {
        let ids: Vec<&str> = annotations.keys().map(String::as_str).collect();
        eprintln!("warning: annotations without a recording: {}", ids.join(", "));
    }
    if corpus.is_empty() {
        bail!("no annotated recordings in {}", args.corpus.display());
    }
    Ok(corpus)
}

fn summary_json(summary: Option<Summary>) -> Option<Value> {
    summary.map(|s| json!({"mean": s.mean, "median": s.median, "std": s.std, "n": s.n}))
}

fn evaluate(args: &EvaluateArgs, exec: Execution) -> Result<()> {
    let config = args.config.build()?;
    let corpus = load_corpus(&args.corpus)?;
    let eval = evaluate_corpus(&corpus, &config, exec)?;
    let mut rows = Vec::new();
    for outcome in &eval.outcomes {
        if let NightOutcome::Detected { errors, metrics, degenerate_spread } = outcome {
            let mut row = serde_json::to_value(errors)?;
            row["tst_min"] = json!(metrics.tst_minutes);
            row["waso_min"] = json!(metrics.waso_minutes);
            row["efficiency"] = json!(metrics.efficiency);
            row["degenerate_spread"] = json!(degenerate_spread);
            rows.push(row);
        }
    }
    let mut aggregates = serde_json::Map::new();
    if let Some(report) = &eval.report {
        for (name, summary) in [
            ("tst", Some(report.tst)),
            ("waso", report.waso),
            ("efficiency", report.efficiency),
            ("onset", Some(report.onset)),
            ("offset", Some(report.offset)),
        ] {
            if let Some(v) = summary_json(summary) {
                aggregates.insert(name.to_string(), v);
            }
        }
    }
    let doc = json!({
        "nights": corpus.len(),
        "rows": rows,
        "aggregates": aggregates,
        "undetected": eval.undetected,
        "config": config_echo(&config),
    });
    emit(doc, args.out.as_deref())
}

fn calibrate(args: &CalibrateArgs, exec: Execution) -> Result<()> {
    let config = PipelineConfig::default().with_epoch_seconds(args.epoch_seconds)?;
    // validate the grid before paying for corpus loading
    actisleep::calib::threshold_grid(args.grid_min, args.grid_max, args.grid_step)?;
    let corpus = load_corpus(&args.corpus)?;
    let result = grid_search(&corpus, args.grid_min, args.grid_max, args.grid_step, &config, exec)?;
    let doc = json!({
        "nights": corpus.len(),
        "grid": serde_json::to_value(&result.grid)?,
        "selected_theta": result.selected_threshold,
        "tie_trace": result.tie_trace,
        "config": config_echo(&config),
    });
    emit(doc, args.out.as_deref())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let start = chrono::DateTime::parse_from_rfc3339(&args.start).with_context(|| format!("bad --start {:?}", args.start))?;
    let onset_s = args.onset_hours * 3600.0;
    let offset_s = onset_s + args.sleep_hours * 3600.0;
    let awakenings = if args.awakening_minutes != 0.0 {
        let len = args.awakening_minutes * 60.0;
        vec![(0.5 * (onset_s + offset_s - len), len)]
    } else {
        Vec::new()
    };
    let base = SynthSpec {
        seed: args.seed,
        rate_hz: args.rate_hz,
        start_time: start.timestamp() as f64,
        duration_s: args.duration_hours * 3600.0,
        onset_s,
        offset_s,
        wake_level: args.wake_level,
        wake_noise: args.wake_noise,
        sleep_level: args.sleep_level,
        sleep_noise: args.sleep_noise,
        burst_level: args.burst_level,
        awakenings,
        ..SynthSpec::default()
    };
    let specs = nightly_specs(&base, args.nights, args.jitter_minutes)?;
    let rec_dir = args.out_dir.join("recordings");
    fs::create_dir_all(&rec_dir).with_context(|| format!("cannot create {}", rec_dir.display()))?;

    let ann_path = args.out_dir.join("annotations.csv");
    let mut ann = BufWriter::new(File::create(&ann_path).with_context(|| format!("cannot write {}", ann_path.display()))?);
    writeln!(ann, "id,onset,offset,tst_min,waso_min,efficiency_pct")?;
    for spec in &specs {
        let (recording, truth) = generate(spec)?;
        let path = rec_dir.join(format!("{}.csv", spec.id));
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("cannot write {}", path.display()))?);
        writeln!(w, "timestamp,x,y,z")?;
        for s in recording.samples() {
            writeln!(w, "{},{},{},{}", s.timestamp, s.x, s.y, s.z)?;
        }
        w.flush()?;
        let time = |p| match p {
            actisleep::TimePoint::Dated(t) => iso(t),
            actisleep::TimePoint::TimeOfDay(s) => format!("{:02}:{:02}:{:02}", (s / 3600.0) as u32, (s / 60.0) as u32 % 60, s as u32 % 60),
        };
        writeln!(
            ann,
            "{},{},{},{},{},{}",
            truth.id,
            time(truth.onset),
            time(truth.offset),
            truth.tst_minutes.unwrap_or_default(),
            truth.waso_minutes.unwrap_or_default(),
            truth.efficiency_pct.unwrap_or_default(),
        )?;
    }
    ann.flush()?;
    eprintln!("wrote {} night(s) to {}", specs.len(), args.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let result = match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Evaluate(a) => evaluate(a, exec),
        Command::Calibrate(a) => calibrate(a, exec),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
