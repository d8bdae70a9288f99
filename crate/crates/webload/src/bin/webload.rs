use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use webload::core::clustering::{best_of_seeds, select_k, silhouette, DEFAULT_K_MAX, DEFAULT_K_MIN};
use webload::core::patterns::PatternLibrary;
use webload::core::polyfit::{daily_grid, fit_polynomial, weekly_grid};
use webload::core::preprocess::{preprocess_matrix, SmoothingConfig, StandardizeScope, DEFAULT_ALPHA};
use webload::core::stats::{profile, Reduction};
use webload::core::synth::{self, GenConfig, Noise, PatternRef, Schedule, ScheduleMeta, DEFAULT_START};
use webload::core::timeseries::{to_daily_matrix, weekly_from_hourly, Granularity};
use webload::core::trace::{parse_clf_line, SourceDescriptor, SourceFormat, TimezonePolicy};
use webload::fetch::{self, FetchOptions, HttpTransport};
use webload::formats::{self, ModelExport, PatternRecord};
use webload::pipeline::{self, CentroidFit, DatasetSpec, MetricName, PipelineConfig};
use webload::replay::{self, ClfTemplate, ReplayConfig};
use webload::source::{self, ReadOptions};
use webload::{report, svg, Error, Result};

#[derive(Parser)]
#[command(name = "webload", version, about = "Characterize, synthesize and replay web workloads")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Download hourly Wikimedia pageview dumps into the cache
    Fetch(FetchArgs),
    /// Parse sources and report line accounting; optionally write the hourly series
    Ingest(IngestArgs),
    /// Build daily and weekly matrices from sources
    Aggregate(AggregateArgs),
    /// CV and burstiness of a matrix
    Profile(ProfileArgs),
    /// Full pipeline from a config file and/or flags
    Characterize(CharacterizeArgs),
    /// Cluster a matrix and fit a polynomial to each centroid
    Fit(FitArgs),
    /// Synthetic schedules and arrivals from pattern models
    Generate(GenerateArgs),
    /// Open-loop replay of arrivals against an HTTP target
    Replay(ReplayArgs),
    /// Summarize a characterization bundle
    Report(ReportArgs),
}

#[derive(Args)]
struct FetchArgs {
    #[arg(long)]
    project: String,
    #[arg(long)]
    start: NaiveDate,
    /// Inclusive
    #[arg(long)]
    end: NaiveDate,
    #[arg(long, env = fetch::CACHE_DIR_ENV)]
    cache_dir: Option<PathBuf>,
    #[arg(long, default_value = fetch::DUMPS_BASE_URL)]
    base_url: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Clf,
    Summary,
}

#[derive(Clone, Copy, ValueEnum)]
enum TzArg {
    UseOffset,
    AssumeUtc,
}

#[derive(Args)]
struct SourceArgs {
    /// Files or URLs (`.gz` is decompressed)
    #[arg(required = true)]
    sources: Vec<String>,
    #[arg(long, value_enum, default_value = "clf")]
    format: FormatArg,
    /// Bucket width of summary sources, seconds
    #[arg(long, default_value_t = 3600)]
    bucket_width: u64,
    #[arg(long, value_enum, default_value = "use-offset")]
    timezone: TzArg,
    /// Abort on the first malformed line
    #[arg(long)]
    strict: bool,
    /// Keep only this project's lines (summary sources)
    #[arg(long)]
    project: Option<String>,
    #[arg(long, default_value = "dataset")]
    dataset: String,
}

impl SourceArgs {
    fn spec(&self) -> DatasetSpec {
        DatasetSpec {
            id: self.dataset.clone(),
            paths: self.sources.clone(),
            format: match self.format {
                FormatArg::Clf => SourceFormat::Clf,
                FormatArg::Summary => SourceFormat::Summary,
            },
            bucket_width: matches!(self.format, FormatArg::Summary).then_some(self.bucket_width),
            timezone: match self.timezone {
                TzArg::UseOffset => TimezonePolicy::UseOffset,
                TzArg::AssumeUtc => TimezonePolicy::AssumeUtc,
            },
            compression: None,
            project: self.project.clone(),
            strict: self.strict,
            max_days: None,
        }
    }

    fn series(&self) -> Result<(webload::core::timeseries::TimeSeries, source::ReadSummary)> {
        let spec = self.spec();
        let locations = spec.locations()?;
        let mut acc = webload::core::timeseries::BinAccumulator::new(
            webload::core::timeseries::BinWidth::Hour,
            spec.bucket_width,
        )?;
        let opts = ReadOptions { strict: spec.strict, bucket_start: None, project: spec.project.clone() };
        let mut total = source::ReadSummary::default();
        for loc in &locations {
            let desc = SourceDescriptor {
                format: spec.format,
                bucket_width: spec.bucket_width,
                timezone_policy: spec.timezone,
                compression: source::compression_for(loc),
            };
            let s = source::for_each_record(loc, &desc, &opts, |r| acc.push(&r).map_err(Error::from))?;
            total.merge(&s);
        }
        Ok((acc.finish(spec.id)?, total))
    }
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    src: SourceArgs,
    /// Hourly series CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AggregateArgs {
    #[command(flatten)]
    src: SourceArgs,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReductionArg {
    RowMean,
    WholeSeries,
}

#[derive(Args)]
struct ProfileArgs {
    matrix: PathBuf,
    #[arg(long, value_enum, default_value = "row-mean")]
    reduction: ReductionArg,
    /// Profile CSV; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-row CV and burstiness bar chart
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Euclidean,
    Dtw,
    Softdtw,
}

impl From<MetricArg> for MetricName {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Euclidean => MetricName::Euclidean,
            MetricArg::Dtw => MetricName::Dtw,
            MetricArg::Softdtw => MetricName::Softdtw,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    PerRow,
    PerDataset,
}

#[derive(Args)]
struct CharacterizeArgs {
    /// TOML config; flags given here override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Re-run exactly what a previous manifest recorded
    #[arg(long, conflicts_with = "config")]
    manifest: Option<PathBuf>,
    /// Extra CLF dataset as ID=PATH (repeatable)
    #[arg(long = "input", value_name = "ID=PATH")]
    inputs: Vec<String>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    no_smoothing: bool,
    #[arg(long, value_enum)]
    scope: Option<ScopeArg>,
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Use seeds 0..N
    #[arg(long)]
    seeds: Option<u64>,
    /// Keep only the first N complete days of every dataset
    #[arg(long)]
    max_days: Option<usize>,
}

impl CharacterizeArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        for spec in &self.inputs {
            let (id, path) = spec
                .split_once('=')
                .ok_or_else(|| Error::Precondition(format!("--input expects ID=PATH, got {spec:?}")))?;
            cfg.datasets.push(DatasetSpec::clf(id, &[path]));
        }
        if let Some(v) = &self.output {
            cfg.output = v.clone();
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if self.no_smoothing {
            cfg.smoothing = false;
        }
        if let Some(v) = self.scope {
            cfg.scope = match v {
                ScopeArg::PerRow => StandardizeScope::PerRow,
                ScopeArg::PerDataset => StandardizeScope::PerDataset,
            };
        }
        if let Some(v) = self.metric {
            cfg.metric = v.into();
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.k_min {
            cfg.k_min = v;
        }
        if let Some(v) = self.k_max {
            cfg.k_max = v;
        }
        if let Some(n) = self.seeds {
            cfg.seeds = (0..n).collect();
        }
        if let Some(d) = self.max_days {
            for ds in &mut cfg.datasets {
                ds.max_days = Some(d);
            }
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct FitArgs {
    matrix: PathBuf,
    /// Fixed k; chosen by silhouette when absent
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value = "euclidean")]
    metric: MetricArg,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    no_smoothing: bool,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = DEFAULT_K_MIN)]
    k_min: usize,
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    k_max: usize,
    /// Fits JSON; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    None,
    Poisson,
}

#[derive(Args)]
struct GenerateArgs {
    /// Print the pattern library and exit
    #[arg(long)]
    list_patterns: bool,
    /// Daily or weekly pattern name
    #[arg(long, conflicts_with_all = ["weekly", "daily"])]
    pattern: Option<String>,
    /// Weekly pattern for composition (with --daily)
    #[arg(long, requires = "daily")]
    weekly: Option<String>,
    #[arg(long, requires = "weekly")]
    daily: Option<String>,
    /// Extra patterns, as a library JSON file
    #[arg(long)]
    library: Option<PathBuf>,
    /// Mean rate, requests per hour
    #[arg(long, default_value_t = 1000.0)]
    mean: f64,
    /// Standard deviation, requests per hour
    #[arg(long, default_value_t = 300.0)]
    std: f64,
    #[arg(long, default_value_t = 7)]
    days: i64,
    /// Interval width, seconds
    #[arg(long, default_value_t = 3600)]
    resolution: i64,
    /// First interval, YYYY-MM-DD (UTC midnight)
    #[arg(long)]
    start: Option<NaiveDate>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "poisson")]
    noise: NoiseArg,
    /// Target burstiness of the rate schedule
    #[arg(long, allow_hyphen_values = true)]
    burstiness: Option<f64>,
    #[arg(long, default_value_t = synth::DEFAULT_WEEKLY_COEFFICIENT)]
    weekly_coefficient: f64,
    /// Schedule file: `.json` for JSON, CSV otherwise; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Arrival instants, one epoch second per line
    #[arg(long)]
    events: Option<PathBuf>,
    /// Arrivals rendered as Common Log Format
    #[arg(long)]
    clf: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Arrivals: epoch seconds per line, or a CLF log
    #[arg(long, required_unless_present = "schedule")]
    events: Option<PathBuf>,
    /// Schedule CSV; arrivals are emitted from it first
    #[arg(long, conflicts_with = "events")]
    schedule: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "poisson")]
    noise: NoiseArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, required_unless_present = "dry_run")]
    target: Option<String>,
    #[arg(long, default_value_t = replay::DEFAULT_MAX_IN_FLIGHT)]
    max_in_flight: usize,
    #[arg(long, default_value_t = 1.0)]
    time_scale: f64,
    #[arg(long)]
    dry_run: bool,
    /// Report interval, schedule seconds
    #[arg(long, default_value_t = 1.0)]
    interval: f64,
    /// Report JSON; stdout when absent
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    bundle: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Fetch(a) => cmd_fetch(a),
        Cmd::Ingest(a) => cmd_ingest(a),
        Cmd::Aggregate(a) => cmd_aggregate(a),
        Cmd::Profile(a) => cmd_profile(a),
        Cmd::Characterize(a) => cmd_characterize(a),
        Cmd::Fit(a) => cmd_fit(a),
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Replay(a) => cmd_replay(a),
        Cmd::Report(a) => {
            print!("{}", report::render(&a.bundle)?);
            Ok(())
        }
    }
}

fn stdout_or_file(path: Option<&Path>, write: impl FnOnce(&mut dyn std::io::Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => formats::write_file(p, write),
        None => write(&mut std::io::stdout().lock()),
    }
}

fn cmd_fetch(a: FetchArgs) -> Result<()> {
    let cache = a.cache_dir.unwrap_or_else(fetch::default_cache_dir);
    let opts = FetchOptions { base_url: a.base_url, ..Default::default() };
    let paths = fetch::fetch_wikimedia(&a.project, a.start, a.end, &cache, &HttpTransport::new()?, &opts)?;
    println!("{} hour file(s) cached under {}", paths.len(), cache.join(&a.project).display());
    Ok(())
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let (ts, summary) = a.src.series()?;
    if let Some(out) = &a.out {
        formats::write_file(out, |w| formats::write_series_csv(w, &ts))?;
    }
    let report = serde_json::json!({
        "summary": summary,
        "bins": ts.len(),
        "gaps": ts.gaps().len(),
        "total": ts.total(),
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_aggregate(a: AggregateArgs) -> Result<()> {
    let (ts, summary) = a.src.series()?;
    let daily = to_daily_matrix(&ts)?;
    let weekly = weekly_from_hourly(&ts)?;
    formats::write_file(&a.out_dir.join("series_hourly.csv"), |w| formats::write_series_csv(w, &ts))?;
    formats::write_file(&a.out_dir.join("matrix_daily.csv"), |w| formats::write_matrix_csv(w, &daily))?;
    formats::write_file(&a.out_dir.join("matrix_weekly.csv"), |w| formats::write_matrix_csv(w, &weekly))?;
    eprintln!(
        "{} line(s), {} malformed; {} daily row(s) ({} dropped), {} weekly row(s) ({} dropped)",
        summary.total,
        summary.malformed,
        daily.len(),
        daily.dropped.len(),
        weekly.len(),
        weekly.dropped.len()
    );
    Ok(())
}

fn cmd_profile(a: ProfileArgs) -> Result<()> {
    let m = formats::load_matrix(&a.matrix)?;
    let reduction = match a.reduction {
        ReductionArg::RowMean => Reduction::RowMean,
        ReductionArg::WholeSeries => Reduction::WholeSeries,
    };
    let p = profile(&m, reduction)?;
    stdout_or_file(a.out.as_deref(), |w| formats::write_profile_csv(w, &p))?;
    if let Some(path) = &a.svg {
        let cats: Vec<String> = p.per_row.iter().map(|r| r.origin.to_string()).collect();
        let values = vec![p.per_row.iter().map(|r| r.cv).collect(), p.per_row.iter().map(|r| r.burstiness).collect()];
        let chart = svg::grouped_bars(
            &format!("{} rows of {}", m.granularity.name(), p.dataset_id),
            &cats,
            &["CV".into(), "burstiness".into()],
            &values,
            "value",
        );
        formats::write_file(path, |w| w.write_all(chart.as_bytes()).map_err(|e| Error::io(path, e)))?;
    }
    Ok(())
}

fn cmd_characterize(a: CharacterizeArgs) -> Result<()> {
    let bundle = match &a.manifest {
        Some(m) => pipeline::rerun(m, a.output.clone())?,
        None => pipeline::run_characterize(&a.config()?)?,
    };
    for s in &bundle.manifest.stages {
        eprintln!("{:<16} {:?}{}", s.name, s.status, s.detail.as_deref().map(|d| format!(": {d}")).unwrap_or_default());
    }
    eprintln!("bundle written to {}", bundle.dir.display());
    Ok(())
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let m = formats::load_matrix(&a.matrix)?;
    let smoothing = if a.no_smoothing { SmoothingConfig::disabled() } else { SmoothingConfig::new(a.alpha)? };
    let pre = preprocess_matrix(&m, &smoothing, StandardizeScope::PerRow)?;
    let rows = pre.matrix.vectors();
    let cfg = PipelineConfig { metric: a.metric.into(), gamma: a.gamma, ..Default::default() };
    let metric = cfg.distance()?;
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let model = match a.k {
        Some(k) => {
            let mut model = best_of_seeds(&rows, k, &metric, &seeds)?;
            model.silhouette = silhouette(&rows, &model)?;
            model
        }
        None => {
            let limit = webload::core::clustering::distinct_rows(&rows).saturating_sub(1);
            select_k(&rows, a.k_min, a.k_max.min(limit), &metric, &seeds)?.model
        }
    };
    let prefix = match m.granularity {
        Granularity::Daily => 'D',
        Granularity::Weekly => 'W',
    };
    let (degree, grid) = match m.granularity {
        Granularity::Daily => (3, daily_grid()),
        Granularity::Weekly => (2, weekly_grid()),
    };
    let names = pipeline::ranked_names(&model.sizes, prefix);
    let mut fits = Vec::new();
    for (label, c) in model.centroids.iter().enumerate() {
        let fit = fit_polynomial(c, degree, &grid)?;
        fits.push(CentroidFit {
            label,
            size: model.sizes[label],
            centroid: c.clone(),
            pattern: PatternRecord {
                name: names[label].clone(),
                granularity: m.granularity,
                degree: fit.degree,
                coefficients: fit.coefficients.clone(),
                domain: fit.domain,
                description: format!("centroid of {} row(s)", model.sizes[label]),
                rmse: fit.rmse,
            },
        });
    }
    fits.sort_by(|x, y| x.pattern.name.cmp(&y.pattern.name));
    stdout_or_file(a.out.as_deref(), |w| formats::write_json(w, &fits))?;
    if let Some(p) = &a.model_out {
        let export = ModelExport::new(&model, &pre.matrix.rows)?;
        formats::write_file(p, |w| formats::write_json(w, &export))?;
    }
    if let Some(p) = &a.svg {
        let mut series = Vec::new();
        for f in &fits {
            let entry = f.pattern.clone().into_entry()?;
            series.push((f.pattern.name.clone(), grid.iter().copied().zip(f.centroid.iter().copied()).collect(), false));
            series.push((f.pattern.name.clone(), grid.iter().map(|&t| (t, entry.model.evaluate(t))).collect(), true));
        }
        let chart = svg::line_chart("centroids and fitted curves", &series, "t", "standardized intensity");
        formats::write_file(p, |w| w.write_all(chart.as_bytes()).map_err(|e| Error::io(p, e)))?;
    }
    Ok(())
}

fn noise(n: NoiseArg) -> Noise {
    match n {
        NoiseArg::None => Noise::None,
        NoiseArg::Poisson => Noise::Poisson,
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let lib = match &a.library {
        Some(p) => formats::load_library(p)?,
        None => PatternLibrary::builtin(),
    };
    if a.list_patterns {
        println!("{}", serde_json::to_string_pretty(&formats::library_records(&lib))?);
        return Ok(());
    }
    let start = match a.start {
        Some(d) => webload::core::calendar::midnight_of(d),
        None => DEFAULT_START,
    };
    let cfg = GenConfig {
        pattern: PatternRef::named(a.pattern.as_deref().unwrap_or("D1")),
        mean_rate: a.mean,
        std: a.std,
        start,
        duration_secs: a.days * webload::core::calendar::SECS_PER_DAY,
        resolution_secs: a.resolution,
        noise: noise(a.noise),
        burstiness_target: a.burstiness,
        seed: a.seed,
        weekly_coefficient: a.weekly_coefficient,
    };
    let schedule = match (&a.weekly, &a.daily) {
        (Some(w), Some(d)) => synth::compose(&PatternRef::named(w), &PatternRef::named(d), &cfg, &lib)?,
        _ => synth::rate_schedule(&cfg, &lib)?,
    };
    if schedule.meta.clipped_fraction > 0.0 {
        eprintln!("warning: {:.1}% of intervals clipped at zero", 100.0 * schedule.meta.clipped_fraction);
    }
    let json = a.out.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
    stdout_or_file(a.out.as_deref(), |w| {
        if json {
            formats::write_json(w, &schedule)
        } else {
            formats::write_schedule_csv(w, &schedule)
        }
    })?;
    if a.events.is_some() || a.clf.is_some() {
        let events = synth::events(&schedule, cfg.noise, cfg.seed)?;
        if let Some(p) = &a.events {
            formats::write_file(p, |w| formats::write_instants(w, &events))?;
        }
        if let Some(p) = &a.clf {
            replay::write_clf(&events, &ClfTemplate::default(), p)?;
        }
        eprintln!("{} arrival(s) over {} interval(s)", events.len(), schedule.entries.len());
    }
    Ok(())
}

/// Epoch seconds per line, or CLF when the first line is not a number.
fn load_events(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.trim().parse::<f64>().is_ok() {
        return formats::read_instants(text.as_bytes());
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(ev) = parse_clf_line(line, TimezonePolicy::UseOffset)
            .map_err(|e| Error::format(format!("{}: line {}: {e}", path.display(), i + 1)))?
        {
            out.push(ev.timestamp as f64);
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

fn cmd_replay(a: ReplayArgs) -> Result<()> {
    let events = match (&a.events, &a.schedule) {
        (Some(p), _) => load_events(p)?,
        (None, Some(p)) => {
            let pairs = formats::read_schedule_csv(formats::open(p)?)?;
            let resolution = match pairs.as_slice() {
                [a, b, ..] => b.0 - a.0,
                _ => webload::core::calendar::SECS_PER_HOUR,
            };
            let rates: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let start = pairs.first().map_or(0, |p| p.0);
            let schedule = Schedule::from_rates(start, resolution, &rates, ScheduleMeta::default())?;
            synth::events(&schedule, noise(a.noise), a.seed)?
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let cfg = ReplayConfig {
        target: a.target,
        max_in_flight: a.max_in_flight,
        time_scale: a.time_scale,
        dry_run: a.dry_run,
        interval_secs: a.interval,
        ..Default::default()
    };
    let report = replay::replay(&events, &cfg)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    stdout_or_file(a.report.as_deref(), |w| formats::write_json(w, &report))
}
