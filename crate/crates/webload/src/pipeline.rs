//! The characterization run: ingest, aggregate, profile, preprocess,
//! cluster, fit, associate, and export everything with a manifest.
//!
//! Outputs go to a flat directory. When a stage fails, whatever was already
//! written moves to `failed/` together with a manifest naming the stage.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use webload_core::clustering::{select_k, DEFAULT_K_MAX, DEFAULT_K_MIN, DEFAULT_SEED_COUNT};
use webload_core::distance::{DistanceConfig, DEFAULT_SOFTDTW_GAMMA};
use webload_core::patterns::{association_table, time_dependence, LabeledRow, SeasonScheme, TimeScheme};
use webload_core::polyfit::{daily_grid, fit_polynomial, weekly_grid};
use webload_core::preprocess::{preprocess_matrix, SmoothingConfig, StandardizeScope, DEFAULT_ALPHA};
use webload_core::stats::{profile, DatasetProfile, Reduction};
use webload_core::timeseries::{to_daily_matrix, weekly_from_hourly, Bin, Granularity, TimeSeries, WorkloadMatrix};
use webload_core::trace::{Compression, SourceDescriptor, SourceFormat, TimezonePolicy};

use crate::error::{Error, Result};
use crate::formats::{self, ModelExport, PatternRecord};
use crate::source::{self, ReadOptions, ReadSummary};
use crate::svg;

pub const FAILED_DIR: &str = "failed";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub id: String,
    /// Files, URLs, or directories (searched recursively for `.gz` files).
    pub paths: Vec<String>,
    #[serde(default = "default_format")]
    pub format: SourceFormat,
    /// Summary sources only; seconds.
    #[serde(default)]
    pub bucket_width: Option<u64>,
    #[serde(default)]
    pub timezone: TimezonePolicy,
    /// Inferred from a `.gz` suffix when absent.
    #[serde(default)]
    pub compression: Option<Compression>,
    /// Summary sources: keep only this project's lines.
    #[serde(default)]
    pub project: Option<String>,
    #[serde(default)]
    pub strict: bool,
    /// Keep only the first N complete days of the hourly series.
    #[serde(default)]
    pub max_days: Option<usize>,
}

fn default_format() -> SourceFormat {
    SourceFormat::Clf
}

impl DatasetSpec {
    pub fn clf(id: &str, paths: &[&str]) -> Self {
        DatasetSpec {
            id: id.into(),
            paths: paths.iter().map(|p| p.to_string()).collect(),
            format: SourceFormat::Clf,
            bucket_width: None,
            timezone: TimezonePolicy::UseOffset,
            compression: None,
            project: None,
            strict: false,
            max_days: None,
        }
    }

    fn descriptor(&self, location: &str) -> SourceDescriptor {
        let compression = self.compression.unwrap_or_else(|| source::compression_for(location));
        SourceDescriptor {
            format: self.format,
            bucket_width: match self.format {
                SourceFormat::Clf => None,
                SourceFormat::Summary => Some(self.bucket_width.unwrap_or(3600)),
            },
            timezone_policy: self.timezone,
            compression,
        }
    }

    /// Concrete sources in the order they are read.
    pub fn locations(&self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for p in &self.paths {
            let path = Path::new(p);
            if path.is_dir() {
                let mut found = Vec::new();
                collect_gz(path, &mut found)?;
                found.sort();
                out.extend(found.iter().map(|f| source::path_str(f)));
            } else {
                out.push(p.clone());
            }
        }
        if out.is_empty() {
            return Err(Error::Precondition(format!("dataset {} has no sources", self.id)));
        }
        Ok(out)
    }
}

fn collect_gz(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_gz(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "gz") {
            out.push(path);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricName {
    Euclidean,
    Dtw,
    Softdtw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub output: PathBuf,
    pub alpha: f64,
    pub smoothing: bool,
    pub scope: StandardizeScope,
    pub metric: MetricName,
    pub gamma: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub seeds: Vec<u64>,
    pub reduction: Reduction,
    pub season: SeasonScheme,
    pub datasets: Vec<DatasetSpec>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            output: PathBuf::from("out"),
            alpha: DEFAULT_ALPHA,
            smoothing: true,
            scope: StandardizeScope::PerRow,
            metric: MetricName::Euclidean,
            gamma: DEFAULT_SOFTDTW_GAMMA,
            k_min: DEFAULT_K_MIN,
            k_max: DEFAULT_K_MAX,
            seeds: (0..DEFAULT_SEED_COUNT).collect(),
            reduction: Reduction::RowMean,
            season: SeasonScheme::Meteorological,
            datasets: Vec::new(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn distance(&self) -> Result<DistanceConfig> {
        Ok(match self.metric {
            MetricName::Euclidean => DistanceConfig::Euclidean,
            MetricName::Dtw => DistanceConfig::Dtw,
            MetricName::Softdtw => DistanceConfig::softdtw(self.gamma)?,
        })
    }

    pub fn smoothing_config(&self) -> Result<SmoothingConfig> {
        if self.smoothing {
            Ok(SmoothingConfig::new(self.alpha)?)
        } else {
            Ok(SmoothingConfig::disabled())
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Precondition("at least one dataset is required".into()));
        }
        let mut ids: Vec<&str> = self.datasets.iter().map(|d| d.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Precondition("dataset ids must be unique".into()));
        }
        if self.k_min < 2 || self.k_max < self.k_min {
            return Err(Error::Precondition("k range must satisfy 2 <= k_min <= k_max".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Precondition("at least one seed is required".into()));
        }
        self.distance()?;
        self.smoothing_config()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub dataset: String,
    pub location: String,
    /// `None` for URL sources.
    pub sha256: Option<String>,
    pub bytes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub config: PipelineConfig,
    pub inputs: Vec<InputRecord>,
    pub reads: BTreeMap<String, ReadSummary>,
    pub stages: Vec<StageRecord>,
    /// File name to SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_file(path: &Path) -> Result<(String, u64)> {
    let mut f = formats::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut n_total = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
        n_total += n as u64;
    }
    Ok((hex::encode(h.finalize()), n_total))
}

/// Cluster labels renamed by descending size, e.g. `D1` for the largest
/// daily cluster.
pub fn ranked_names(sizes: &[usize], prefix: char) -> Vec<String> {
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&l| (std::cmp::Reverse(sizes[l]), l));
    let mut names = vec![String::new(); sizes.len()];
    for (rank, &label) in order.iter().enumerate() {
        names[label] = format!("{prefix}{}", rank + 1);
    }
    names
}

/// First two principal-component scores of each row.
pub fn pca_2d(rows: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let (n, d) = (rows.len(), rows.first().map_or(0, Vec::len));
    if n == 0 || d == 0 {
        return Vec::new();
    }
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let svd = x.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let score = |i: usize, k: Option<&usize>| -> f64 {
        k.map_or(0.0, |&k| (0..d).map(|j| x[(i, j)] * vt[(k, j)]).sum())
    };
    (0..n).map(|i| (score(i, order.first()), score(i, order.get(1)))).collect()
}

/// Keeps the first `days` complete days of an hourly series.
fn truncate_days(ts: &TimeSeries, days: usize) -> Result<TimeSeries> {
    let daily = to_daily_matrix(ts)?;
    let Some(last) = daily.rows.get(days.saturating_sub(1)).map(|r| r.origin) else {
        return Ok(ts.clone());
    };
    let first = daily.rows[0].origin;
    let lo = webload_core::calendar::midnight_of(first);
    let hi = webload_core::calendar::midnight_of(last) + webload_core::calendar::SECS_PER_DAY;
    let bins: Vec<Bin> = ts.bins.iter().copied().filter(|b| b.start >= lo && b.start < hi).collect();
    Ok(TimeSeries { dataset_id: ts.dataset_id.clone(), bin_width: ts.bin_width, bins })
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    dir: PathBuf,
    manifest: Manifest,
    written: Vec<String>,
}

impl Run<'_> {
    fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn std::io::Write) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        body(&mut buf)?;
        let path = self.dir.join(name);
        fs::write(&path, &buf).map_err(|e| Error::io(&path, e))?;
        self.manifest.outputs.insert(name.to_string(), sha256_hex(&buf));
        self.written.push(name.to_string());
        Ok(())
    }

    fn stage(&mut self, name: &str, status: StageStatus, detail: Option<String>) {
        self.manifest.stages.push(StageRecord { name: name.into(), status, detail });
    }

    fn fail(mut self, name: &str, err: Error) -> Error {
        self.stage(name, StageStatus::Failed, Some(err.to_string()));
        let failed = self.dir.join(FAILED_DIR);
        let moved = fs::create_dir_all(&failed).and_then(|_| {
            for f in &self.written {
                fs::rename(self.dir.join(f), failed.join(f))?;
            }
            let json = serde_json::to_vec_pretty(&self.manifest).map_err(std::io::Error::other)?;
            fs::write(failed.join(MANIFEST), json)
        });
        if let Err(e) = moved {
            return Error::Stage { stage: name.into(), source: Box::new(Error::io(failed, e)) };
        }
        Error::Stage { stage: name.into(), source: Box::new(err) }
    }
}

struct Clusters {
    rows: Vec<LabeledRow>,
    names: Vec<String>,
    centroids: Vec<Vec<f64>>,
    sizes: Vec<usize>,
}

/// Per-granularity state carried between stages.
struct Level {
    g: Granularity,
    raw: WorkloadMatrix,
    pre: Option<WorkloadMatrix>,
    clusters: Option<Clusters>,
}

fn prefix(g: Granularity) -> char {
    match g {
        Granularity::Daily => 'D',
        Granularity::Weekly => 'W',
    }
}

/// Runs the whole characterization and writes the bundle to `cfg.output`.
pub fn run_characterize(cfg: &PipelineConfig) -> Result<Bundle> {
    cfg.validate()?;
    let dir = cfg.output.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let stale = dir.join(FAILED_DIR);
    if stale.exists() {
        fs::remove_dir_all(&stale).map_err(|e| Error::io(&stale, e))?;
    }
    let mut run = Run {
        cfg,
        dir: dir.clone(),
        manifest: Manifest {
            tool: concat!("webload ", env!("CARGO_PKG_VERSION")).into(),
            config: cfg.clone(),
            inputs: Vec::new(),
            reads: BTreeMap::new(),
            stages: Vec::new(),
            outputs: BTreeMap::new(),
            notes: Vec::new(),
        },
        written: Vec::new(),
    };

    let series = match ingest(&mut run) {
        Ok(s) => s,
        Err(e) => return Err(run.fail("ingest", e)),
    };
    run.stage("ingest", StageStatus::Ok, None);

    let mut levels = match aggregate(&mut run, &series) {
        Ok(l) => l,
        Err(e) => return Err(run.fail("aggregate", e)),
    };
    run.stage("aggregate", StageStatus::Ok, None);

    type Step = fn(&mut Run, &mut [Level]) -> Result<Option<String>>;
    let steps: [(&str, Step); 6] = [
        ("profile", stage_profile),
        ("preprocess", stage_preprocess),
        ("cluster", stage_cluster),
        ("fit", stage_fit),
        ("associate", stage_associate),
        ("time-dependence", stage_time_dependence),
    ];
    for (name, step) in steps {
        match step(&mut run, &mut levels) {
            Ok(None) => run.stage(name, StageStatus::Ok, None),
            Ok(Some(why)) => run.stage(name, StageStatus::Skipped, Some(why)),
            Err(e) => return Err(run.fail(name, e)),
        }
    }

    let manifest = run.manifest.clone();
    let path = dir.join(MANIFEST);
    formats::write_file(&path, |w| formats::write_json(w, &manifest))?;
    Ok(Bundle { dir, manifest })
}

/// Re-runs the configuration recorded in a manifest after checking that
/// every local input still hashes the same.
pub fn rerun(manifest_path: &Path, output: Option<PathBuf>) -> Result<Bundle> {
    let manifest: Manifest = formats::read_json(manifest_path)?;
    for input in &manifest.inputs {
        if let Some(expected) = &input.sha256 {
            let (got, _) = hash_file(Path::new(&input.location))?;
            if &got != expected {
                return Err(Error::Precondition(format!("{} changed since the manifest was written", input.location)));
            }
        }
    }
    let mut cfg = manifest.config;
    if let Some(out) = output {
        cfg.output = out;
    }
    run_characterize(&cfg)
}

fn ingest(run: &mut Run) -> Result<Vec<TimeSeries>> {
    let mut plans = Vec::new();
    for ds in &run.cfg.datasets {
        let locations = ds.locations()?;
        for loc in &locations {
            let (sha256, bytes) = if loc.starts_with("http://") || loc.starts_with("https://") {
                (None, None)
            } else {
                let (h, n) = hash_file(Path::new(loc))?;
                (Some(h), Some(n))
            };
            run.manifest.inputs.push(InputRecord { dataset: ds.id.clone(), location: loc.clone(), sha256, bytes });
        }
        plans.push((ds, locations));
    }
    // datasets are independent; read them concurrently
    let results: Vec<Result<(TimeSeries, ReadSummary)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = plans
            .iter()
            .map(|(ds, locs)| scope.spawn(move || read_dataset(ds, locs)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("reader thread panicked")).collect()
    });
    let mut out = Vec::new();
    for ((ds, _), res) in plans.iter().zip(results) {
        let (ts, summary) = res.map_err(|e| Error::format(format!("dataset {}: {e}", ds.id)))?;
        if summary.malformed > 0 {
            run.manifest.notes.push(format!("{}: {} malformed line(s) dropped", ds.id, summary.malformed));
        }
        run.manifest.reads.insert(ds.id.clone(), summary);
        out.push(ts);
    }
    Ok(out)
}

fn read_dataset(ds: &DatasetSpec, locations: &[String]) -> Result<(TimeSeries, ReadSummary)> {
    let opts = ReadOptions { strict: ds.strict, bucket_start: None, project: ds.project.clone() };
    let mut acc = webload_core::timeseries::BinAccumulator::new(
        webload_core::timeseries::BinWidth::Hour,
        ds.descriptor(&locations[0]).bucket_width,
    )?;
    let mut total = ReadSummary::default();
    for loc in locations {
        let desc = ds.descriptor(loc);
        let s = source::for_each_record(loc, &desc, &opts, |r| acc.push(&r).map_err(Error::from))?;
        total.merge(&s);
    }
    let mut ts = acc.finish(ds.id.clone())?;
    if let Some(days) = ds.max_days {
        ts = truncate_days(&ts, days)?;
    }
    Ok((ts, total))
}

fn aggregate(run: &mut Run, series: &[TimeSeries]) -> Result<Vec<Level>> {
    let mut levels = Vec::new();
    for g in [Granularity::Daily, Granularity::Weekly] {
        let mut parts = Vec::new();
        for ts in series {
            let m = match g {
                Granularity::Daily => to_daily_matrix(ts)?,
                Granularity::Weekly => weekly_from_hourly(ts)?,
            };
            if !m.dropped.is_empty() {
                run.manifest.notes.push(format!(
                    "{}: {} incomplete {} row(s) dropped",
                    ts.dataset_id,
                    m.dropped.len(),
                    g.name()
                ));
            }
            parts.push(m);
        }
        let raw = WorkloadMatrix::combine("all", &parts)?;
        run.write(&format!("matrix_{}.csv", g.name()), |w| formats::write_matrix_csv(w, &raw))?;
        levels.push(Level { g, raw, pre: None, clusters: None });
    }
    if levels.iter().all(|l| l.raw.is_empty()) {
        return Err(Error::Core(webload_core::Error::EmptyResult));
    }
    Ok(levels)
}

fn by_dataset(m: &WorkloadMatrix) -> Vec<WorkloadMatrix> {
    let mut groups: BTreeMap<&str, WorkloadMatrix> = BTreeMap::new();
    for row in &m.rows {
        groups
            .entry(row.dataset.as_str())
            .or_insert_with(|| WorkloadMatrix::new(row.dataset.clone(), m.granularity, m.provenance))
            .rows
            .push(row.clone());
    }
    groups.into_values().collect()
}

fn stage_profile(run: &mut Run, levels: &mut [Level]) -> Result<Option<String>> {
    let mut skipped = Vec::new();
    for level in levels.iter() {
        let mut profiles: Vec<DatasetProfile> = Vec::new();
        for part in by_dataset(&level.raw) {
            match profile(&part, run.cfg.reduction) {
                Ok(p) => profiles.push(p),
                Err(webload_core::Error::EmptyResult) => {
                    run.manifest.notes.push(format!("{}: no non-zero {} rows to profile", part.dataset_id, level.g.name()))
                }
                Err(e) => return Err(e.into()),
            }
        }
        if profiles.is_empty() {
            skipped.push(level.g.name());
            continue;
        }
        let name = level.g.name();
        run.write(&format!("profile_{name}.csv"), |w| {
            let mut first = true;
            for p in &profiles {
                let mut buf = Vec::new();
                formats::write_profile_csv(&mut buf, p)?;
                let text = String::from_utf8(buf).expect("csv is utf-8");
                let body = if first { text.as_str() } else { text.split_once('\n').map_or("", |x| x.1) };
                w.write_all(body.as_bytes()).map_err(|e| Error::io("<profile>", e))?;
                first = false;
            }
            Ok(())
        })?;
        let cats: Vec<String> = profiles.iter().map(|p| p.dataset_id.clone()).collect();
        let values = vec![
            profiles.iter().map(|p| p.cv_mean).collect(),
            profiles.iter().map(|p| p.burstiness_mean).collect(),
        ];
        let chart = svg::grouped_bars(
            &format!("Variability per dataset ({name})"),
            &cats,
            &["CV".into(), "burstiness".into()],
            &values,
            "value",
        );
        run.write(&format!("profile_{name}.svg"), |w| w.write_all(chart.as_bytes()).map_err(|e| Error::io("<svg>", e)))?;
    }
    Ok((!skipped.is_empty()).then(|| format!("no rows for {}", skipped.join(", "))))
}

fn stage_preprocess(run: &mut Run, levels: &mut [Level]) -> Result<Option<String>> {
    let smoothing = run.cfg.smoothing_config()?;
    for level in levels.iter_mut() {
        if level.raw.is_empty() {
            continue;
        }
        let p = preprocess_matrix(&level.raw, &smoothing, run.cfg.scope)?;
        for (ds, origin) in &p.degenerate {
            run.manifest.notes.push(format!("{ds}: flat {} row {origin} excluded from clustering", level.g.name()));
        }
        level.pre = Some(p.matrix);
    }
    Ok(None)
}

fn stage_cluster(run: &mut Run, levels: &mut [Level]) -> Result<Option<String>> {
    let metric = run.cfg.distance()?;
    let mut skipped = Vec::new();
    for level in levels.iter_mut() {
        let name = level.g.name();
        let Some(pre) = level.pre.as_ref() else {
            skipped.push(format!("{name}: no rows"));
            continue;
        };
        let rows = pre.vectors();
        // silhouette needs k <= distinct rows - 1
        let limit = webload_core::clustering::distinct_rows(&rows).saturating_sub(1);
        let k_max = run.cfg.k_max.min(limit);
        if k_max < run.cfg.k_min {
            skipped.push(format!("{name}: {} row(s) cannot support k >= {}", rows.len(), run.cfg.k_min));
            continue;
        }
        if k_max < run.cfg.k_max {
            run.manifest.notes.push(format!("{name}: k range capped at {k_max} by the number of distinct rows"));
        }
        let sel = select_k(&rows, run.cfg.k_min, k_max, &metric, &run.cfg.seeds)?;
        let export = ModelExport::new(&sel.model, &pre.rows)?;
        run.write(&format!("model_{name}.json"), |w| formats::write_json(w, &export))?;
        run.write(&format!("silhouette_{name}.csv"), |w| formats::write_curve_csv(w, &sel.curve))?;
        let names = ranked_names(&sel.model.sizes, prefix(level.g));
        let scores = pca_2d(&rows);
        let pts: Vec<(f64, f64, usize)> =
            scores.iter().zip(&sel.model.assignments).map(|(&(x, y), &l)| (x, y, l)).collect();
        let chart = svg::scatter(&format!("{name} rows, first two principal components"), &pts, &names);
        run.write(&format!("pca_{name}.svg"), |w| w.write_all(chart.as_bytes()).map_err(|e| Error::io("<svg>", e)))?;
        let labeled = pre
            .rows
            .iter()
            .zip(&sel.model.assignments)
            .map(|(r, &label)| LabeledRow { dataset: r.dataset.clone(), origin: r.origin, label })
            .collect();
        level.clusters = Some(Clusters {
            rows: labeled,
            names,
            centroids: sel.model.centroids,
            sizes: sel.model.sizes,
        });
    }
    Ok((!skipped.is_empty()).then(|| skipped.join("; ")))
}

/// Fitted centroid model, as exported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidFit {
    pub label: usize,
    pub size: usize,
    pub centroid: Vec<f64>,
    pub pattern: PatternRecord,
}

fn stage_fit(run: &mut Run, levels: &mut [Level]) -> Result<Option<String>> {
    let mut skipped = Vec::new();
    for level in levels.iter() {
        let name = level.g.name();
        let Some(c) = &level.clusters else {
            skipped.push(name);
            continue;
        };
        let (degree, grid) = match level.g {
            Granularity::Daily => (3, daily_grid()),
            Granularity::Weekly => (2, weekly_grid()),
        };
        let mut fits = Vec::new();
        for (label, centroid) in c.centroids.iter().enumerate() {
            let model = fit_polynomial(centroid, degree, &grid)?;
            fits.push(CentroidFit {
                label,
                size: c.sizes[label],
                centroid: centroid.clone(),
                pattern: PatternRecord {
                    name: c.names[label].clone(),
                    granularity: level.g,
                    degree: model.degree,
                    coefficients: model.coefficients.clone(),
                    domain: model.domain,
                    description: format!("centroid of {} {name} row(s)", c.sizes[label]),
                    rmse: model.rmse,
                },
            });
        }
        fits.sort_by(|a, b| a.pattern.name.cmp(&b.pattern.name));
        run.write(&format!("fits_{name}.json"), |w| formats::write_json(w, &fits))?;

        let mut series = Vec::new();
        for f in &fits {
            let pts: Vec<(f64, f64)> = grid.iter().copied().zip(f.centroid.iter().copied()).collect();
            let model = PatternRecord::clone(&f.pattern).into_entry()?.model;
            let (lo, hi) = (grid[0], grid[grid.len() - 1]);
            let curve: Vec<(f64, f64)> = (0..=100)
                .map(|i| lo + (hi - lo) * i as f64 / 100.0)
                .map(|t| (t, model.evaluate(t)))
                .collect();
            series.push((f.pattern.name.clone(), pts, false));
            series.push((f.pattern.name.clone(), curve, true));
        }
        let x_label = match level.g {
            Granularity::Daily => "hour of day",
            Granularity::Weekly => "day of week (Monday = 1)",
        };
        let chart = svg::line_chart(&format!("{name} centroids and fitted curves"), &series, x_label, "standardized intensity");
        run.write(&format!("fits_{name}.svg"), |w| w.write_all(chart.as_bytes()).map_err(|e| Error::io("<svg>", e)))?;
    }
    Ok((!skipped.is_empty()).then(|| format!("no clusters for {}", skipped.join(", "))))
}

fn stage_associate(run: &mut Run, levels: &mut [Level]) -> Result<Option<String>> {
    let (Some(daily), Some(weekly)) = (&levels[0].clusters, &levels[1].clusters) else {
        return Ok(Some("needs both daily and weekly clusters".into()));
    };
    match association_table(&daily.rows, &weekly.rows, &daily.names, &weekly.names) {
        Ok(t) => {
            run.write("frequency_table.csv", |w| formats::write_frequency_csv(w, &t))?;
            Ok(None)
        }
        Err(webload_core::Error::NoOverlap) => Ok(Some("no day falls inside a clustered week".into())),
        Err(e) => Err(e.into()),
    }
}

fn stage_time_dependence(run: &mut Run, levels: &mut [Level]) -> Result<Option<String>> {
    let mut skipped = Vec::new();
    for level in levels.iter() {
        let name = level.g.name();
        let Some(Clusters { rows, names, .. }) = &level.clusters else {
            skipped.push(name);
            continue;
        };
        let scheme = match level.g {
            Granularity::Daily => TimeScheme::WeekdayWeekend,
            Granularity::Weekly => TimeScheme::Season(run.cfg.season),
        };
        let dists = time_dependence(rows, names, scheme)?;
        run.write(&format!("time_dependence_{name}.csv"), |w| formats::write_time_dependence_csv(w, &dists))?;
        let buckets: Vec<String> = scheme.buckets().iter().map(|b| b.to_string()).collect();
        let series: Vec<String> = dists.iter().map(|d| d.label.clone()).collect();
        let values: Vec<Vec<f64>> = dists.iter().map(|d| d.buckets.iter().map(|b| b.2).collect()).collect();
        let chart = svg::grouped_bars(&format!("{name} patterns by period"), &buckets, &series, &values, "% of rows");
        run.write(&format!("time_dependence_{name}.svg"), |w| {
            w.write_all(chart.as_bytes()).map_err(|e| Error::io("<svg>", e))
        })?;
    }
    Ok((!skipped.is_empty()).then(|| format!("no clusters for {}", skipped.join(", "))))
}
