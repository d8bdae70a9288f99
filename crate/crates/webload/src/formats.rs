//! CSV and JSON persistence for matrices, profiles, schedules, models and
//! tables.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! CSV written here reloads to bit-identical values.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use webload_core::clustering::{ClusterModel, CurvePoint};
use webload_core::distance::DistanceConfig;
use webload_core::patterns::{FrequencyTable, LabelDistribution, PatternEntry, PatternLibrary};
use webload_core::polyfit::PolynomialModel;
use webload_core::stats::DatasetProfile;
use webload_core::synth::Schedule;
use webload_core::timeseries::{Granularity, MatrixRow, Provenance, TimeSeries, WorkloadMatrix};

use crate::error::{Error, Result};

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Writes `write` into `path`, creating parent directories.
pub fn write_file(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut out = create(path)?;
    write(&mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(w: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io("<json>", e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(open(path)?))?)
}

/// `dataset,origin,v0..v23` (or `v0..v6`).
pub fn write_matrix_csv(w: &mut dyn Write, m: &WorkloadMatrix) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["dataset".to_string(), "origin".to_string()];
    header.extend((0..m.width()).map(|i| format!("v{i}")));
    out.write_record(&header)?;
    for row in &m.rows {
        let mut rec = vec![row.dataset.clone(), row.origin.to_string()];
        rec.extend(row.values.iter().map(f64::to_string));
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::io("<matrix>", e))
}

/// Reloads a matrix CSV. Granularity follows from the column count; the
/// result is tagged raw, since only raw matrices are persisted in this form.
pub fn read_matrix_csv(r: impl Read, dataset_id: &str) -> Result<WorkloadMatrix> {
    let mut rd = csv::Reader::from_reader(r);
    let cols = rd.headers()?.len();
    let granularity = match cols.checked_sub(2) {
        Some(24) => Granularity::Daily,
        Some(7) => Granularity::Weekly,
        _ => return Err(Error::format(format!("matrix CSV has {cols} columns; expected 26 or 9"))),
    };
    let mut m = WorkloadMatrix::new(dataset_id, granularity, Provenance::Raw);
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let origin: NaiveDate = rec[1]
            .parse()
            .map_err(|_| Error::format(format!("row {}: bad origin {:?}", i + 1, &rec[1])))?;
        let values = rec
            .iter()
            .skip(2)
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::format(format!("row {}: non-numeric value", i + 1)))?;
        m.rows.push(MatrixRow { dataset: rec[0].to_string(), origin, values });
    }
    m.validate()?;
    Ok(m)
}

pub fn load_matrix(path: &Path) -> Result<WorkloadMatrix> {
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    read_matrix_csv(open(path)?, &id)
}

/// `bin_start,count,gap` with ISO timestamps alongside epoch seconds.
pub fn write_series_csv(w: &mut dyn Write, ts: &TimeSeries) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["bin_start", "utc", "count", "gap"])?;
    for b in &ts.bins {
        out.write_record([
            b.start.to_string(),
            webload_core::calendar::format_instant(b.start),
            b.count.to_string(),
            b.gap.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<series>", e))
}

/// `dataset,granularity,origin,cv,burstiness`, one line per row, then a
/// summary line with origin `mean`.
pub fn write_profile_csv(w: &mut dyn Write, p: &DatasetProfile) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["dataset", "granularity", "origin", "cv", "burstiness"])?;
    let g = p.granularity.name();
    for r in &p.per_row {
        out.write_record([&r.dataset, g, &r.origin.to_string(), &r.cv.to_string(), &r.burstiness.to_string()])?;
    }
    out.write_record([&p.dataset_id, g, "mean", &p.cv_mean.to_string(), &p.burstiness_mean.to_string()])?;
    out.flush().map_err(|e| Error::io("<profile>", e))
}

/// `interval_start,rate` in requests per hour.
pub fn write_schedule_csv(w: &mut dyn Write, s: &Schedule) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["interval_start", "rate"])?;
    for e in &s.entries {
        out.write_record([e.start.to_string(), e.rate.to_string()])?;
    }
    out.flush().map_err(|e| Error::io("<schedule>", e))
}

/// Reads `interval_start,rate`; the resolution is the spacing of the first
/// two entries, or one hour for a single entry.
pub fn read_schedule_csv(r: impl Read) -> Result<Vec<(i64, f64)>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let start = rec[0].parse().map_err(|_| Error::format(format!("bad interval_start {:?}", &rec[0])))?;
        let rate = rec[1].parse().map_err(|_| Error::format(format!("bad rate {:?}", &rec[1])))?;
        out.push((start, rate));
    }
    Ok(out)
}

/// One assignment in a model export, keyed by row origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub dataset: String,
    pub origin: NaiveDate,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelExport {
    pub k: usize,
    pub metric: DistanceConfig,
    pub seed: u64,
    pub centroids: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    pub silhouette: f64,
    pub inertia: f64,
    pub converged: bool,
    pub assignments: Vec<AssignmentRecord>,
}

impl ModelExport {
    pub fn new(model: &ClusterModel, rows: &[MatrixRow]) -> Result<Self> {
        if rows.len() != model.assignments.len() {
            return Err(Error::format("model and matrix have different row counts"));
        }
        Ok(ModelExport {
            k: model.k,
            metric: model.metric,
            seed: model.seed,
            centroids: model.centroids.clone(),
            sizes: model.sizes.clone(),
            silhouette: model.silhouette,
            inertia: model.inertia,
            converged: model.converged,
            assignments: rows
                .iter()
                .zip(&model.assignments)
                .map(|(r, &label)| AssignmentRecord { dataset: r.dataset.clone(), origin: r.origin, label })
                .collect(),
        })
    }
}

/// `k,silhouette,inertia`.
pub fn write_curve_csv(w: &mut dyn Write, curve: &[CurvePoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "silhouette", "inertia"])?;
    for p in curve {
        out.write_record([p.k.to_string(), p.silhouette.to_string(), p.inertia.to_string()])?;
    }
    out.flush().map_err(|e| Error::io("<curve>", e))
}

/// Flat pattern record used for library JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRecord {
    pub name: String,
    pub granularity: Granularity,
    pub degree: u8,
    pub coefficients: Vec<f64>,
    pub domain: (f64, f64),
    pub description: String,
    #[serde(default)]
    pub rmse: f64,
}

impl From<&PatternEntry> for PatternRecord {
    fn from(e: &PatternEntry) -> Self {
        PatternRecord {
            name: e.name.clone(),
            granularity: e.granularity,
            degree: e.model.degree,
            coefficients: e.model.coefficients.clone(),
            domain: e.model.domain,
            description: e.description.clone(),
            rmse: e.model.rmse,
        }
    }
}

impl PatternRecord {
    pub fn into_entry(self) -> Result<PatternEntry> {
        let mut model = PolynomialModel::new(self.coefficients, self.domain)?;
        if model.degree != self.degree {
            return Err(Error::format(format!("{}: degree does not match coefficient count", self.name)));
        }
        model.rmse = self.rmse;
        Ok(PatternEntry { name: self.name, granularity: self.granularity, description: self.description, model })
    }
}

pub fn library_records(lib: &PatternLibrary) -> Vec<PatternRecord> {
    lib.iter().map(PatternRecord::from).collect()
}

/// Built-ins plus the patterns in a library JSON file.
pub fn load_library(path: &Path) -> Result<PatternLibrary> {
    let records: Vec<PatternRecord> = read_json(path)?;
    let mut lib = PatternLibrary::builtin();
    for r in records {
        if lib.get(&r.name).is_ok() {
            continue;
        }
        lib.add(r.into_entry()?)?;
    }
    Ok(lib)
}

/// Long form: `weekly,daily,count,percent,datasets`, with `total` rows and
/// columns.
pub fn write_frequency_csv(w: &mut dyn Write, t: &FrequencyTable) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["weekly", "daily", "count", "percent", "datasets"])?;
    for (i, wk) in t.row_labels.iter().enumerate() {
        for (j, d) in t.col_labels.iter().enumerate() {
            out.write_record([
                wk,
                d,
                &t.counts[i][j].to_string(),
                &t.percent[i][j].to_string(),
                &t.datasets[i][j].to_string(),
            ])?;
        }
        let n: usize = t.counts[i].iter().sum();
        out.write_record([wk, "total", &n.to_string(), &t.row_totals[i].to_string(), &t.row_datasets[i].to_string()])?;
    }
    for (j, d) in t.col_labels.iter().enumerate() {
        let n: usize = t.counts.iter().map(|r| r[j]).sum();
        out.write_record(["total", d, &n.to_string(), &t.col_totals[j].to_string(), &t.col_datasets[j].to_string()])?;
    }
    out.write_record([
        "total",
        "total",
        &t.matched_days.to_string(),
        &t.grand_total.to_string(),
        &t.total_datasets.to_string(),
    ])?;
    out.flush().map_err(|e| Error::io("<frequency>", e))
}

/// `pattern,bucket,count,percent`.
pub fn write_time_dependence_csv(w: &mut dyn Write, dists: &[LabelDistribution]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["pattern", "bucket", "count", "percent"])?;
    for d in dists {
        for (bucket, n, pct) in &d.buckets {
            out.write_record([&d.label, bucket, &n.to_string(), &pct.to_string()])?;
        }
    }
    out.flush().map_err(|e| Error::io("<time-dependence>", e))
}

/// Epoch seconds, one per line.
pub fn write_instants(w: &mut dyn Write, instants: &[f64]) -> Result<()> {
    for t in instants {
        writeln!(w, "{t}").map_err(|e| Error::io("<events>", e))?;
    }
    Ok(())
}

pub fn read_instants(r: impl Read) -> Result<Vec<f64>> {
    let mut s = String::new();
    std::io::BufReader::new(r).read_to_string(&mut s).map_err(|e| Error::io("<events>", e))?;
    s.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<f64>().map_err(|_| Error::format(format!("bad instant {l:?}"))))
        .collect()
}
