//! Binning record streams and reshaping them into daily and weekly matrices.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::calendar::{self, SECS_PER_DAY, SECS_PER_HOUR};
use crate::trace::Record;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinWidth {
    Hour,
    Day,
}

impl BinWidth {
    pub const fn secs(self) -> i64 {
        match self {
            BinWidth::Hour => SECS_PER_HOUR,
            BinWidth::Day => SECS_PER_DAY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub start: i64,
    pub count: f64,
    /// Interior bin that received nothing and was materialized as zero.
    pub gap: bool,
}

/// Contiguous run of equal-width bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub dataset_id: String,
    pub bin_width: BinWidth,
    pub bins: Vec<Bin>,
}

impl TimeSeries {
    pub fn empty(dataset_id: impl Into<String>, bin_width: BinWidth) -> Self {
        TimeSeries { dataset_id: dataset_id.into(), bin_width, bins: Vec::new() }
    }

    /// Builds a series from sparse `(bin_start, count)` pairs, filling interior
    /// holes with flagged zero bins.
    pub fn from_sparse(
        dataset_id: impl Into<String>,
        bin_width: BinWidth,
        counts: impl IntoIterator<Item = (i64, f64)>,
    ) -> Result<Self> {
        let w = bin_width.secs();
        let mut sparse = BTreeMap::new();
        for (start, count) in counts {
            if start.rem_euclid(w) != 0 {
                return Err(Error::invalid(format!("bin start {start} not aligned to {w}s")));
            }
            if !(count >= 0.0) || !count.is_finite() {
                return Err(Error::invalid(format!("bin at {start} has invalid count {count}")));
            }
            *sparse.entry(start).or_insert(0.0) += count;
        }
        let mut bins = Vec::with_capacity(sparse.len());
        let mut next: Option<i64> = None;
        for (start, count) in sparse {
            if let Some(mut t) = next {
                while t < start {
                    bins.push(Bin { start: t, count: 0.0, gap: true });
                    t += w;
                }
            }
            bins.push(Bin { start, count, gap: false });
            next = Some(start + w);
        }
        Ok(TimeSeries { dataset_id: dataset_id.into(), bin_width, bins })
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn total(&self) -> f64 {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Starts of materialized empty bins.
    pub fn gaps(&self) -> Vec<i64> {
        self.bins.iter().filter(|b| b.gap).map(|b| b.start).collect()
    }

    /// Checks alignment, strict ordering and contiguity.
    pub fn validate(&self) -> Result<()> {
        let w = self.bin_width.secs();
        for pair in self.bins.windows(2) {
            if pair[1].start != pair[0].start + w {
                return Err(Error::invalid(format!("bins at {} and {} are not contiguous", pair[0].start, pair[1].start)));
            }
        }
        if let Some(b) = self.bins.iter().find(|b| b.start.rem_euclid(w) != 0 || !(b.count >= 0.0)) {
            return Err(Error::invalid(format!("bin at {} is misaligned or negative", b.start)));
        }
        Ok(())
    }

    /// Sums an hourly series into days, keeping only days with all 24 hours
    /// present. Returns the daily series and the dropped dates.
    pub fn daily_totals(&self) -> Result<(TimeSeries, Vec<NaiveDate>)> {
        if self.bin_width != BinWidth::Hour {
            return Err(Error::invalid("daily totals need an hourly series"));
        }
        let (days, dropped) = complete_groups(&self.bins, |b| calendar::date_of(b.start), 24);
        let series = TimeSeries::from_sparse(
            self.dataset_id.clone(),
            BinWidth::Day,
            days.into_iter().map(|(d, bins)| (calendar::midnight_of(d), bins.iter().map(|b| b.count).sum())),
        )?;
        Ok((series, dropped))
    }
}

/// Incremental binning of a record stream, for sources too large to hold in
/// memory.
#[derive(Debug, Clone)]
pub struct BinAccumulator {
    bin_width: BinWidth,
    bucket_width: Option<u64>,
    counts: BTreeMap<i64, u64>,
}

impl BinAccumulator {
    /// `bucket_width` is the summary source's bucket in seconds and must
    /// divide the bin width.
    pub fn new(bin_width: BinWidth, bucket_width: Option<u64>) -> Result<Self> {
        let w = bin_width.secs();
        if let Some(bucket) = bucket_width {
            if bucket == 0 || w % bucket as i64 != 0 {
                return Err(Error::IncompatibleBucket { bucket, bin: w as u64 });
            }
        }
        Ok(BinAccumulator { bin_width, bucket_width, counts: BTreeMap::new() })
    }

    /// Events count one each; summary records contribute their count.
    pub fn push(&mut self, rec: &Record) -> Result<()> {
        if matches!(rec, Record::Summary(_)) && self.bucket_width.is_none() {
            return Err(Error::invalid("summary records need a declared bucket width"));
        }
        let w = self.bin_width.secs();
        *self.counts.entry(rec.timestamp().div_euclid(w) * w).or_insert(0) += rec.weight();
        Ok(())
    }

    pub fn finish(self, dataset_id: impl Into<String>) -> Result<TimeSeries> {
        TimeSeries::from_sparse(dataset_id, self.bin_width, self.counts.into_iter().map(|(s, c)| (s, c as f64)))
    }
}

/// Bins a record stream. A bin covers `[start, start + width)`.
pub fn bin_events<'a>(
    dataset_id: impl Into<String>,
    records: impl IntoIterator<Item = &'a Record>,
    bucket_width: Option<u64>,
    bin_width: BinWidth,
) -> Result<TimeSeries> {
    let mut acc = BinAccumulator::new(bin_width, bucket_width)?;
    for rec in records {
        acc.push(rec)?;
    }
    acc.finish(dataset_id)
}

/// Bins fractional-second instants (e.g. generated events), one count each.
pub fn bin_instants(dataset_id: impl Into<String>, instants: &[f64], bin_width: BinWidth) -> Result<TimeSeries> {
    let w = bin_width.secs();
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for &t in instants {
        let sec = libm::floor(t) as i64;
        *counts.entry(sec.div_euclid(w) * w).or_insert(0) += 1;
    }
    TimeSeries::from_sparse(dataset_id, bin_width, counts.into_iter().map(|(s, c)| (s, c as f64)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Daily,
    Weekly,
}

impl Granularity {
    pub const fn width(self) -> usize {
        match self {
            Granularity::Daily => 24,
            Granularity::Weekly => 7,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Granularity::Daily => "daily",
            Granularity::Weekly => "weekly",
        }
    }
}

/// Whether matrix values are raw counts or standardized/smoothed values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Raw,
    Preprocessed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub dataset: String,
    /// The day (daily rows) or the week's Monday (weekly rows).
    pub origin: NaiveDate,
    pub values: Vec<f64>,
}

/// Fixed-width rows: 24 hourly values per day or 7 daily values per week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadMatrix {
    pub dataset_id: String,
    pub granularity: Granularity,
    pub provenance: Provenance,
    pub rows: Vec<MatrixRow>,
    /// Origins of incomplete days/weeks that were left out.
    pub dropped: Vec<NaiveDate>,
}

impl WorkloadMatrix {
    pub fn new(dataset_id: impl Into<String>, granularity: Granularity, provenance: Provenance) -> Self {
        WorkloadMatrix {
            dataset_id: dataset_id.into(),
            granularity,
            provenance,
            rows: Vec::new(),
            dropped: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.granularity.width()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row vectors in order.
    pub fn vectors(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }

    /// Checks row width, Monday anchoring and per-dataset origin ordering.
    pub fn validate(&self) -> Result<()> {
        let width = self.width();
        let mut last: BTreeMap<&str, NaiveDate> = BTreeMap::new();
        for row in &self.rows {
            if row.values.len() != width {
                return Err(Error::LengthMismatch(row.values.len(), width));
            }
            if self.granularity == Granularity::Weekly && calendar::iso_weekday(row.origin) != 1 {
                return Err(Error::invalid(format!("weekly row {} does not start on a Monday", row.origin)));
            }
            if let Some(prev) = last.insert(&row.dataset, row.origin) {
                if row.origin <= prev {
                    return Err(Error::invalid(format!("origins not increasing at {}", row.origin)));
                }
            }
        }
        Ok(())
    }

    /// Concatenates matrices of the same granularity and provenance.
    pub fn combine(dataset_id: impl Into<String>, parts: &[WorkloadMatrix]) -> Result<WorkloadMatrix> {
        let first = parts.first().ok_or_else(|| Error::invalid("nothing to combine"))?;
        let mut out = WorkloadMatrix::new(dataset_id, first.granularity, first.provenance);
        for m in parts {
            if m.granularity != first.granularity || m.provenance != first.provenance {
                return Err(Error::invalid("cannot combine matrices of different granularity or provenance"));
            }
            out.rows.extend(m.rows.iter().cloned());
            out.dropped.extend(m.dropped.iter().copied());
        }
        out.validate()?;
        Ok(out)
    }
}

/// Groups bins by key and keeps groups of exactly `size` bins. Relies on the
/// series being contiguous, so a group with `size` members is complete.
fn complete_groups<K: Ord + Copy>(bins: &[Bin], key: impl Fn(&Bin) -> K, size: usize) -> (Vec<(K, Vec<Bin>)>, Vec<K>) {
    let mut groups: BTreeMap<K, Vec<Bin>> = BTreeMap::new();
    for b in bins {
        groups.entry(key(b)).or_default().push(*b);
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (k, g) in groups {
        if g.len() == size {
            kept.push((k, g));
        } else {
            dropped.push(k);
        }
    }
    (kept, dropped)
}

/// One row per complete calendar day (UTC) with its 24 hourly counts.
pub fn to_daily_matrix(ts: &TimeSeries) -> Result<WorkloadMatrix> {
    if ts.bin_width != BinWidth::Hour {
        return Err(Error::invalid("daily matrix needs an hourly series"));
    }
    ts.validate()?;
    let (days, dropped) = complete_groups(&ts.bins, |b| calendar::date_of(b.start), 24);
    let mut m = WorkloadMatrix::new(ts.dataset_id.clone(), Granularity::Daily, Provenance::Raw);
    m.dropped = dropped;
    m.rows = days
        .into_iter()
        .map(|(origin, bins)| MatrixRow {
            dataset: ts.dataset_id.clone(),
            origin,
            values: bins.iter().map(|b| b.count).collect(),
        })
        .collect();
    Ok(m)
}

/// One row per complete Monday-to-Sunday week with its 7 daily counts.
pub fn to_weekly_matrix(ts: &TimeSeries) -> Result<WorkloadMatrix> {
    if ts.bin_width != BinWidth::Day {
        return Err(Error::invalid("weekly matrix needs a daily series"));
    }
    ts.validate()?;
    let (weeks, dropped) = complete_groups(&ts.bins, |b| calendar::monday_of(calendar::date_of(b.start)), 7);
    let mut m = WorkloadMatrix::new(ts.dataset_id.clone(), Granularity::Weekly, Provenance::Raw);
    m.dropped = dropped;
    m.rows = weeks
        .into_iter()
        .map(|(origin, bins)| MatrixRow {
            dataset: ts.dataset_id.clone(),
            origin,
            values: bins.iter().map(|b| b.count).collect(),
        })
        .collect();
    Ok(m)
}

/// Weekly rows straight from an hourly series. A week counts as complete
/// only when each of its days has all 24 hours.
pub fn weekly_from_hourly(ts: &TimeSeries) -> Result<WorkloadMatrix> {
    let (daily, partial) = ts.daily_totals()?;
    let mut m = to_weekly_matrix(&daily)?;
    let (keep, drop): (Vec<MatrixRow>, Vec<MatrixRow>) = m
        .rows
        .drain(..)
        .partition(|r| !partial.iter().any(|d| calendar::monday_of(*d) == r.origin));
    m.rows = keep;
    m.dropped.extend(drop.iter().map(|r| r.origin));
    m.dropped.sort_unstable();
    Ok(m)
}

/// Dates covered by a weekly row.
pub fn week_days(monday: NaiveDate) -> impl Iterator<Item = NaiveDate> {
    (0..7).map(move |i| monday + Days::new(i))
}
