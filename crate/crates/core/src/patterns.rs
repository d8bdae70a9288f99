//! Named workload patterns and the tables built from cluster labels.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::calendar;
use crate::clustering::ClusterModel;
use crate::polyfit::PolynomialModel;
use crate::timeseries::Granularity;
use crate::{Error, Result};

pub const DAILY_DOMAIN: (f64, f64) = (0.0, 24.0);
pub const WEEKLY_DOMAIN: (f64, f64) = (1.0, 8.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEntry {
    pub name: String,
    pub granularity: Granularity,
    pub description: String,
    pub model: PolynomialModel,
}

/// Built-in daily (cubic) and weekly (quadratic) shapes plus user additions.
///
/// Built-in models live on the standardized scale: `t` is the hour `0..24`
/// for daily shapes and the ISO weekday `1..8` for weekly ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternLibrary {
    entries: BTreeMap<String, PatternEntry>,
}

pub const BUILTIN_NAMES: [&str; 6] = ["D1", "D2", "D3", "W1", "W2", "W3"];

fn builtin(name: &str, granularity: Granularity, description: &str, coefficients: &[f64]) -> PatternEntry {
    let domain = match granularity {
        Granularity::Daily => DAILY_DOMAIN,
        Granularity::Weekly => WEEKLY_DOMAIN,
    };
    PatternEntry {
        name: name.to_string(),
        granularity,
        description: description.to_string(),
        model: PolynomialModel::new(coefficients.to_vec(), domain).expect("built-in coefficients are well formed"),
    }
}

impl Default for PatternLibrary {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PatternLibrary {
    pub fn builtin() -> Self {
        let entries = [
            builtin("D1", Granularity::Daily, "daytime active, rapid fall from peak to off-peak", &[-0.001, 0.029, -0.221, -0.728]),
            // leading coefficient is published rounded to 0.000
            builtin("D2", Granularity::Daily, "night-time active, gradual changes", &[0.0, 0.011, -0.214, 0.648]),
            builtin("D3", Granularity::Daily, "daytime active, gradual fall from peak to off-peak", &[-0.001, 0.031, -0.166, -0.708]),
            builtin("W1", Granularity::Weekly, "weekday active, steadily decreasing", &[0.041, -0.516, 1.299]),
            builtin("W2", Granularity::Weekly, "weekend active, steadily rising", &[0.005, 0.087, -0.535]),
            builtin("W3", Granularity::Weekly, "midweek active, smooth changes", &[-0.079, 0.352, 0.251]),
        ];
        PatternLibrary { entries: entries.into_iter().map(|e| (e.name.clone(), e)).collect() }
    }

    pub fn get(&self, name: &str) -> Result<&PatternEntry> {
        self.entries.get(name).ok_or_else(|| Error::UnknownPattern(name.to_string()))
    }

    /// Adds a user pattern; names must be new.
    pub fn add(&mut self, entry: PatternEntry) -> Result<()> {
        if self.entries.contains_key(&entry.name) {
            return Err(Error::invalid(alloc::format!("pattern `{}` already exists", entry.name)));
        }
        self.entries.insert(entry.name.clone(), entry);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &PatternEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn evaluate_pattern(p: &PolynomialModel, t: f64) -> f64 {
    p.evaluate(t)
}

/// Stored centroid of `label`.
pub fn centroid_of(model: &ClusterModel, label: usize) -> Result<&[f64]> {
    model.centroids.get(label).map(Vec::as_slice).ok_or(Error::UnknownLabel(label))
}

/// A clustered matrix row: where it came from and which cluster took it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub dataset: String,
    pub origin: NaiveDate,
    pub label: usize,
}

/// Daily-pattern shares inside each weekly pattern, in percent of all
/// matched days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    /// Weekly pattern names.
    pub row_labels: Vec<String>,
    /// Daily pattern names.
    pub col_labels: Vec<String>,
    pub percent: Vec<Vec<f64>>,
    pub counts: Vec<Vec<usize>>,
    /// Distinct datasets contributing to each cell.
    pub datasets: Vec<Vec<usize>>,
    pub row_totals: Vec<f64>,
    pub row_datasets: Vec<usize>,
    pub col_totals: Vec<f64>,
    pub col_datasets: Vec<usize>,
    pub grand_total: f64,
    pub total_datasets: usize,
    pub matched_days: usize,
}

/// Cross-tabulates daily labels against the labels of the weeks containing
/// them. A day matches a week when both come from the same dataset and the
/// day falls in that Monday-anchored week.
pub fn association_table(
    daily: &[LabeledRow],
    weekly: &[LabeledRow],
    daily_names: &[String],
    weekly_names: &[String],
) -> Result<FrequencyTable> {
    let week_label: BTreeMap<(&str, NaiveDate), usize> =
        weekly.iter().map(|w| ((w.dataset.as_str(), w.origin), w.label)).collect();
    let (rows, cols) = (weekly_names.len(), daily_names.len());
    let mut counts = vec![vec![0usize; cols]; rows];
    let mut cell_sets: Vec<Vec<BTreeSet<&str>>> = vec![vec![BTreeSet::new(); cols]; rows];
    let mut matched = 0usize;
    for d in daily {
        let Some(&w) = week_label.get(&(d.dataset.as_str(), calendar::monday_of(d.origin))) else {
            continue;
        };
        if w >= rows {
            return Err(Error::UnknownLabel(w));
        }
        if d.label >= cols {
            return Err(Error::UnknownLabel(d.label));
        }
        counts[w][d.label] += 1;
        cell_sets[w][d.label].insert(d.dataset.as_str());
        matched += 1;
    }
    if matched == 0 {
        return Err(Error::NoOverlap);
    }
    let pct = |c: usize| 100.0 * c as f64 / matched as f64;
    let union = |sets: &mut dyn Iterator<Item = &BTreeSet<&str>>| {
        sets.fold(BTreeSet::new(), |mut acc, s| {
            acc.extend(s.iter().copied());
            acc
        })
        .len()
    };
    let percent: Vec<Vec<f64>> = counts.iter().map(|r| r.iter().map(|&c| pct(c)).collect()).collect();
    let row_totals = counts.iter().map(|r| pct(r.iter().sum())).collect();
    let col_totals = (0..cols).map(|j| pct(counts.iter().map(|r| r[j]).sum())).collect();
    let row_datasets = cell_sets.iter().map(|r| union(&mut r.iter())).collect();
    let col_datasets = (0..cols).map(|j| union(&mut cell_sets.iter().map(|r| &r[j]))).collect();
    let total_datasets = union(&mut cell_sets.iter().flatten());
    Ok(FrequencyTable {
        row_labels: weekly_names.to_vec(),
        col_labels: daily_names.to_vec(),
        grand_total: percent.iter().flatten().sum(),
        percent,
        datasets: cell_sets.iter().map(|r| r.iter().map(BTreeSet::len).collect()).collect(),
        counts,
        row_totals,
        row_datasets,
        col_totals,
        col_datasets,
        total_datasets,
        matched_days: matched,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeasonScheme {
    /// Dec–Feb winter, Mar–May spring, Jun–Aug summer, Sep–Nov fall.
    #[default]
    Meteorological,
    /// Q1 = Jan–Mar through Q4 = Oct–Dec.
    CalendarQuarter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    WeekdayWeekend,
    Season(SeasonScheme),
}

impl TimeScheme {
    pub fn buckets(&self) -> &'static [&'static str] {
        match self {
            TimeScheme::WeekdayWeekend => &["weekday", "weekend"],
            TimeScheme::Season(SeasonScheme::Meteorological) => &["winter", "spring", "summer", "fall"],
            TimeScheme::Season(SeasonScheme::CalendarQuarter) => &["Q1", "Q2", "Q3", "Q4"],
        }
    }

    pub fn bucket_of(&self, date: NaiveDate) -> usize {
        match self {
            TimeScheme::WeekdayWeekend => usize::from(calendar::is_weekend(date)),
            TimeScheme::Season(SeasonScheme::Meteorological) => (date.month() as usize % 12) / 3,
            TimeScheme::Season(SeasonScheme::CalendarQuarter) => date.month0() as usize / 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub label: String,
    pub members: usize,
    /// `(bucket, count, percent of members)`, in scheme order.
    pub buckets: Vec<(String, usize, f64)>,
}

/// Share of each label's rows falling in each time bucket.
pub fn time_dependence(rows: &[LabeledRow], names: &[String], scheme: TimeScheme) -> Result<Vec<LabelDistribution>> {
    let buckets = scheme.buckets();
    let mut counts = vec![vec![0usize; buckets.len()]; names.len()];
    for r in rows {
        let per_label = counts.get_mut(r.label).ok_or(Error::UnknownLabel(r.label))?;
        per_label[scheme.bucket_of(r.origin)] += 1;
    }
    Ok(names
        .iter()
        .zip(counts)
        .map(|(name, c)| {
            let members: usize = c.iter().sum();
            LabelDistribution {
                label: name.clone(),
                members,
                buckets: buckets
                    .iter()
                    .zip(c)
                    .map(|(b, n)| {
                        let pct = if members == 0 { 0.0 } else { 100.0 * n as f64 / members as f64 };
                        (b.to_string(), n, pct)
                    })
                    .collect(),
            }
        })
        .collect())
}
