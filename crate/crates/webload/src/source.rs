//! Reading traces from files or URLs into record streams.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::NaiveDate;
use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};
use webload_core::calendar::SECS_PER_HOUR;
use webload_core::timeseries::{BinAccumulator, BinWidth, TimeSeries};
use webload_core::trace::{
    parse_clf_line, parse_summary_record, Compression, Record, SourceDescriptor, SourceFormat,
};

use crate::error::{Error, Result};

/// Line accounting for one source. `parsed + skipped + malformed == total`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadSummary {
    pub total: u64,
    pub parsed: u64,
    pub skipped: u64,
    pub malformed: u64,
    /// Records parsed but dropped by the project filter.
    #[serde(default)]
    pub filtered: u64,
    /// First few malformed lines as `line N: reason`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<String>,
}

impl ReadSummary {
    const MAX_SAMPLES: usize = 5;

    pub fn merge(&mut self, other: &ReadSummary) {
        self.total += other.total;
        self.parsed += other.parsed;
        self.skipped += other.skipped;
        self.malformed += other.malformed;
        self.filtered += other.filtered;
        for s in &other.samples {
            if self.samples.len() < Self::MAX_SAMPLES {
                self.samples.push(s.clone());
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReadOptions {
    /// Abort on the first malformed line instead of counting it.
    pub strict: bool,
    /// Bucket start for summary sources; inferred from the name when absent.
    pub bucket_start: Option<i64>,
    /// Keep only summary records of this project.
    pub project: Option<String>,
}

impl ReadOptions {
    pub fn strict() -> Self {
        ReadOptions { strict: true, ..Default::default() }
    }
}

fn is_url(location: &str) -> bool {
    location.starts_with("http://") || location.starts_with("https://")
}

/// Opens a path or http(s) URL, decompressing when the descriptor says gzip.
pub fn open(location: &str, compression: Compression) -> Result<Box<dyn BufRead>> {
    let raw: Box<dyn Read> = if is_url(location) {
        let resp = reqwest::blocking::get(location)
            .map_err(|e| Error::Transport { url: location.into(), reason: e.to_string() })?;
        if !resp.status().is_success() {
            return Err(Error::Http { status: resp.status().as_u16(), url: location.into() });
        }
        Box::new(resp)
    } else {
        Box::new(File::open(location).map_err(|e| Error::io(location, e))?)
    };
    Ok(match compression {
        Compression::None => Box::new(BufReader::with_capacity(1 << 16, raw)),
        Compression::Gzip => Box::new(BufReader::with_capacity(1 << 16, MultiGzDecoder::new(raw))),
    })
}

/// Compression implied by a `.gz` suffix.
pub fn compression_for(location: &str) -> Compression {
    if location.ends_with(".gz") {
        Compression::Gzip
    } else {
        Compression::None
    }
}

/// Hour start encoded in a pageview dump name (`pageviews-YYYYMMDD-HH0000`)
/// or in a cache path (`.../YYYY/MM/DD/HH.gz`).
pub fn bucket_start_from_name(location: &str) -> Option<i64> {
    let name = location.rsplit('/').next()?;
    if let Some(rest) = name.strip_prefix("pageviews-") {
        let date = NaiveDate::parse_from_str(rest.get(..8)?, "%Y%m%d").ok()?;
        let hour: u32 = rest.get(9..11)?.parse().ok()?;
        return hour_start(date, hour);
    }
    let mut parts = location.trim_end_matches(".gz").rsplit('/');
    let hour: u32 = parts.next()?.parse().ok()?;
    let day: u32 = parts.next()?.parse().ok()?;
    let month: u32 = parts.next()?.parse().ok()?;
    let year: i32 = parts.next()?.parse().ok()?;
    hour_start(NaiveDate::from_ymd_opt(year, month, day)?, hour)
}

fn hour_start(date: NaiveDate, hour: u32) -> Option<i64> {
    (hour < 24).then(|| date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp() + hour as i64 * SECS_PER_HOUR)
}

/// Streams records in file order to `sink`.
pub fn for_each_record(
    location: &str,
    desc: &SourceDescriptor,
    opts: &ReadOptions,
    mut sink: impl FnMut(Record) -> Result<()>,
) -> Result<ReadSummary> {
    desc.validate()?;
    let bucket_start = match desc.format {
        SourceFormat::Clf => 0,
        SourceFormat::Summary => opts.bucket_start.or_else(|| bucket_start_from_name(location)).ok_or_else(|| {
            Error::Precondition(format!("{location}: cannot infer the bucket start from the name"))
        })?,
    };
    let mut reader = open(location, desc.compression)?;
    let mut summary = ReadSummary::default();
    let mut buf = Vec::with_capacity(256);
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(|e| match desc.compression {
            Compression::Gzip => Error::Decompression { location: location.into(), source: e },
            Compression::None => Error::io(location, e),
        })?;
        if n == 0 {
            break;
        }
        summary.total += 1;
        // old traces carry stray non-UTF-8 bytes in request paths
        let line = String::from_utf8_lossy(&buf);
        let parsed = match desc.format {
            SourceFormat::Clf => parse_clf_line(&line, desc.timezone_policy).map(|o| o.map(Record::Event)),
            SourceFormat::Summary => parse_summary_record(&line, bucket_start, desc).map(|o| o.map(Record::Summary)),
        };
        match parsed {
            Ok(Some(rec)) => {
                summary.parsed += 1;
                if let (Some(p), Record::Summary(s)) = (&opts.project, &rec) {
                    if s.labels.first().map(|(_, v)| v != p).unwrap_or(true) {
                        summary.filtered += 1;
                        continue;
                    }
                }
                sink(rec)?;
            }
            Ok(None) => summary.skipped += 1,
            Err(e) => {
                if opts.strict {
                    return Err(Error::format(format!("{location}: line {}: {e}", summary.total)));
                }
                summary.malformed += 1;
                if summary.samples.len() < ReadSummary::MAX_SAMPLES {
                    summary.samples.push(format!("line {}: {e}", summary.total));
                }
            }
        }
    }
    Ok(summary)
}

/// Reads a whole source into memory.
pub fn read_source(location: &str, desc: &SourceDescriptor, opts: &ReadOptions) -> Result<(Vec<Record>, ReadSummary)> {
    let mut out = Vec::new();
    let summary = for_each_record(location, desc, opts, |r| {
        out.push(r);
        Ok(())
    })?;
    Ok((out, summary))
}

/// Bins one or more sources of the same dataset into an hourly series
/// without holding their records.
pub fn hourly_series(
    dataset_id: &str,
    locations: &[String],
    desc: &SourceDescriptor,
    opts: &ReadOptions,
) -> Result<(TimeSeries, ReadSummary)> {
    let mut acc = BinAccumulator::new(BinWidth::Hour, desc.bucket_width)?;
    let mut total = ReadSummary::default();
    for loc in locations {
        let s = for_each_record(loc, desc, opts, |r| acc.push(&r).map_err(Error::from))?;
        total.merge(&s);
    }
    Ok((acc.finish(dataset_id)?, total))
}

pub fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}
