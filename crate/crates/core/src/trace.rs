//! Access-log and pageview-count line parsing.
//!
//! Two raw shapes are understood: event-based Common Log Format lines (one
//! line per request) and summary-based count lines (`project page count
//! bytes`, one file per hour).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::calendar;
use crate::{Error, Result};

/// One request from an event-based trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub client: String,
    pub method: String,
    pub path: String,
    /// `None` when the log carries `-`.
    pub status: Option<u16>,
    /// `None` when the log carries `-`.
    pub bytes: Option<u64>,
}

/// One pre-aggregated count from a summary-based trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub bucket_start: i64,
    pub count: u64,
    pub labels: Vec<(String, String)>,
}

/// Either shape, as yielded by a source reader.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Record {
    Event(TraceEvent),
    Summary(SummaryRecord),
}

impl Record {
    pub fn timestamp(&self) -> i64 {
        match self {
            Record::Event(e) => e.timestamp,
            Record::Summary(s) => s.bucket_start,
        }
    }

    /// Number of requests the record stands for.
    pub fn weight(&self) -> u64 {
        match self {
            Record::Event(_) => 1,
            Record::Summary(s) => s.count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceFormat {
    Clf,
    Summary,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimezonePolicy {
    /// Apply the embedded `±zzzz` offset; lines without one are rejected.
    #[default]
    UseOffset,
    /// Read the wall clock as UTC, ignoring any offset.
    AssumeUtc,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Compression {
    #[default]
    None,
    Gzip,
}

/// How to read one source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDescriptor {
    pub format: SourceFormat,
    /// Bucket width in seconds; summary sources only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bucket_width: Option<u64>,
    #[serde(default)]
    pub timezone_policy: TimezonePolicy,
    #[serde(default)]
    pub compression: Compression,
}

impl SourceDescriptor {
    pub fn clf() -> Self {
        SourceDescriptor {
            format: SourceFormat::Clf,
            bucket_width: None,
            timezone_policy: TimezonePolicy::UseOffset,
            compression: Compression::None,
        }
    }

    pub fn summary(bucket_width: u64) -> Self {
        SourceDescriptor {
            format: SourceFormat::Summary,
            bucket_width: Some(bucket_width),
            timezone_policy: TimezonePolicy::AssumeUtc,
            compression: Compression::None,
        }
    }

    pub fn with_compression(mut self, compression: Compression) -> Self {
        self.compression = compression;
        self
    }

    pub fn with_timezone(mut self, policy: TimezonePolicy) -> Self {
        self.timezone_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match (self.format, self.bucket_width) {
            (SourceFormat::Clf, None) => Ok(()),
            (SourceFormat::Summary, Some(w)) if w > 0 => Ok(()),
            (SourceFormat::Clf, Some(_)) => Err(Error::invalid("bucket_width only applies to summary sources")),
            (SourceFormat::Summary, _) => Err(Error::invalid("summary sources need a positive bucket_width")),
        }
    }
}

fn malformed(position: usize, reason: &str) -> Error {
    Error::MalformedLine { position, reason: reason.to_string() }
}

/// Parses one Common Log Format line.
///
/// Returns `Ok(None)` for blank lines. `position` in a
/// [`Error::MalformedLine`] is the byte column where parsing gave up.
///
/// The request field is taken leniently: `"GET/images/a.gif HTTP/1.0"` (no
/// space after the method, as seen in some World Cup renderings) splits into
/// method `GET` and path `/images/a.gif`.
pub fn parse_clf_line(line: &str, policy: TimezonePolicy) -> Result<Option<TraceEvent>> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() {
        return Ok(None);
    }
    let open = line.find('[').ok_or_else(|| malformed(0, "no timestamp field"))?;
    let close = line[open..]
        .find(']')
        .map(|i| open + i)
        .ok_or_else(|| malformed(open, "unterminated timestamp"))?;
    let client = line[..open]
        .split_whitespace()
        .next()
        .ok_or_else(|| malformed(0, "missing host"))?
        .to_string();
    let timestamp = parse_clf_timestamp(&line[open + 1..close], policy).map_err(|r| malformed(open + 1, r))?;

    let rest = &line[close + 1..];
    let q1 = rest.find('"').ok_or_else(|| malformed(close + 1, "missing request field"))?;
    let q2 = rest.rfind('"').filter(|&q| q > q1).ok_or_else(|| malformed(close + 1 + q1, "unterminated request"))?;
    let (method, path) = split_request(&rest[q1 + 1..q2]);

    let tail_at = close + 1 + q2 + 1;
    let mut tail = rest[q2 + 1..].split_whitespace();
    let status = match tail.next() {
        None => return Err(malformed(tail_at, "missing status")),
        Some("-") => None,
        Some(s) => match s.parse::<u16>() {
            Ok(code) if (100..=599).contains(&code) => Some(code),
            _ => return Err(malformed(tail_at, "status is not an HTTP code")),
        },
    };
    let bytes = match tail.next() {
        None | Some("-") => None,
        Some(s) => Some(s.parse::<u64>().map_err(|_| malformed(tail_at, "bytes is not a non-negative integer"))?),
    };

    Ok(Some(TraceEvent { timestamp, client, method, path, status, bytes }))
}

fn split_request(request: &str) -> (String, String) {
    let mut parts = request.split_whitespace();
    let Some(first) = parts.next() else {
        return (String::new(), String::new());
    };
    let letters = first.bytes().take_while(u8::is_ascii_uppercase).count();
    if letters == first.len() {
        let path = parts.next().unwrap_or("");
        (first.to_string(), path.to_string())
    } else if letters > 0 && first.as_bytes()[letters] == b'/' {
        (first[..letters].to_string(), first[letters..].to_string())
    } else {
        (String::new(), first.to_string())
    }
}

const MONTHS: [&str; 12] = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"];

/// `dd/Mon/yyyy:HH:MM:SS[ ±zzzz]`
fn parse_clf_timestamp(s: &str, policy: TimezonePolicy) -> core::result::Result<i64, &'static str> {
    let (clock, offset) = match s.split_once(' ') {
        Some((c, o)) => (c, Some(o.trim())),
        None => (s, None),
    };
    let b = clock.as_bytes();
    if b.len() != 20 || b[2] != b'/' || b[6] != b'/' || b[11] != b':' || b[14] != b':' || b[17] != b':' {
        return Err("timestamp is not dd/Mon/yyyy:HH:MM:SS");
    }
    let num = |r: core::ops::Range<usize>| clock[r].parse::<u32>().map_err(|_| "non-numeric timestamp field");
    let day = num(0..2)?;
    let month = MONTHS.iter().position(|m| *m == &clock[3..6]).ok_or("unknown month")? as u32 + 1;
    let year = clock[7..11].parse::<i32>().map_err(|_| "non-numeric year")?;
    let (h, m, sec) = (num(12..14)?, num(15..17)?, num(18..20)?);
    let date = NaiveDate::from_ymd_opt(year, month, day).ok_or("invalid calendar date")?;
    let time = NaiveTime::from_hms_opt(h, m, sec).ok_or("invalid time of day")?;
    let wall = date.and_time(time).and_utc().timestamp();
    match policy {
        TimezonePolicy::AssumeUtc => Ok(wall),
        TimezonePolicy::UseOffset => {
            let off = offset.ok_or("missing timezone offset")?;
            Ok(wall - parse_offset(off)?)
        }
    }
}

fn parse_offset(off: &str) -> core::result::Result<i64, &'static str> {
    let b = off.as_bytes();
    if b.len() != 5 || !(b[0] == b'+' || b[0] == b'-') || !b[1..].iter().all(u8::is_ascii_digit) {
        return Err("offset is not ±zzzz");
    }
    let hh = i64::from(b[1] - b'0') * 10 + i64::from(b[2] - b'0');
    let mm = i64::from(b[3] - b'0') * 10 + i64::from(b[4] - b'0');
    if mm >= 60 {
        return Err("offset minutes out of range");
    }
    let secs = hh * 3600 + mm * 60;
    Ok(if b[0] == b'-' { -secs } else { secs })
}

/// Renders an event as a Common Log Format line (UTC, `+0000`).
pub fn format_clf_line(event: &TraceEvent) -> String {
    let mut out = String::with_capacity(96);
    let date = calendar::date_of(event.timestamp);
    let tod = event.timestamp.rem_euclid(calendar::SECS_PER_DAY);
    use chrono::Datelike;
    let request = if event.method.is_empty() {
        event.path.clone()
    } else {
        format!("{} {} HTTP/1.0", event.method, event.path)
    };
    let _ = write!(
        out,
        "{} - - [{:02}/{}/{:04}:{:02}:{:02}:{:02} +0000] \"{}\" ",
        event.client,
        date.day(),
        MONTHS[date.month0() as usize],
        date.year(),
        tod / 3600,
        (tod / 60) % 60,
        tod % 60,
        request,
    );
    match event.status {
        Some(s) => {
            let _ = write!(out, "{s} ");
        }
        None => out.push_str("- "),
    }
    match event.bytes {
        Some(b) => {
            let _ = write!(out, "{b}");
        }
        None => out.push('-'),
    }
    out
}

/// Parses one pageview-dump line `project page count bytes`.
///
/// The bucket start is not part of the line; callers supply it from the
/// file name. Returns `Ok(None)` for blank lines.
pub fn parse_summary_record(line: &str, bucket_start: i64, desc: &SourceDescriptor) -> Result<Option<SummaryRecord>> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() {
        return Ok(None);
    }
    if let Some(w) = desc.bucket_width {
        if w == 0 || bucket_start.rem_euclid(w as i64) != 0 {
            return Err(malformed(0, "bucket start not aligned to bucket width"));
        }
    }
    let fields: Vec<&str> = line.split_whitespace().collect();
    if !(3..=4).contains(&fields.len()) {
        return Err(malformed(0, "expected `project page count [bytes]`"));
    }
    let count_at = line.find(fields[2]).unwrap_or(0);
    let count = fields[2]
        .parse::<u64>()
        .map_err(|_| malformed(count_at, "count is not a non-negative integer"))?;
    if let Some(bytes) = fields.get(3) {
        bytes
            .parse::<u64>()
            .map_err(|_| malformed(line.rfind(bytes).unwrap_or(0), "bytes is not a non-negative integer"))?;
    }
    Ok(Some(SummaryRecord {
        bucket_start,
        count,
        labels: vec![("project".into(), fields[0].into()), ("page".into(), fields[1].into())],
    }))
}
