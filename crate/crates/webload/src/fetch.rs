//! Hourly Wikimedia pageview dumps, cached per project.
//!
//! Cache layout: `<cache>/<project>/<yyyy>/<mm>/<dd>/<hh>.gz`. Each cached
//! file holds only the lines of its project, re-compressed. A non-empty file
//! at the expected path counts as cached and is never fetched again.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;

use crate::error::{Error, Result};

pub const DUMPS_BASE_URL: &str = "https://dumps.wikimedia.org/other/pageviews";
/// Environment variable naming the default cache directory.
pub const CACHE_DIR_ENV: &str = "WEBLOAD_CACHE_DIR";
pub const DEFAULT_ATTEMPTS: u32 = 3;

/// Why a GET failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Status(u16),
    Network(String),
}

/// Minimal blocking GET, swappable for tests.
pub trait Transport {
    fn get(&self, url: &str) -> std::result::Result<Vec<u8>, TransportError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(600))
            .user_agent(concat!("webload/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| Error::Transport { url: String::new(), reason: e.to_string() })?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> std::result::Result<Vec<u8>, TransportError> {
        let resp = self.client.get(url).send().map_err(|e| TransportError::Network(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(TransportError::Status(resp.status().as_u16()));
        }
        resp.bytes().map(|b| b.to_vec()).map_err(|e| TransportError::Network(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub base_url: String,
    pub attempts: u32,
    /// First retry delay; doubles per attempt.
    pub backoff: Duration,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions { base_url: DUMPS_BASE_URL.into(), attempts: DEFAULT_ATTEMPTS, backoff: Duration::from_secs(2) }
    }
}

/// Cache directory from the environment, falling back to `./cache`.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("cache"))
}

pub fn dump_url(base: &str, hour: NaiveDateTime) -> String {
    format!(
        "{}/{:04}/{:04}-{:02}/pageviews-{:04}{:02}{:02}-{:02}0000.gz",
        base.trim_end_matches('/'),
        hour.year(),
        hour.year(),
        hour.month(),
        hour.year(),
        hour.month(),
        hour.day(),
        hour.hour()
    )
}

pub fn cache_path(cache_dir: &Path, project: &str, hour: NaiveDateTime) -> PathBuf {
    cache_dir
        .join(project)
        .join(format!("{:04}", hour.year()))
        .join(format!("{:02}", hour.month()))
        .join(format!("{:02}", hour.day()))
        .join(format!("{:02}.gz", hour.hour()))
}

fn is_cached(p: &Path) -> bool {
    fs::metadata(p).map(|m| m.is_file() && m.len() > 0).unwrap_or(false)
}

/// Every hour of `start..=end`.
pub fn hours(start: NaiveDate, end: NaiveDate) -> Result<Vec<NaiveDateTime>> {
    if end < start {
        return Err(Error::Precondition(format!("end {end} precedes start {start}")));
    }
    let mut out = Vec::new();
    let mut d = start;
    while d <= end {
        out.extend((0..24).map(|h| d.and_hms_opt(h, 0, 0).unwrap()));
        d = d.succ_opt().ok_or_else(|| Error::Precondition("date out of range".into()))?;
    }
    Ok(out)
}

/// Makes sure every hour of `start..=end` for `project` is cached and returns
/// the cached paths in time order.
///
/// Missing hours (404, or retries exhausted) do not stop the run; they are
/// reported together as `PartialRange` after the rest has been cached. Any
/// other HTTP status aborts immediately.
pub fn fetch_wikimedia(
    project: &str,
    start: NaiveDate,
    end: NaiveDate,
    cache_dir: &Path,
    transport: &dyn Transport,
    opts: &FetchOptions,
) -> Result<Vec<PathBuf>> {
    let hours = hours(start, end)?;
    if project.is_empty() || project.contains(['/', ' ']) {
        return Err(Error::Precondition(format!("invalid project name {project:?}")));
    }
    let mut paths = Vec::with_capacity(hours.len());
    let mut missing = Vec::new();
    for hour in hours {
        let dest = cache_path(cache_dir, project, hour);
        if is_cached(&dest) {
            paths.push(dest);
            continue;
        }
        let url = dump_url(&opts.base_url, hour);
        match get_with_retry(transport, &url, opts)? {
            Some(body) => {
                store_filtered(&body, project, &dest, &url)?;
                paths.push(dest);
            }
            None => missing.push(hour.format("%Y-%m-%dT%H").to_string()),
        }
    }
    if missing.is_empty() {
        Ok(paths)
    } else {
        Err(Error::PartialRange(missing))
    }
}

fn get_with_retry(transport: &dyn Transport, url: &str, opts: &FetchOptions) -> Result<Option<Vec<u8>>> {
    let attempts = opts.attempts.max(1);
    let mut delay = opts.backoff;
    for attempt in 1..=attempts {
        match transport.get(url) {
            Ok(body) => return Ok(Some(body)),
            Err(TransportError::Status(404)) => return Ok(None),
            Err(TransportError::Status(s)) if s < 500 && s != 429 => {
                return Err(Error::Http { status: s, url: url.into() })
            }
            Err(_) if attempt < attempts => {
                thread::sleep(delay);
                delay *= 2;
            }
            Err(_) => return Ok(None),
        }
    }
    Ok(None)
}

/// Keeps the lines of `project` and writes them gzipped via a temp file and
/// rename, so an interrupted run never leaves a truncated cache entry.
fn store_filtered(body: &[u8], project: &str, dest: &Path, url: &str) -> Result<()> {
    let dir = dest.parent().expect("cache path has a parent");
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = dest.with_extension("gz.part");
    let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let mut enc = GzEncoder::new(file, flate2::Compression::default());
    let mut reader = BufReader::new(MultiGzDecoder::new(body));
    let mut line = Vec::new();
    let prefix = format!("{project} ");
    loop {
        line.clear();
        let n = reader
            .read_until(b'\n', &mut line)
            .map_err(|e| Error::Decompression { location: url.into(), source: e })?;
        if n == 0 {
            break;
        }
        if line.starts_with(prefix.as_bytes()) {
            enc.write_all(&line).map_err(|e| Error::io(&tmp, e))?;
        }
    }
    // an empty gzip member is still non-empty on disk, so the hour stays cached
    enc.finish().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, dest).map_err(|e| Error::io(dest, e))
}
