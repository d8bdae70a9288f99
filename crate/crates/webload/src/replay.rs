//! Open-loop replay of event timelines against an HTTP target, and CLF
//! rendering of generated events.
//!
//! Each request fires at its scheduled instant (divided by `time_scale`)
//! whether or not earlier requests have returned. When `max_in_flight`
//! requests are outstanding, further requests are shed and counted as
//! failed; they are never queued.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tokio::time::Instant;
use webload_core::trace::{format_clf_line, TraceEvent};

use crate::error::{Error, Result};
use crate::formats;

pub const DEFAULT_MAX_IN_FLIGHT: usize = 256;
/// Requests firing later than this after their slot count as late.
pub const LATE_THRESHOLD: Duration = Duration::from_millis(100);
/// Scheduler lag that triggers a clock-overrun warning.
pub const OVERRUN_THRESHOLD: Duration = Duration::from_secs(1);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub target: Option<String>,
    pub max_in_flight: usize,
    /// Schedule seconds per wall-clock second.
    pub time_scale: f64,
    pub dry_run: bool,
    /// Report interval width in schedule seconds.
    pub interval_secs: f64,
    pub request_timeout: Duration,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            target: None,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            time_scale: 1.0,
            dry_run: false,
            interval_secs: 1.0,
            request_timeout: Duration::from_secs(30),
        }
    }
}

impl ReplayConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_scale > 0.0) || !self.time_scale.is_finite() {
            return Err(Error::Precondition("time scale must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Precondition("max in flight must be at least 1".into()));
        }
        if !(self.interval_secs > 0.0) {
            return Err(Error::Precondition("report interval must be positive".into()));
        }
        if !self.dry_run && self.target.is_none() {
            return Err(Error::Precondition("a target URL is required unless dry-running".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    /// Interval start in schedule seconds.
    pub start: f64,
    /// Scheduled requests per wall-clock second.
    pub target_rate: f64,
    /// Completed requests per wall-clock second, binned by firing time.
    pub achieved_rate: f64,
    pub rate_error: f64,
    pub attempted: u64,
    pub completed: u64,
    pub failed: u64,
    pub shed: u64,
    pub late: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub target: Option<String>,
    pub dry_run: bool,
    pub time_scale: f64,
    pub max_in_flight: usize,
    pub attempted: u64,
    pub completed: u64,
    pub failed: u64,
    pub shed: u64,
    pub late: u64,
    pub late_fraction: f64,
    /// Worst observed firing delay, milliseconds.
    pub max_lag_ms: f64,
    /// Wall-clock span of the timeline, seconds.
    pub duration_secs: f64,
    /// Highest per-interval target rate, requests per wall-clock second.
    pub peak_rate: f64,
    pub intervals: Vec<IntervalReport>,
    pub warnings: Vec<String>,
}

#[derive(Default)]
struct Slot {
    attempted: AtomicU64,
    completed: AtomicU64,
    failed: AtomicU64,
    shed: AtomicU64,
    late: AtomicU64,
}

struct Timeline {
    anchor: f64,
    width: f64,
    scheduled: Vec<u64>,
}

impl Timeline {
    fn new(events: &[f64], width: f64) -> Self {
        let anchor = events.first().map(|t| (t / width).floor() * width).unwrap_or(0.0);
        let mut tl = Timeline { anchor, width, scheduled: Vec::new() };
        for &t in events {
            let i = tl.index(t);
            if tl.scheduled.len() <= i {
                tl.scheduled.resize(i + 1, 0);
            }
            tl.scheduled[i] += 1;
        }
        tl
    }

    fn index(&self, t: f64) -> usize {
        ((t - self.anchor) / self.width).floor().max(0.0) as usize
    }
}

fn check_sorted(events: &[f64]) -> Result<()> {
    if events.iter().any(|t| !t.is_finite()) {
        return Err(Error::Precondition("event times must be finite".into()));
    }
    if events.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition("events must be sorted".into()));
    }
    Ok(())
}

/// Replays `events` (epoch seconds, sorted).
pub fn replay(events: &[f64], cfg: &ReplayConfig) -> Result<ReplayReport> {
    cfg.validate()?;
    check_sorted(events)?;
    if cfg.dry_run {
        return Ok(dry_run(events, cfg));
    }
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("<runtime>", e))?;
    rt.block_on(run(events, cfg))
}

fn dry_run(events: &[f64], cfg: &ReplayConfig) -> ReplayReport {
    let tl = Timeline::new(events, cfg.interval_secs);
    let slots: Vec<Slot> = tl
        .scheduled
        .iter()
        .map(|&n| {
            let s = Slot::default();
            s.attempted.store(n, Ordering::Relaxed);
            s.completed.store(n, Ordering::Relaxed);
            s
        })
        .collect();
    let mut report = assemble(&tl, &slots, cfg, 0.0);
    report.duration_secs = match (events.first(), events.last()) {
        (Some(a), Some(b)) => (b - a) / cfg.time_scale,
        _ => 0.0,
    };
    let min_gap = events.windows(2).map(|w| (w[1] - w[0]) / cfg.time_scale).fold(f64::INFINITY, f64::min);
    if min_gap.is_finite() && min_gap < 1e-4 {
        report.warnings.push(format!("events as close as {:.1} µs apart in wall time", min_gap * 1e6));
    }
    report
}

async fn preflight(target: &str) -> Result<reqwest::Url> {
    let url = reqwest::Url::parse(target).map_err(|e| Error::TargetUnreachable(format!("{target}: {e}")))?;
    let host = url.host_str().ok_or_else(|| Error::TargetUnreachable(format!("{target}: no host")))?.to_string();
    let port = url.port_or_known_default().unwrap_or(80);
    let connect = tokio::net::TcpStream::connect((host.as_str(), port));
    match tokio::time::timeout(Duration::from_secs(5), connect).await {
        Ok(Ok(_)) => Ok(url),
        Ok(Err(e)) => Err(Error::TargetUnreachable(format!("{target}: {e}"))),
        Err(_) => Err(Error::TargetUnreachable(format!("{target}: connect timed out"))),
    }
}

async fn run(events: &[f64], cfg: &ReplayConfig) -> Result<ReplayReport> {
    let target = cfg.target.as_deref().expect("validated");
    let url = preflight(target).await?;
    let client = reqwest::Client::builder()
        .timeout(cfg.request_timeout)
        .pool_max_idle_per_host(cfg.max_in_flight)
        .build()
        .map_err(|e| Error::Transport { url: target.into(), reason: e.to_string() })?;
    let tl = Timeline::new(events, cfg.interval_secs);
    // one spare slot absorbs firings that slip past the last interval
    let slots: Arc<Vec<Slot>> = Arc::new((0..=tl.scheduled.len()).map(|_| Slot::default()).collect());
    let permits = Arc::new(Semaphore::new(cfg.max_in_flight));
    let first = events.first().copied().unwrap_or(0.0);
    let t0 = Instant::now() + Duration::from_millis(20);
    let mut max_lag = Duration::ZERO;
    let mut overruns = 0u64;

    for &t in events {
        let due = t0 + Duration::from_secs_f64((t - first) / cfg.time_scale);
        tokio::time::sleep_until(due).await;
        let now = Instant::now();
        let lag = now.saturating_duration_since(due);
        max_lag = max_lag.max(lag);
        if lag > OVERRUN_THRESHOLD {
            overruns += 1;
        }
        let fired_at = first + now.duration_since(t0).as_secs_f64() * cfg.time_scale;
        let idx = tl.index(fired_at).min(slots.len() - 1);
        let slot = &slots[idx];
        slot.attempted.fetch_add(1, Ordering::Relaxed);
        if lag > LATE_THRESHOLD {
            slot.late.fetch_add(1, Ordering::Relaxed);
        }
        match permits.clone().try_acquire_owned() {
            Ok(permit) => {
                let (client, url, slots) = (client.clone(), url.clone(), slots.clone());
                tokio::spawn(async move {
                    let ok = match client.get(url).send().await {
                        Ok(resp) => resp.bytes().await.is_ok(),
                        Err(_) => false,
                    };
                    let slot = &slots[idx];
                    if ok {
                        slot.completed.fetch_add(1, Ordering::Relaxed);
                    } else {
                        slot.failed.fetch_add(1, Ordering::Relaxed);
                    }
                    drop(permit);
                });
            }
            Err(_) => {
                slot.shed.fetch_add(1, Ordering::Relaxed);
                slot.failed.fetch_add(1, Ordering::Relaxed);
            }
        }
    }
    // wait for every outstanding request
    let _all = permits
        .acquire_many(cfg.max_in_flight as u32)
        .await
        .map_err(|e| Error::Transport { url: target.into(), reason: e.to_string() })?;

    let mut report = assemble(&tl, &slots, cfg, max_lag.as_secs_f64() * 1e3);
    report.duration_secs = t0.elapsed().as_secs_f64();
    if overruns > 0 {
        report
            .warnings
            .push(format!("clock overrun: {overruns} request(s) fired more than {OVERRUN_THRESHOLD:?} late"));
    }
    Ok(report)
}

fn assemble(tl: &Timeline, slots: &[Slot], cfg: &ReplayConfig, max_lag_ms: f64) -> ReplayReport {
    let wall = tl.width / cfg.time_scale;
    let mut r = ReplayReport {
        target: cfg.target.clone(),
        dry_run: cfg.dry_run,
        time_scale: cfg.time_scale,
        max_in_flight: cfg.max_in_flight,
        max_lag_ms,
        ..Default::default()
    };
    for (i, slot) in slots.iter().enumerate() {
        let scheduled = tl.scheduled.get(i).copied().unwrap_or(0);
        let iv = IntervalReport {
            start: tl.anchor + i as f64 * tl.width,
            target_rate: scheduled as f64 / wall,
            achieved_rate: slot.completed.load(Ordering::Relaxed) as f64 / wall,
            rate_error: 0.0,
            attempted: slot.attempted.load(Ordering::Relaxed),
            completed: slot.completed.load(Ordering::Relaxed),
            failed: slot.failed.load(Ordering::Relaxed),
            shed: slot.shed.load(Ordering::Relaxed),
            late: slot.late.load(Ordering::Relaxed),
        };
        if scheduled == 0 && iv.attempted == 0 {
            continue;
        }
        let iv = IntervalReport {
            rate_error: if iv.target_rate > 0.0 { (iv.achieved_rate - iv.target_rate) / iv.target_rate } else { f64::INFINITY },
            ..iv
        };
        r.attempted += iv.attempted;
        r.completed += iv.completed;
        r.failed += iv.failed;
        r.shed += iv.shed;
        r.late += iv.late;
        r.peak_rate = r.peak_rate.max(iv.target_rate);
        r.intervals.push(iv);
    }
    r.late_fraction = if r.attempted > 0 { r.late as f64 / r.attempted as f64 } else { 0.0 };
    r
}

/// Fixed fields stamped on every synthetic CLF line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClfTemplate {
    pub client: String,
    pub method: String,
    pub path: String,
    pub status: u16,
    pub bytes: u64,
}

impl Default for ClfTemplate {
    fn default() -> Self {
        ClfTemplate { client: "synthetic".into(), method: "GET".into(), path: "/".into(), status: 200, bytes: 0 }
    }
}

/// One CLF line per event. Timestamps are floored to whole seconds, the
/// format's resolution.
pub fn write_clf_to(w: &mut dyn Write, events: &[f64], template: &ClfTemplate) -> Result<()> {
    check_sorted(events)?;
    let mut ev = TraceEvent {
        timestamp: 0,
        client: template.client.clone(),
        method: template.method.clone(),
        path: template.path.clone(),
        status: Some(template.status),
        bytes: Some(template.bytes),
    };
    for &t in events {
        ev.timestamp = t.floor() as i64;
        writeln!(w, "{}", format_clf_line(&ev)).map_err(|e| Error::io("<clf>", e))?;
    }
    Ok(())
}

pub fn write_clf(events: &[f64], template: &ClfTemplate, path: &Path) -> Result<()> {
    formats::write_file(path, |w| write_clf_to(w, events, template))
}

#[cfg(test)]
mod tests {
    use super::*;
    use webload_core::trace::{parse_clf_line, TimezonePolicy};

    #[test]
    fn dry_run_touches_nothing() {
        let events: Vec<f64> = (0..100).map(|i| 1000.0 + i as f64 * 0.5).collect();
        let cfg = ReplayConfig { dry_run: true, ..Default::default() };
        let r = replay(&events, &cfg).unwrap();
        assert_eq!((r.attempted, r.completed, r.failed), (100, 100, 0));
        assert_eq!(r.intervals.len(), 50);
        assert!(r.intervals.iter().all(|iv| iv.target_rate == 2.0));
    }

    #[test]
    fn time_scale_compresses_wall_time() {
        let events: Vec<f64> = (0..60).map(|i| i as f64 * 60.0).collect();
        let cfg = ReplayConfig { dry_run: true, time_scale: 60.0, interval_secs: 60.0, ..Default::default() };
        let r = replay(&events, &cfg).unwrap();
        assert!((r.duration_secs - 59.0).abs() < 1e-12);
        assert_eq!(r.intervals.len(), 60);
    }

    #[test]
    fn unsorted_events_rejected() {
        let cfg = ReplayConfig { dry_run: true, ..Default::default() };
        assert!(replay(&[2.0, 1.0], &cfg).is_err());
        assert!(replay(&[1.0], &ReplayConfig::default()).is_err());
    }

    #[test]
    fn clf_lines_parse_back() {
        let events = [0.0, 1.7, 86_400.2];
        let mut buf = Vec::new();
        write_clf_to(&mut buf, &events, &ClfTemplate::default()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let stamps: Vec<i64> =
            text.lines().map(|l| parse_clf_line(l, TimezonePolicy::UseOffset).unwrap().unwrap().timestamp).collect();
        assert_eq!(stamps, vec![0, 1, 86_400]);

        let mut empty = Vec::new();
        write_clf_to(&mut empty, &[], &ClfTemplate::default()).unwrap();
        assert!(empty.is_empty());
    }
}
