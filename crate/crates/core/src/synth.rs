//! Synthetic workloads from polynomial patterns.
//!
//! A pattern lives on the standardized scale, so a schedule undoes the
//! z-score: `rate = μ + σ·p(t)`, clipped at zero. Rates are expected requests
//! per hour. The pattern is sampled at the grid point of its natural step
//! (the hour for daily patterns, the day for weekly ones) containing each
//! interval, so aggregating a schedule at that step returns `μ + σ·p` on the
//! fitting grid.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::calendar::{self, SECS_PER_DAY, SECS_PER_HOUR};
use crate::patterns::PatternLibrary;
use crate::polyfit::PolynomialModel;
use crate::stats;
use crate::{Error, Result};

pub const DEFAULT_WEEKLY_COEFFICIENT: f64 = 0.2;
pub const BURST_TOLERANCE: f64 = 0.05;
pub const MAX_BURST_SEARCH_STEPS: usize = 1000;

/// A pattern by library name or given inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternRef {
    Named(String),
    Inline(PolynomialModel),
}

impl PatternRef {
    pub fn named(name: &str) -> Self {
        PatternRef::Named(name.to_string())
    }

    fn resolve<'a>(&'a self, lib: &'a PatternLibrary) -> Result<(&'a PolynomialModel, String)> {
        match self {
            PatternRef::Named(n) => Ok((&lib.get(n)?.model, n.clone())),
            PatternRef::Inline(m) => Ok((m, "inline".to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    #[default]
    None,
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub pattern: PatternRef,
    /// μ, requests per hour.
    pub mean_rate: f64,
    /// σ, requests per hour.
    pub std: f64,
    /// First interval start, epoch seconds.
    pub start: i64,
    pub duration_secs: i64,
    pub resolution_secs: i64,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default)]
    pub burstiness_target: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Weekly modulation used by [`compose`].
    #[serde(default = "default_weekly_coefficient")]
    pub weekly_coefficient: f64,
}

fn default_weekly_coefficient() -> f64 {
    DEFAULT_WEEKLY_COEFFICIENT
}

/// Monday 2023-01-02 00:00 UTC.
pub const DEFAULT_START: i64 = 1_672_617_600;

impl GenConfig {
    /// Hourly schedule of `days` days starting on a Monday.
    pub fn daily(pattern: PatternRef, mean_rate: f64, std: f64, days: i64) -> Self {
        GenConfig {
            pattern,
            mean_rate,
            std,
            start: DEFAULT_START,
            duration_secs: days * SECS_PER_DAY,
            resolution_secs: SECS_PER_HOUR,
            noise: Noise::None,
            burstiness_target: None,
            seed: 0,
            weekly_coefficient: DEFAULT_WEEKLY_COEFFICIENT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_rate > 0.0) || !self.mean_rate.is_finite() {
            return Err(Error::invalid("mean rate must be positive"));
        }
        if !(self.std >= 0.0) || !self.std.is_finite() {
            return Err(Error::invalid("std must be non-negative"));
        }
        if self.resolution_secs <= 0 || self.duration_secs <= 0 || self.duration_secs % self.resolution_secs != 0 {
            return Err(Error::invalid("duration must be a positive multiple of the resolution"));
        }
        if let Some(b) = self.burstiness_target {
            if !(-1.0 < b && b < 1.0) {
                return Err(Error::invalid("burstiness target must lie in (-1, 1)"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub start: i64,
    /// Expected requests per hour during the interval.
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstInfo {
    pub factor: f64,
    pub intervals: usize,
    pub achieved: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScheduleMeta {
    pub patterns: Vec<String>,
    pub mean_rate: f64,
    pub std: f64,
    pub seed: u64,
    /// Fraction of intervals whose rate was clipped at zero.
    pub clipped_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weekly_coefficient: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bursts: Option<BurstInfo>,
}

/// Expected request rate over contiguous intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub resolution_secs: i64,
    pub entries: Vec<ScheduleEntry>,
    pub meta: ScheduleMeta,
}

impl Schedule {
    /// Builds a schedule from rates, starting at `start`.
    pub fn from_rates(start: i64, resolution_secs: i64, rates: &[f64], meta: ScheduleMeta) -> Result<Self> {
        let s = Schedule {
            resolution_secs,
            entries: rates
                .iter()
                .enumerate()
                .map(|(i, &rate)| ScheduleEntry { start: start + i as i64 * resolution_secs, rate })
                .collect(),
            meta,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn rates(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.rate).collect()
    }

    /// Expected number of requests over the whole schedule.
    pub fn expected_total(&self) -> f64 {
        let hours = self.resolution_secs as f64 / SECS_PER_HOUR as f64;
        self.entries.iter().map(|e| e.rate * hours).sum()
    }

    /// `[first start, last start + resolution)`.
    pub fn horizon(&self) -> Option<(i64, i64)> {
        Some((self.entries.first()?.start, self.entries.last()?.start + self.resolution_secs))
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution_secs <= 0 {
            return Err(Error::invalid("resolution must be positive"));
        }
        for pair in self.entries.windows(2) {
            if pair[1].start != pair[0].start + self.resolution_secs {
                return Err(Error::invalid("schedule intervals are not contiguous"));
            }
        }
        if self.entries.iter().any(|e| !(e.rate >= 0.0) || !e.rate.is_finite()) {
            return Err(Error::invalid("schedule rates must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cycle {
    Day,
    Week,
}

fn cycle_of(model: &PolynomialModel) -> Result<Cycle> {
    let len = model.domain_len();
    if (len - 24.0).abs() < 1e-9 {
        Ok(Cycle::Day)
    } else if (len - 7.0).abs() < 1e-9 {
        Ok(Cycle::Week)
    } else {
        Err(Error::invalid("pattern domain must span 24 hours or 7 days"))
    }
}

/// Natural step in seconds.
fn step_secs(cycle: Cycle) -> i64 {
    match cycle {
        Cycle::Day => SECS_PER_HOUR,
        Cycle::Week => SECS_PER_DAY,
    }
}

/// Pattern time of the grid point whose step contains `secs`.
fn pattern_time(model: &PolynomialModel, cycle: Cycle, secs: i64) -> f64 {
    let index = match cycle {
        Cycle::Day => f64::from(calendar::hour_of(secs)),
        Cycle::Week => f64::from(calendar::iso_weekday(calendar::date_of(secs)) - 1),
    };
    model.domain.0 + index
}

fn check_resolution(cfg: &GenConfig, cycle: Cycle) -> Result<()> {
    if step_secs(cycle) % cfg.resolution_secs != 0 {
        return Err(Error::invalid("resolution must divide the pattern's natural step"));
    }
    Ok(())
}

fn finish(cfg: &GenConfig, raw: Vec<f64>, patterns: Vec<String>, weekly: Option<f64>) -> Result<Schedule> {
    let clipped = raw.iter().filter(|r| **r < 0.0).count();
    let rates: Vec<f64> = raw.into_iter().map(|r| r.max(0.0)).collect();
    let meta = ScheduleMeta {
        patterns,
        mean_rate: cfg.mean_rate,
        std: cfg.std,
        seed: cfg.seed,
        clipped_fraction: if rates.is_empty() { 0.0 } else { clipped as f64 / rates.len() as f64 },
        weekly_coefficient: weekly,
        bursts: None,
    };
    let schedule = Schedule::from_rates(cfg.start, cfg.resolution_secs, &rates, meta)?;
    match cfg.burstiness_target {
        Some(b) => inject_bursts(&schedule, b, cfg.seed),
        None => Ok(schedule),
    }
}

/// `rate(t) = max(0, μ + σ·p(t))` over the configured horizon.
pub fn rate_schedule(cfg: &GenConfig, lib: &PatternLibrary) -> Result<Schedule> {
    cfg.validate()?;
    let (model, name) = cfg.pattern.resolve(lib)?;
    let cycle = cycle_of(model)?;
    check_resolution(cfg, cycle)?;
    let n = cfg.duration_secs / cfg.resolution_secs;
    let raw = (0..n)
        .map(|i| {
            let t = cfg.start + i * cfg.resolution_secs;
            cfg.mean_rate + cfg.std * model.evaluate(pattern_time(model, cycle, t))
        })
        .collect();
    finish(cfg, raw, vec![name], None)
}

/// Weekly pattern scales each day's mean, daily pattern shapes the hours:
/// `rate = max(0, μ·(1 + c_w·p_w(day)) + σ·p_d(hour))`.
pub fn compose(weekly: &PatternRef, daily: &PatternRef, cfg: &GenConfig, lib: &PatternLibrary) -> Result<Schedule> {
    cfg.validate()?;
    let (w_model, w_name) = weekly.resolve(lib)?;
    let (d_model, d_name) = daily.resolve(lib)?;
    if cycle_of(w_model)? != Cycle::Week || cycle_of(d_model)? != Cycle::Day {
        return Err(Error::invalid("compose needs a weekly and a daily pattern"));
    }
    check_resolution(cfg, Cycle::Day)?;
    let c_w = cfg.weekly_coefficient;
    let n = cfg.duration_secs / cfg.resolution_secs;
    let raw = (0..n)
        .map(|i| {
            let t = cfg.start + i * cfg.resolution_secs;
            let day_level = cfg.mean_rate * (1.0 + c_w * w_model.evaluate(pattern_time(w_model, Cycle::Week, t)));
            day_level + cfg.std * d_model.evaluate(pattern_time(d_model, Cycle::Day, t))
        })
        .collect();
    finish(cfg, raw, vec![w_name, d_name], Some(c_w))
}

/// Poisson arrivals with piecewise-constant intensity: each interval draws
/// `Poisson(rate · width / 1h)` events placed uniformly inside it. Output is
/// sorted epoch seconds.
pub fn emit_events(s: &Schedule, seed: u64) -> Result<Vec<f64>> {
    s.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hours = s.resolution_secs as f64 / SECS_PER_HOUR as f64;
    let width = s.resolution_secs as f64;
    let mut out = Vec::new();
    let mut local = Vec::new();
    for e in &s.entries {
        let lambda = e.rate * hours;
        if lambda <= 0.0 {
            continue;
        }
        let dist = Poisson::new(lambda).map_err(|_| Error::invalid("rate too large for Poisson sampling"))?;
        let count = dist.sample(&mut rng) as usize;
        local.clear();
        local.extend((0..count).map(|_| e.start as f64 + rng.random::<f64>() * width));
        local.sort_by(f64::total_cmp);
        out.extend_from_slice(&local);
    }
    Ok(out)
}

/// Noise-free arrivals: each interval gets its expected count, rounded so
/// that cumulative totals never drift by more than half a request, spread
/// evenly across the interval.
pub fn emit_regular(s: &Schedule) -> Result<Vec<f64>> {
    s.validate()?;
    let hours = s.resolution_secs as f64 / SECS_PER_HOUR as f64;
    let width = s.resolution_secs as f64;
    let mut out = Vec::new();
    let mut expected = 0.0;
    let mut emitted = 0i64;
    for e in &s.entries {
        expected += e.rate * hours;
        let count = (libm::round(expected) as i64 - emitted).max(0);
        emitted += count;
        let gap = width / count as f64;
        out.extend((0..count).map(|j| e.start as f64 + (j as f64 + 0.5) * gap));
    }
    Ok(out)
}

/// Arrivals for `s` under the given noise model.
pub fn events(s: &Schedule, noise: Noise, seed: u64) -> Result<Vec<f64>> {
    match noise {
        Noise::None => emit_regular(s),
        Noise::Poisson => emit_events(s, seed),
    }
}

/// Raises the burstiness of a schedule's rates to `target_b` (±0.05).
///
/// A seeded random subset of intervals is multiplied by a burst factor and
/// the rest are scaled down so the total volume is unchanged. The subset
/// starts at a tenth of the intervals and halves while the target stays out
/// of reach; the factor is found by bisection.
pub fn inject_bursts(s: &Schedule, target_b: f64, seed: u64) -> Result<Schedule> {
    s.validate()?;
    let rates = s.rates();
    let current = stats::burstiness(&rates)?;
    if !(target_b > current) {
        return Err(Error::TargetNotAbove { target: target_b, current });
    }
    if target_b >= 1.0 {
        return Err(Error::Unreachable { target: target_b, steps: 0 });
    }
    let n = rates.len();
    let total: f64 = rates.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut steps = 0usize;
    let mut m = (n / 10).max(1);
    loop {
        let mut is_burst = vec![false; n];
        for &i in &order[..m] {
            is_burst[i] = true;
        }
        let burst_mass: f64 = order[..m].iter().map(|&i| rates[i]).sum();
        if burst_mass > 0.0 && burst_mass < total {
            let apply = |factor: f64| -> Vec<f64> {
                let rest = (total - factor * burst_mass) / (total - burst_mass);
                rates
                    .iter()
                    .zip(&is_burst)
                    .map(|(r, &b)| if b { r * factor } else { (r * rest).max(0.0) })
                    .collect()
            };
            let score = |factor: f64| stats::burstiness(&apply(factor)).unwrap_or(f64::NAN);
            let mut lo = 1.0;
            let mut hi = total / burst_mass;
            steps += 1;
            if score(hi) >= target_b - BURST_TOLERANCE {
                while steps < MAX_BURST_SEARCH_STEPS {
                    steps += 1;
                    let mid = 0.5 * (lo + hi);
                    let b = score(mid);
                    if (b - target_b).abs() <= BURST_TOLERANCE / 2.0 || hi - lo < 1e-12 * hi {
                        let mut out = s.clone();
                        for (e, r) in out.entries.iter_mut().zip(apply(mid)) {
                            e.rate = r;
                        }
                        out.meta.bursts = Some(BurstInfo { factor: mid, intervals: m, achieved: b });
                        if (b - target_b).abs() > BURST_TOLERANCE {
                            break;
                        }
                        return Ok(out);
                    }
                    if b < target_b {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
        }
        if m == 1 || steps >= MAX_BURST_SEARCH_STEPS {
            return Err(Error::Unreachable { target: target_b, steps });
        }
        m /= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{bin_instants, BinWidth};
    use approx::assert_abs_diff_eq;

    fn lib() -> PatternLibrary {
        PatternLibrary::builtin()
    }

    fn flat_daily() -> PatternRef {
        PatternRef::Inline(PolynomialModel::new(vec![0.0; 4], (0.0, 24.0)).unwrap())
    }

    #[test]
    fn regular_emission_tracks_expectation() {
        let s = Schedule::from_rates(0, 3600, &[2.5, 2.5, 0.0, 1.0], ScheduleMeta::default()).unwrap();
        let ev = events(&s, Noise::None, 0).unwrap();
        let bins = bin_instants("x", &ev, BinWidth::Hour).unwrap();
        let counts: Vec<f64> = bins.bins.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![3.0, 2.0, 0.0, 1.0]);
        assert!(ev.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn zero_sigma_is_steady() {
        let s = rate_schedule(&GenConfig::daily(PatternRef::named("D1"), 500.0, 0.0, 2), &lib()).unwrap();
        assert_eq!(s.entries.len(), 48);
        assert!(s.rates().iter().all(|r| *r == 500.0));
    }

    #[test]
    fn d1_at_midnight() {
        let s = rate_schedule(&GenConfig::daily(PatternRef::named("D1"), 1000.0, 300.0, 1), &lib()).unwrap();
        assert_abs_diff_eq!(s.entries[0].rate, 781.6, epsilon = 1e-9);
        assert_eq!(s.meta.clipped_fraction, 0.0);
    }

    #[test]
    fn negative_rates_clip() {
        // D1 reaches about -2.64 at 23h, so σ = μ pushes late hours below zero
        let s = rate_schedule(&GenConfig::daily(PatternRef::named("D1"), 100.0, 100.0, 1), &lib()).unwrap();
        assert!(s.meta.clipped_fraction > 0.0);
        assert!(s.rates().iter().all(|r| *r >= 0.0));
    }

    #[test]
    fn unknown_pattern_and_bad_config() {
        let cfg = GenConfig::daily(PatternRef::named("Q7"), 10.0, 1.0, 1);
        assert!(matches!(rate_schedule(&cfg, &lib()), Err(Error::UnknownPattern(_))));
        let mut cfg = GenConfig::daily(PatternRef::named("D1"), 10.0, 1.0, 1);
        cfg.resolution_secs = 7 * 60;
        assert!(rate_schedule(&cfg, &lib()).is_err());
        cfg.resolution_secs = 15 * 60;
        assert_eq!(rate_schedule(&cfg, &lib()).unwrap().entries.len(), 96);
        cfg.mean_rate = 0.0;
        assert!(rate_schedule(&cfg, &lib()).is_err());
    }

    #[test]
    fn weekly_pattern_is_constant_within_a_day() {
        let cfg = GenConfig::daily(PatternRef::named("W1"), 1000.0, 100.0, 7);
        let s = rate_schedule(&cfg, &lib()).unwrap();
        assert_abs_diff_eq!(s.entries[0].rate, 1000.0 + 100.0 * 0.824, epsilon = 1e-9);
        assert_eq!(s.entries[0].rate, s.entries[23].rate);
        assert_ne!(s.entries[23].rate, s.entries[24].rate);
    }

    #[test]
    fn compose_degenerates_without_weekly_term() {
        let mut cfg = GenConfig::daily(PatternRef::named("D3"), 800.0, 200.0, 7);
        cfg.weekly_coefficient = 0.0;
        let composed = compose(&PatternRef::named("W2"), &PatternRef::named("D3"), &cfg, &lib()).unwrap();
        let plain = rate_schedule(&cfg, &lib()).unwrap();
        assert_eq!(composed.rates(), plain.rates());
    }

    #[test]
    fn weekend_rise_under_composition() {
        let cfg = GenConfig::daily(flat_daily(), 1000.0, 100.0, 7);
        let s = compose(&PatternRef::named("W2"), &flat_daily(), &cfg, &lib()).unwrap();
        let monday = s.entries[0].rate;
        let sunday = s.entries[6 * 24].rate;
        assert!(monday < sunday, "{monday} vs {sunday}");
        let sum: f64 = s.rates().iter().sum();
        assert_abs_diff_eq!(s.expected_total(), sum, epsilon = 1e-6);
    }

    #[test]
    fn compose_rejects_swapped_patterns() {
        let cfg = GenConfig::daily(flat_daily(), 1000.0, 100.0, 7);
        assert!(compose(&PatternRef::named("D1"), &PatternRef::named("W1"), &cfg, &lib()).is_err());
    }

    #[test]
    fn zero_rate_emits_nothing() {
        let meta = ScheduleMeta {
            patterns: vec![],
            mean_rate: 1.0,
            std: 0.0,
            seed: 0,
            clipped_fraction: 0.0,
            weekly_coefficient: None,
            bursts: None,
        };
        let s = Schedule::from_rates(0, 3600, &[0.0; 5], meta).unwrap();
        assert!(emit_events(&s, 1).unwrap().is_empty());
    }

    #[test]
    fn poisson_counts_concentrate() {
        let cfg = GenConfig::daily(PatternRef::named("D1"), 3600.0, 0.0, 1);
        let mut s = rate_schedule(&cfg, &lib()).unwrap();
        s.entries.truncate(1);
        let mut total = 0usize;
        for seed in 0..10 {
            let ev = emit_events(&s, seed).unwrap();
            assert!(ev.windows(2).all(|w| w[0] <= w[1]));
            assert!(ev.iter().all(|t| *t >= s.entries[0].start as f64 && *t < (s.entries[0].start + 3600) as f64));
            total += ev.len();
        }
        let mean = total as f64 / 10.0;
        // σ of the mean of 10 draws is sqrt(3600/10) = 19
        assert!((mean - 3600.0).abs() < 3.0 * 19.0, "mean {mean}");
    }

    #[test]
    fn emission_is_deterministic_and_rebins() {
        let s = rate_schedule(&GenConfig::daily(PatternRef::named("D2"), 2000.0, 500.0, 2), &lib()).unwrap();
        let a = emit_events(&s, 7).unwrap();
        assert_eq!(a, emit_events(&s, 7).unwrap());
        assert_ne!(a, emit_events(&s, 8).unwrap());
        let ts = bin_instants("g", &a, BinWidth::Hour).unwrap();
        for (bin, e) in ts.bins.iter().zip(&s.entries) {
            assert_eq!(bin.start, e.start);
            // 5σ Poisson band
            assert!((bin.count - e.rate).abs() < 5.0 * e.rate.sqrt() + 1.0);
        }
    }

    #[test]
    fn burst_targets() {
        let flat = rate_schedule(&GenConfig::daily(PatternRef::named("D1"), 1000.0, 0.0, 7), &lib()).unwrap();
        assert!(matches!(inject_bursts(&flat, -1.0, 0), Err(Error::TargetNotAbove { .. })));
        for target in [-0.5, 0.0, 0.5] {
            let out = inject_bursts(&flat, target, 3).unwrap();
            let b = stats::burstiness(&out.rates()).unwrap();
            assert!((b - target).abs() <= BURST_TOLERANCE, "target {target} got {b}");
            let before = flat.expected_total();
            assert!((out.expected_total() - before).abs() <= 0.01 * before);
            assert!(out.meta.bursts.is_some());
        }
    }

    #[test]
    fn burst_target_via_config() {
        let mut cfg = GenConfig::daily(PatternRef::named("D3"), 1000.0, 100.0, 7);
        cfg.burstiness_target = Some(0.2);
        let s = rate_schedule(&cfg, &lib()).unwrap();
        assert!((stats::burstiness(&s.rates()).unwrap() - 0.2).abs() <= BURST_TOLERANCE);
    }
}
