//! Row distances: Euclidean, dynamic time warping and soft-DTW.

use alloc::vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_SOFTDTW_GAMMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "lowercase")]
pub enum DistanceConfig {
    #[default]
    Euclidean,
    Dtw,
    SoftDtw { gamma: f64 },
}

impl DistanceConfig {
    pub fn softdtw(gamma: f64) -> Result<Self> {
        let cfg = DistanceConfig::SoftDtw { gamma };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DistanceConfig::SoftDtw { gamma } if !(gamma > 0.0) || !gamma.is_finite() => {
                Err(Error::invalid("soft-DTW gamma must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistanceConfig::Euclidean => "euclidean",
            DistanceConfig::Dtw => "dtw",
            DistanceConfig::SoftDtw { .. } => "softdtw",
        }
    }
}

/// Distance between two rows under `cfg`.
///
/// Euclidean and DTW return the square root of a sum of squared pointwise
/// differences; soft-DTW returns its smoothed cumulative cost directly, which
/// can be negative.
pub fn distance(a: &[f64], b: &[f64], cfg: &DistanceConfig) -> Result<f64> {
    match *cfg {
        DistanceConfig::Euclidean => {
            if a.len() != b.len() {
                return Err(Error::LengthMismatch(a.len(), b.len()));
            }
            Ok(libm::sqrt(squared_euclidean(a, b)))
        }
        DistanceConfig::Dtw => Ok(libm::sqrt(dtw_cost(a, b))),
        DistanceConfig::SoftDtw { gamma } => {
            cfg.validate()?;
            Ok(soft_dtw(a, b, gamma))
        }
    }
}

/// Cost of assigning `a` to centroid `b`, on the squared scale: `‖a−b‖²`,
/// `dtw²`, or the soft-DTW value itself.
pub fn assignment_cost(a: &[f64], b: &[f64], cfg: &DistanceConfig) -> Result<f64> {
    match *cfg {
        DistanceConfig::Euclidean => {
            if a.len() != b.len() {
                return Err(Error::LengthMismatch(a.len(), b.len()));
            }
            Ok(squared_euclidean(a, b))
        }
        DistanceConfig::Dtw => Ok(dtw_cost(a, b)),
        DistanceConfig::SoftDtw { gamma } => Ok(soft_dtw(a, b, gamma)),
    }
}

pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Minimal cumulative squared cost over monotone alignments using unit
/// match/insert/delete steps. Zero-length inputs align at cost 0 only with
/// each other.
pub fn dtw_cost(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return if n == m { 0.0 } else { f64::INFINITY };
    }
    // rolling rows of the (n+1)×(m+1) table
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &x in a {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let c = (x - b[j - 1]) * (x - b[j - 1]);
            cur[j] = c + prev[j - 1].min(prev[j]).min(cur[j - 1]);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// Soft-DTW with smoothing `gamma`, squared pointwise cost.
pub fn soft_dtw(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return if n == m { 0.0 } else { f64::INFINITY };
    }
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &x in a {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let c = (x - b[j - 1]) * (x - b[j - 1]);
            cur[j] = c + soft_min(prev[j - 1], prev[j], cur[j - 1], gamma);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

fn soft_min(x: f64, y: f64, z: f64, gamma: f64) -> f64 {
    let lo = x.min(y).min(z);
    if lo == f64::INFINITY {
        return lo;
    }
    let s = libm::exp(-(x - lo) / gamma) + libm::exp(-(y - lo) / gamma) + libm::exp(-(z - lo) / gamma);
    lo - gamma * libm::log(s)
}
