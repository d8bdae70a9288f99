//! Standardization followed by exponential smoothing.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::moments::mean_std;
use crate::timeseries::{Provenance, WorkloadMatrix};
use crate::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    /// EMA weight of the current observation, in `(0, 1]`.
    pub alpha: f64,
    pub enabled: bool,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig { alpha: DEFAULT_ALPHA, enabled: true }
    }
}

impl SmoothingConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        let cfg = SmoothingConfig { alpha, enabled: true };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn disabled() -> Self {
        SmoothingConfig { alpha: 1.0, enabled: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 && self.alpha <= 1.0 {
            Ok(())
        } else {
            Err(Error::invalid("alpha must lie in (0, 1]"))
        }
    }
}

/// Which values share one mean/σ during standardization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StandardizeScope {
    /// Each row is standardized on its own.
    #[default]
    PerRow,
    /// All rows of one dataset share its mean and σ.
    PerDataset,
}

/// `(x - μ) / σ` elementwise with the population σ.
pub fn zscore_row(v: &[f64]) -> Result<Vec<f64>> {
    if v.len() < 2 {
        return Err(Error::invalid("z-score needs at least two values"));
    }
    let (mean, sd) = mean_std(v);
    standardize_with(v, mean, sd)
}

fn standardize_with(v: &[f64], mean: f64, sd: f64) -> Result<Vec<f64>> {
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::DegenerateRow);
    }
    Ok(v.iter().map(|x| (x - mean) / sd).collect())
}

/// Exponential moving average seeded with the first observation.
pub fn ema(v: &[f64], cfg: &SmoothingConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len());
    if !cfg.enabled {
        out.extend_from_slice(v);
        return out;
    }
    let mut prev = match v.first() {
        Some(&x) => x,
        None => return out,
    };
    out.push(prev);
    for &x in &v[1..] {
        prev = cfg.alpha * x + (1.0 - cfg.alpha) * prev;
        out.push(prev);
    }
    out
}

/// Result of [`preprocess_matrix`]: the surviving rows plus the rows that
/// had no shape to standardize.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub matrix: WorkloadMatrix,
    pub degenerate: Vec<(String, NaiveDate)>,
}

/// Standardizes then smooths every row. Flat rows are removed and listed.
pub fn preprocess_matrix(m: &WorkloadMatrix, cfg: &SmoothingConfig, scope: StandardizeScope) -> Result<Preprocessed> {
    cfg.validate()?;
    m.validate()?;
    let dataset_moments: BTreeMap<&str, (f64, f64)> = match scope {
        StandardizeScope::PerRow => BTreeMap::new(),
        StandardizeScope::PerDataset => {
            let mut pooled: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for row in &m.rows {
                pooled.entry(row.dataset.as_str()).or_default().extend_from_slice(&row.values);
            }
            pooled.into_iter().map(|(k, v)| (k, mean_std(&v))).collect()
        }
    };

    let mut out = WorkloadMatrix::new(m.dataset_id.clone(), m.granularity, Provenance::Preprocessed);
    out.dropped = m.dropped.clone();
    let mut degenerate = Vec::new();
    for row in &m.rows {
        let z = match scope {
            StandardizeScope::PerRow => zscore_row(&row.values),
            StandardizeScope::PerDataset => {
                let (mu, sd) = dataset_moments[row.dataset.as_str()];
                standardize_with(&row.values, mu, sd)
            }
        };
        match z {
            Ok(z) => {
                let mut r = row.clone();
                r.values = ema(&z, cfg);
                out.rows.push(r);
            }
            Err(Error::DegenerateRow) => degenerate.push((row.dataset.clone(), row.origin)),
            Err(e) => return Err(e),
        }
    }
    if out.rows.is_empty() {
        return Err(Error::EmptyResult);
    }
    Ok(Preprocessed { matrix: out, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{Granularity, MatrixRow};
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn matrix(rows: &[&[f64]]) -> WorkloadMatrix {
        let mut m = WorkloadMatrix::new("t", Granularity::Daily, Provenance::Raw);
        let d0 = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap();
        for (i, r) in rows.iter().enumerate() {
            // daily rows need width 24; tile the short fixtures
            let values: Vec<f64> = r.iter().copied().cycle().take(24).collect();
            m.rows.push(MatrixRow { dataset: "t".into(), origin: d0 + chrono::Days::new(i as u64), values });
        }
        m
    }

    #[test]
    fn zscore_hand_values() {
        // population σ of [1,2,3] is sqrt(2/3) = 0.81650
        let z = zscore_row(&[1.0, 2.0, 3.0]).unwrap();
        let s = libm::sqrt(1.5);
        assert_abs_diff_eq!(z[0], -s, epsilon = 1e-12);
        assert_abs_diff_eq!(z[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[2], s, epsilon = 1e-12);
        assert_abs_diff_eq!(z[2], 1.2247, epsilon = 1e-4);
        assert_eq!(zscore_row(&[5.0, 5.0, 5.0]), Err(Error::DegenerateRow));
    }

    #[test]
    fn ema_cases() {
        let cfg = SmoothingConfig::new(0.5).unwrap();
        assert_eq!(ema(&[0.0, 1.0, 1.0], &cfg), vec![0.0, 0.5, 0.75]);
        let id = SmoothingConfig::new(1.0).unwrap();
        assert_eq!(ema(&[3.0, -1.0, 7.0], &id), vec![3.0, -1.0, 7.0]);
        assert_eq!(ema(&[2.5; 5], &SmoothingConfig::default()), vec![2.5; 5]);
        assert!(SmoothingConfig::new(0.0).is_err());
        assert!(SmoothingConfig::new(1.5).is_err());
    }

    #[test]
    fn matrix_composition() {
        let m = matrix(&[&[1.0, 2.0, 3.0]]);
        let p = preprocess_matrix(&m, &SmoothingConfig::new(1.0).unwrap(), StandardizeScope::PerRow).unwrap();
        let expect = zscore_row(&m.rows[0].values).unwrap();
        assert_eq!(p.matrix.rows[0].values, expect);
        assert_abs_diff_eq!(p.matrix.rows[0].values[0], -1.2247, epsilon = 1e-4);
        assert_eq!(p.matrix.provenance, Provenance::Preprocessed);
    }

    #[test]
    fn flat_rows_itemized() {
        let m = matrix(&[&[1.0, 2.0], &[4.0], &[0.0, 9.0, 1.0]]);
        let p = preprocess_matrix(&m, &SmoothingConfig::default(), StandardizeScope::PerRow).unwrap();
        assert_eq!(p.matrix.len(), 2);
        assert_eq!(p.degenerate, vec![("t".into(), m.rows[1].origin)]);
        let all_flat = matrix(&[&[1.0], &[2.0]]);
        assert_eq!(
            preprocess_matrix(&all_flat, &SmoothingConfig::default(), StandardizeScope::PerRow),
            Err(Error::EmptyResult)
        );
    }

    #[test]
    fn already_standard_rows_are_fixed_points() {
        let z = zscore_row(&(0..24).map(|i| (i * i) as f64).collect::<Vec<_>>()).unwrap();
        let mut m = matrix(&[&[0.0]]);
        m.rows[0].values = z.clone();
        let p = preprocess_matrix(&m, &SmoothingConfig::new(1.0).unwrap(), StandardizeScope::PerRow).unwrap();
        for (a, b) in p.matrix.rows[0].values.iter().zip(&z) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn per_dataset_scope_shares_moments() {
        let m = matrix(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let p = preprocess_matrix(&m, &SmoothingConfig::disabled(), StandardizeScope::PerDataset).unwrap();
        // pooled values {1,2,3,4}: mean 2.5, σ = sqrt(1.25)
        let sd = libm::sqrt(1.25);
        assert_abs_diff_eq!(p.matrix.rows[0].values[0], (1.0 - 2.5) / sd, epsilon = 1e-12);
        assert_abs_diff_eq!(p.matrix.rows[1].values[1], (4.0 - 2.5) / sd, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn zscore_moments(v in prop::collection::vec(-1e3f64..1e3, 2..40)) {
            let (_, sd) = mean_std(&v);
            prop_assume!(sd > 1e-6);
            let z = zscore_row(&v).unwrap();
            let (m, s) = mean_std(&z);
            prop_assert!(m.abs() < 1e-9);
            prop_assert!((s - 1.0).abs() < 1e-9);
        }

        #[test]
        fn zscore_affine_invariance(
            v in prop::collection::vec(-100f64..100.0, 3..30),
            a in prop_oneof![-50f64..-0.1, 0.1f64..50.0],
            b in -100f64..100.0,
        ) {
            let (_, sd) = mean_std(&v);
            prop_assume!(sd > 1e-3);
            let z = zscore_row(&v).unwrap();
            let w: Vec<f64> = v.iter().map(|x| a * x + b).collect();
            let zw = zscore_row(&w).unwrap();
            let sign = if a > 0.0 { 1.0 } else { -1.0 };
            for (x, y) in z.iter().zip(&zw) {
                prop_assert!((sign * x - y).abs() < 1e-7);
            }
        }

        #[test]
        fn ema_prefix_property(
            v in prop::collection::vec(-10f64..10.0, 1..30),
            suffix in prop::collection::vec(-10f64..10.0, 0..10),
            alpha in 0.01f64..=1.0,
        ) {
            let cfg = SmoothingConfig::new(alpha).unwrap();
            let mut ext = v.clone();
            ext.extend_from_slice(&suffix);
            let full = ema(&ext, &cfg);
            prop_assert_eq!(&full[..v.len()], &ema(&v, &cfg)[..]);
        }
    }
}
