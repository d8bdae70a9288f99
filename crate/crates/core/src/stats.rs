//! Variability (coefficient of variation) and burstiness of raw rows.
//!
//! Both metrics are computed on aggregated counts before standardization;
//! [`profile`] refuses matrices that have already been preprocessed.

use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::moments::mean_std;
use crate::timeseries::{Granularity, Provenance, WorkloadMatrix};
use crate::{Error, Result};

/// `σ / μ` with the population σ.
pub fn cv(v: &[f64]) -> Result<f64> {
    let (mean, sd) = checked_moments(v)?;
    Ok(sd / mean)
}

/// `(σ − μ) / (σ + μ)`, in `[-1, 1]` for non-negative rows.
pub fn burstiness(v: &[f64]) -> Result<f64> {
    let (mean, sd) = checked_moments(v)?;
    Ok((sd - mean) / (sd + mean))
}

/// Burstiness expressed through the coefficient of variation `r`: `(r − 1)/(r + 1)`.
pub fn burstiness_from_cv(r: f64) -> f64 {
    (r - 1.0) / (r + 1.0)
}

/// CV above 1 marks high relative variability.
pub fn is_highly_variable(cv: f64) -> bool {
    cv > 1.0
}

fn checked_moments(v: &[f64]) -> Result<(f64, f64)> {
    if v.is_empty() {
        return Err(Error::invalid("empty row"));
    }
    if v.iter().any(|x| *x < 0.0 || !x.is_finite()) {
        return Err(Error::invalid("rows must hold non-negative finite counts"));
    }
    let (mean, sd) = mean_std(v);
    if mean <= 0.0 {
        return Err(Error::ZeroMean);
    }
    Ok((mean, sd))
}

/// How per-row values reduce to one dataset-level figure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    /// Arithmetic mean of the per-row values.
    #[default]
    RowMean,
    /// σ and μ over every value of every admissible row at once.
    WholeSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowProfile {
    pub dataset: String,
    pub origin: NaiveDate,
    pub cv: f64,
    pub burstiness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub dataset_id: String,
    pub granularity: Granularity,
    pub reduction: Reduction,
    pub per_row: Vec<RowProfile>,
    pub cv_mean: f64,
    pub burstiness_mean: f64,
    /// All-zero rows left out of the means.
    pub excluded: Vec<(String, NaiveDate)>,
}

pub fn profile(m: &WorkloadMatrix, reduction: Reduction) -> Result<DatasetProfile> {
    if m.provenance != Provenance::Raw {
        return Err(Error::ProvenanceViolation);
    }
    let mut per_row = Vec::with_capacity(m.rows.len());
    let mut excluded = Vec::new();
    let mut pooled = Vec::new();
    for row in &m.rows {
        match (cv(&row.values), burstiness(&row.values)) {
            (Ok(c), Ok(b)) => {
                per_row.push(RowProfile { dataset: row.dataset.clone(), origin: row.origin, cv: c, burstiness: b });
                if reduction == Reduction::WholeSeries {
                    pooled.extend_from_slice(&row.values);
                }
            }
            (Err(Error::ZeroMean), _) | (_, Err(Error::ZeroMean)) => excluded.push((row.dataset.clone(), row.origin)),
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    let (cv_mean, burstiness_mean) = match reduction {
        _ if per_row.is_empty() => (f64::NAN, f64::NAN),
        Reduction::RowMean => {
            let n = per_row.len() as f64;
            (
                per_row.iter().map(|r| r.cv).sum::<f64>() / n,
                per_row.iter().map(|r| r.burstiness).sum::<f64>() / n,
            )
        }
        Reduction::WholeSeries => (cv(&pooled)?, burstiness(&pooled)?),
    };
    Ok(DatasetProfile {
        dataset_id: m.dataset_id.clone(),
        granularity: m.granularity,
        reduction,
        per_row,
        cv_mean,
        burstiness_mean,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::MatrixRow;
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn weekly(rows: &[[f64; 7]]) -> WorkloadMatrix {
        let mut m = WorkloadMatrix::new("w", Granularity::Weekly, Provenance::Raw);
        let monday = NaiveDate::from_ymd_opt(2023, 1, 2).unwrap();
        for (i, r) in rows.iter().enumerate() {
            m.rows.push(MatrixRow { dataset: "w".into(), origin: monday + chrono::Days::new(7 * i as u64), values: r.to_vec() });
        }
        m
    }

    #[test]
    fn constant_rows() {
        for c in [0.1, 3.0, 1e6, 7.3] {
            assert_eq!(cv(&[c; 24]).unwrap(), 0.0);
            assert_eq!(burstiness(&[c; 24]).unwrap(), -1.0);
        }
    }

    #[test]
    fn sigma_equals_mean() {
        assert_eq!(cv(&[0.0, 2.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(burstiness(&[0.0, 2.0]).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn spiky_row_is_highly_variable() {
        let mut row = vec![0.0; 24];
        row[..4].fill(10.0);
        let c = cv(&row).unwrap();
        assert!(is_highly_variable(c), "cv = {c}");
    }

    #[test]
    fn zero_rows_rejected() {
        assert_eq!(cv(&[0.0; 5]), Err(Error::ZeroMean));
        assert_eq!(burstiness(&[0.0; 5]), Err(Error::ZeroMean));
    }

    #[test]
    fn profile_means_and_guards() {
        let m = weekly(&[[5.0; 7], [5.0; 7]]);
        let p = profile(&m, Reduction::RowMean).unwrap();
        assert_eq!(p.cv_mean, 0.0);
        assert_eq!(p.burstiness_mean, -1.0);

        let mixed = weekly(&[[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0], [0.0; 7], [9.0, 0.0, 0.0, 9.0, 0.0, 0.0, 1.0]]);
        let p = profile(&mixed, Reduction::RowMean).unwrap();
        assert_eq!(p.excluded.len(), 1);
        // independent per-row recomputation
        let row_cv = |v: &[f64]| {
            let n = v.len() as f64;
            let mu = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
            (var.sqrt() / mu, (var.sqrt() - mu) / (var.sqrt() + mu))
        };
        let (c0, b0) = row_cv(&mixed.rows[0].values);
        let (c2, b2) = row_cv(&mixed.rows[2].values);
        assert_abs_diff_eq!(p.cv_mean, (c0 + c2) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.burstiness_mean, (b0 + b2) / 2.0, epsilon = 1e-12);

        let mut pre = m.clone();
        pre.provenance = Provenance::Preprocessed;
        assert_eq!(profile(&pre, Reduction::RowMean), Err(Error::ProvenanceViolation));
    }

    #[test]
    fn whole_series_reduction() {
        let m = weekly(&[[1.0; 7], [3.0; 7]]);
        let p = profile(&m, Reduction::WholeSeries).unwrap();
        // pooled: half 1s, half 3s → μ = 2, σ = 1
        assert_abs_diff_eq!(p.cv_mean, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.burstiness_mean, -1.0 / 3.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn burstiness_bounds_and_cv_link(v in prop::collection::vec(0f64..1e4, 1..48)) {
            prop_assume!(v.iter().any(|x| *x > 0.0));
            let b = burstiness(&v).unwrap();
            let c = cv(&v).unwrap();
            prop_assert!((-1.0..=1.0).contains(&b));
            prop_assert!((b - burstiness_from_cv(c)).abs() < 1e-12);
        }

        #[test]
        fn cv_scale_invariant(v in prop::collection::vec(0f64..1e3, 2..48), a in 0.01f64..100.0) {
            prop_assume!(v.iter().any(|x| *x > 0.0));
            let scaled: Vec<f64> = v.iter().map(|x| a * x).collect();
            prop_assert!((cv(&v).unwrap() - cv(&scaled).unwrap()).abs() < 1e-9);
        }
    }
}
