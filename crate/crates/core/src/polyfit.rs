//! Quadratic and cubic least-squares fits via Levenberg–Marquardt.
//!
//! The fit is linear in its coefficients, so LM must land on the ordinary
//! least-squares solution. Every fit is cross-checked against a Householder
//! QR solve and rejected if the two disagree.
//!
//! Both solvers work on `s = (t − center) / half_width`, which keeps the
//! normal matrix well conditioned for grids such as `0..23`; coefficients
//! are mapped back to powers of `t` at the end.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const INITIAL_LAMBDA: f64 = 1e-3;
pub const LAMBDA_FACTOR: f64 = 10.0;
pub const STEP_TOLERANCE: f64 = 1e-10;
pub const MAX_LM_ITERATIONS: usize = 200;
/// Largest allowed per-coefficient gap between LM and the linear solve.
pub const CROSS_CHECK_TOLERANCE: f64 = 1e-6;

/// `a·t² + b·t + c` or `a·t³ + b·t² + c·t + d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialModel {
    pub degree: u8,
    /// Highest power first: `(a, b, c)` or `(a, b, c, d)`.
    pub coefficients: Vec<f64>,
    /// Half-open range `[start, end)` of `t` the model describes.
    pub domain: (f64, f64),
    /// Root-mean-square residual of the fit; 0 for hand-written models.
    pub rmse: f64,
}

impl PolynomialModel {
    pub fn new(coefficients: Vec<f64>, domain: (f64, f64)) -> Result<Self> {
        let degree = match coefficients.len() {
            3 => 2,
            4 => 3,
            n => return Err(Error::invalid(alloc::format!("expected 3 or 4 coefficients, got {n}"))),
        };
        if !(domain.0 < domain.1) {
            return Err(Error::invalid("empty domain"));
        }
        Ok(PolynomialModel { degree, coefficients, domain, rmse: 0.0 })
    }

    /// Horner evaluation; `t` may lie outside the domain.
    pub fn evaluate(&self, t: f64) -> f64 {
        self.coefficients.iter().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn in_domain(&self, t: f64) -> bool {
        t >= self.domain.0 && t < self.domain.1
    }

    pub fn domain_len(&self) -> f64 {
        self.domain.1 - self.domain.0
    }

    /// Evaluates at `t` folded into the domain periodically.
    pub fn evaluate_periodic(&self, t: f64) -> f64 {
        let len = self.domain_len();
        let mut offset = libm::fmod(t - self.domain.0, len);
        if offset < 0.0 {
            offset += len;
        }
        self.evaluate(self.domain.0 + offset)
    }
}

/// Hour grid `0..24` used for daily fits.
pub fn daily_grid() -> Vec<f64> {
    (0..24).map(f64::from).collect()
}

/// Weekday grid `1..=7` (Monday = 1) used for weekly fits.
pub fn weekly_grid() -> Vec<f64> {
    (1..=7).map(f64::from).collect()
}

/// Least-squares polynomial fit of `y` sampled at `t_grid`.
///
/// The domain is `[min t, max t + mean spacing)`, so `0..23` yields
/// `[0, 24)` and `1..=7` yields `[1, 8)`.
pub fn fit_polynomial(y: &[f64], degree: u8, t_grid: &[f64]) -> Result<PolynomialModel> {
    if !(2..=3).contains(&degree) {
        return Err(Error::invalid("degree must be 2 or 3"));
    }
    let p = degree as usize + 1;
    if y.len() != t_grid.len() {
        return Err(Error::LengthMismatch(y.len(), t_grid.len()));
    }
    if y.len() < p + 1 {
        return Err(Error::invalid(alloc::format!("need at least {} samples for degree {degree}", p + 1)));
    }
    if y.iter().chain(t_grid).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite sample"));
    }
    let mut distinct: Vec<f64> = t_grid.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < p {
        return Err(Error::RankDeficient);
    }
    let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
    let center = (lo + hi) / 2.0;
    let half = (hi - lo) / 2.0;
    let basis: Vec<Vec<f64>> = t_grid
        .iter()
        .map(|t| {
            let s = (t - center) / half;
            let mut row = vec![1.0; p];
            for k in 1..p {
                row[k] = row[k - 1] * s;
            }
            row
        })
        .collect();

    let scaled_lm = levenberg_marquardt(&basis, y)?;
    let scaled_lin = qr_least_squares(&basis, y)?;
    let lm = unscale(&scaled_lm, center, half);
    let lin = unscale(&scaled_lin, center, half);
    let gap = lm.iter().zip(&lin).map(|(a, b)| libm::fabs(a - b)).fold(0.0, f64::max);
    if gap > CROSS_CHECK_TOLERANCE {
        return Err(Error::FitMismatch(gap));
    }

    let mut coefficients = lm;
    coefficients.reverse();
    let spacing = (hi - lo) / (distinct.len() - 1) as f64;
    let mut model = PolynomialModel { degree, coefficients, domain: (lo, hi + spacing), rmse: 0.0 };
    let sse: f64 = t_grid.iter().zip(y).map(|(t, v)| (model.evaluate(*t) - v) * (model.evaluate(*t) - v)).sum();
    model.rmse = libm::sqrt(sse / y.len() as f64);
    Ok(model)
}

/// Damped Gauss–Newton on `min ‖B q − y‖²` from `q = 0`, with Marquardt's
/// diagonal scaling.
fn levenberg_marquardt(basis: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let p = basis[0].len();
    // J = B for a linear model, so JᵀJ is fixed
    let mut jtj = vec![vec![0.0; p]; p];
    for row in basis {
        for i in 0..p {
            for j in 0..p {
                jtj[i][j] += row[i] * row[j];
            }
        }
    }
    let cost = |q: &[f64]| -> f64 {
        basis
            .iter()
            .zip(y)
            .map(|(row, v)| {
                let r = row.iter().zip(q).map(|(b, c)| b * c).sum::<f64>() - v;
                r * r
            })
            .sum()
    };
    let mut q = vec![0.0; p];
    let mut current = cost(&q);
    let mut lambda = INITIAL_LAMBDA;
    for _ in 0..MAX_LM_ITERATIONS {
        let mut grad = vec![0.0; p];
        for (row, v) in basis.iter().zip(y) {
            let r = row.iter().zip(&q).map(|(b, c)| b * c).sum::<f64>() - v;
            for i in 0..p {
                grad[i] += row[i] * r;
            }
        }
        let mut system = jtj.clone();
        for i in 0..p {
            system[i][i] += lambda * jtj[i][i];
        }
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let step = solve_dense(system, rhs)?;
        let trial: Vec<f64> = q.iter().zip(&step).map(|(a, d)| a + d).collect();
        let trial_cost = cost(&trial);
        if trial_cost < current {
            q = trial;
            current = trial_cost;
            lambda /= LAMBDA_FACTOR;
        } else {
            lambda *= LAMBDA_FACTOR;
        }
        let norm = libm::sqrt(step.iter().map(|d| d * d).sum::<f64>());
        if norm < STEP_TOLERANCE {
            break;
        }
    }
    Ok(q)
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| libm::fabs(a[i][col]).total_cmp(&libm::fabs(a[j][col])))
            .expect("non-empty");
        if libm::fabs(a[pivot][col]) < 1e-300 {
            return Err(Error::RankDeficient);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Ok(x)
}

/// Householder QR least squares.
fn qr_least_squares(basis: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let m = basis.len();
    let p = basis[0].len();
    let mut a: Vec<Vec<f64>> = basis.to_vec();
    let mut b = y.to_vec();
    for col in 0..p {
        let norm = libm::sqrt((col..m).map(|i| a[i][col] * a[i][col]).sum::<f64>());
        if norm < 1e-300 {
            return Err(Error::RankDeficient);
        }
        let alpha = if a[col][col] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (col..m).map(|i| a[i][col]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in col..p {
                let dot: f64 = (col..m).map(|i| v[i - col] * a[i][j]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in col..m {
                    a[i][j] -= f * v[i - col];
                }
            }
            let dot: f64 = (col..m).map(|i| v[i - col] * b[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in col..m {
                b[i] -= f * v[i - col];
            }
        }
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|k| a[i][k] * x[k]).sum();
        if libm::fabs(a[i][i]) < 1e-12 {
            return Err(Error::RankDeficient);
        }
        x[i] = (b[i] - s) / a[i][i];
    }
    Ok(x)
}

/// Maps ascending coefficients in `s = (t − c)/h` to ascending powers of `t`.
fn unscale(q: &[f64], center: f64, half: f64) -> Vec<f64> {
    let p = q.len();
    let mut out = vec![0.0; p];
    for (k, &qk) in q.iter().enumerate() {
        // ((t − c)/h)^k = h^−k Σ_j C(k,j) t^j (−c)^(k−j)
        let scale = qk / libm::pow(half, k as f64);
        for j in 0..=k {
            out[j] += scale * binomial(k, j) * libm::pow(-center, (k - j) as f64);
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
