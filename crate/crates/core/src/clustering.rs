//! K-Means over fixed-width rows with a pluggable distance, silhouette
//! scoring and silhouette-driven choice of k.
//!
//! Seeding is greedy k-means++ driven by a ChaCha8 generator seeded from the
//! caller's seed, so a `(rows, k, metric, seed)` tuple always yields the same
//! model. Centroids are coordinate-wise member means for every metric.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distance::{assignment_cost, distance, dtw_cost, squared_euclidean, DistanceConfig};
use crate::{Error, Result};

pub const MAX_ITERATIONS: usize = 300;
pub const DEFAULT_SEED_COUNT: u64 = 10;
pub const DEFAULT_K_MIN: usize = 2;
pub const DEFAULT_K_MAX: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub metric: DistanceConfig,
    pub seed: u64,
    pub centroids: Vec<Vec<f64>>,
    /// Label of each input row, in input order.
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub silhouette: f64,
    pub sizes: Vec<usize>,
    pub iterations: usize,
    /// False when the iteration cap was hit before assignments settled.
    pub converged: bool,
    /// Inertia after each Lloyd update.
    pub inertia_history: Vec<f64>,
}

impl ClusterModel {
    /// Row indices carrying `label`.
    pub fn members(&self, label: usize) -> Vec<usize> {
        self.assignments.iter().enumerate().filter(|(_, l)| **l == label).map(|(i, _)| i).collect()
    }
}

fn check_rows(rows: &[Vec<f64>]) -> Result<usize> {
    let width = rows.first().map(Vec::len).ok_or(Error::TooFewRows { needed: 1, available: 0 })?;
    if let Some(bad) = rows.iter().find(|r| r.len() != width) {
        return Err(Error::LengthMismatch(bad.len(), width));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::invalid("rows contain non-finite values"));
    }
    Ok(width)
}

/// Number of distinct rows (bitwise comparison).
pub fn distinct_rows(rows: &[Vec<f64>]) -> usize {
    let mut keys: Vec<Vec<u64>> = rows.iter().map(|r| r.iter().map(|x| x.to_bits()).collect()).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Clusters `rows` into `k` groups and scores the result.
pub fn kmeans(rows: &[Vec<f64>], k: usize, cfg: &DistanceConfig, seed: u64) -> Result<ClusterModel> {
    let mut model = fit(rows, k, cfg, seed)?;
    model.silhouette = silhouette(rows, &model)?;
    Ok(model)
}

/// Lloyd iterations from a greedy k-means++ start; silhouette left at NaN.
fn fit(rows: &[Vec<f64>], k: usize, cfg: &DistanceConfig, seed: u64) -> Result<ClusterModel> {
    cfg.validate()?;
    let width = check_rows(rows)?;
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    let distinct = distinct_rows(rows);
    if distinct < k {
        return Err(Error::TooFewRows { needed: k, available: distinct });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(rows, k, cfg, &mut rng)?;
    let n = rows.len();
    let mut labels: Vec<usize> = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut next = Vec::with_capacity(n);
        for row in rows {
            next.push(nearest(row, &centroids, cfg)?.0);
        }
        repair_empty(rows, &mut next, &centroids, k, cfg)?;
        let settled = next == labels;
        labels = next;
        centroids = member_means(rows, &labels, k, width);
        let inertia = total_cost(rows, &labels, &centroids, cfg)?;
        if matches!(cfg, DistanceConfig::Euclidean) {
            if let Some(&prev) = history.last() {
                debug_assert!(inertia <= prev + 1e-9 * (1.0 + prev), "inertia rose from {prev} to {inertia}");
            }
        }
        history.push(inertia);
        if settled {
            converged = true;
            break;
        }
    }
    if converged && matches!(cfg, DistanceConfig::Euclidean) && transfer_refine(rows, &mut labels, &mut centroids, k) {
        history.push(total_cost(rows, &labels, &centroids, cfg)?);
    }

    let mut sizes = vec![0usize; k];
    for &l in &labels {
        sizes[l] += 1;
    }
    Ok(ClusterModel {
        k,
        metric: *cfg,
        seed,
        centroids,
        assignments: labels,
        inertia: history.last().copied().unwrap_or(0.0),
        silhouette: f64::NAN,
        sizes,
        iterations,
        converged,
        inertia_history: history,
    })
}

fn seed_cost(a: &[f64], b: &[f64], cfg: &DistanceConfig) -> Result<f64> {
    match cfg {
        // soft-DTW can be negative; seed on the hard alignment cost instead
        DistanceConfig::SoftDtw { .. } => Ok(dtw_cost(a, b)),
        _ => assignment_cost(a, b, cfg),
    }
}

/// Greedy k-means++: each new center is the best of `2 + ln k` candidates
/// drawn proportionally to the current closest-center cost.
fn seed_centroids(rows: &[Vec<f64>], k: usize, cfg: &DistanceConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let n = rows.len();
    let trials = 2 + libm::log(k as f64) as usize;
    let first = rng.random_range(0..n);
    let mut centroids = vec![rows[first].clone()];
    let mut closest: Vec<f64> = rows.iter().map(|r| seed_cost(r, &rows[first], cfg)).collect::<Result<_>>()?;

    while centroids.len() < k {
        let total: f64 = closest.iter().sum();
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let cand = if total > 0.0 {
                let target = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = n - 1;
                for (i, c) in closest.iter().enumerate() {
                    acc += c;
                    if acc > target {
                        pick = i;
                        break;
                    }
                }
                // rounding can land on a zero-cost row at the tail
                if closest[pick] == 0.0 {
                    pick = closest.iter().rposition(|c| *c > 0.0).unwrap_or(pick);
                }
                pick
            } else {
                rng.random_range(0..n)
            };
            let updated: Vec<f64> = rows
                .iter()
                .zip(&closest)
                .map(|(r, c)| seed_cost(r, &rows[cand], cfg).map(|d| d.min(*c)))
                .collect::<Result<_>>()?;
            let potential: f64 = updated.iter().sum();
            if best.as_ref().map_or(true, |(p, _, _)| potential < *p) {
                best = Some((potential, cand, updated));
            }
        }
        let (_, cand, updated) = best.expect("at least one trial");
        centroids.push(rows[cand].clone());
        closest = updated;
    }
    Ok(centroids)
}

/// Nearest centroid; ties go to the lower label.
fn nearest(row: &[f64], centroids: &[Vec<f64>], cfg: &DistanceConfig) -> Result<(usize, f64)> {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = assignment_cost(row, c, cfg)?;
        if d < best.1 {
            best = (j, d);
        }
    }
    Ok(best)
}

/// Moves the farthest member of the largest cluster into each empty one.
fn repair_empty(
    rows: &[Vec<f64>],
    labels: &mut [usize],
    centroids: &[Vec<f64>],
    k: usize,
    cfg: &DistanceConfig,
) -> Result<()> {
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return Ok(());
        };
        let largest = (0..k).max_by_key(|&j| (sizes[j], core::cmp::Reverse(j))).expect("k > 0");
        let mut far = (usize::MAX, f64::NEG_INFINITY);
        for (i, row) in rows.iter().enumerate() {
            if labels[i] == largest {
                let d = assignment_cost(row, &centroids[largest], cfg)?;
                if d > far.1 {
                    far = (i, d);
                }
            }
        }
        labels[far.0] = empty;
    }
}

/// Hartigan single-point transfers after Lloyd has settled (squared
/// Euclidean only). Moving `x` from cluster `a` to `b` changes the inertia by
/// `n_b/(n_b+1)·‖x−c_b‖² − n_a/(n_a−1)·‖x−c_a‖²`; any negative change is
/// taken. Every fixpoint of this pass is also a Lloyd fixpoint, and it escapes
/// some Lloyd fixpoints that are not optimal. Returns whether anything moved.
fn transfer_refine(rows: &[Vec<f64>], labels: &mut [usize], centroids: &mut [Vec<f64>], k: usize) -> bool {
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    let mut moved_any = false;
    for _ in 0..MAX_ITERATIONS {
        let mut moved = false;
        for (i, x) in rows.iter().enumerate() {
            let a = labels[i];
            if sizes[a] < 2 {
                continue;
            }
            let na = sizes[a] as f64;
            let remove = na / (na - 1.0) * squared_euclidean(x, &centroids[a]);
            let mut best = (a, 0.0);
            for b in (0..k).filter(|&b| b != a) {
                let nb = sizes[b] as f64;
                let delta = nb / (nb + 1.0) * squared_euclidean(x, &centroids[b]) - remove;
                // relative margin keeps rounding noise from cycling a point
                if delta < best.1 - 1e-12 * (1.0 + remove) {
                    best = (b, delta);
                }
            }
            let b = best.0;
            if b == a {
                continue;
            }
            let nb = sizes[b] as f64;
            for (j, &v) in x.iter().enumerate() {
                centroids[a][j] = (centroids[a][j] * na - v) / (na - 1.0);
                centroids[b][j] = (centroids[b][j] * nb + v) / (nb + 1.0);
            }
            sizes[a] -= 1;
            sizes[b] += 1;
            labels[i] = b;
            moved = true;
        }
        if !moved {
            break;
        }
        moved_any = true;
    }
    if moved_any {
        // recompute exactly to drop drift from the incremental updates
        let width = centroids.first().map_or(0, Vec::len);
        let fresh = member_means(rows, labels, k, width);
        centroids.clone_from_slice(&fresh);
    }
    moved_any
}

fn member_means(rows: &[Vec<f64>], labels: &[usize], k: usize, width: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; width]; k];
    let mut counts = vec![0usize; k];
    for (row, &l) in rows.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(row) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        for x in s.iter_mut() {
            *x /= c as f64;
        }
    }
    sums
}

fn total_cost(rows: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>], cfg: &DistanceConfig) -> Result<f64> {
    let mut total = 0.0;
    for (row, &l) in rows.iter().zip(labels) {
        total += assignment_cost(row, &centroids[l], cfg)?;
    }
    Ok(total)
}

/// Condensed symmetric matrix of pairwise row distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl DistanceMatrix {
    pub fn compute(rows: &[Vec<f64>], cfg: &DistanceConfig) -> Result<Self> {
        let n = rows.len();
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                upper.push(distance(&rows[i], &rows[j], cfg)?);
            }
        }
        Ok(DistanceMatrix { n, upper })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        // offset of row i in the condensed upper triangle
        let base = i * self.n - i * (i + 1) / 2;
        self.upper[base + (j - i - 1)]
    }
}

/// Mean silhouette of a fitted model.
pub fn silhouette(rows: &[Vec<f64>], model: &ClusterModel) -> Result<f64> {
    let dist = DistanceMatrix::compute(rows, &model.metric)?;
    silhouette_from_matrix(&dist, &model.assignments, model.k)
}

/// Mean over points of `(b − a) / max(a, b)`; points in singleton clusters
/// score 0.
pub fn silhouette_from_matrix(dist: &DistanceMatrix, labels: &[usize], k: usize) -> Result<f64> {
    let n = labels.len();
    if dist.len() != n {
        return Err(Error::LengthMismatch(dist.len(), n));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::UnknownLabel(bad));
    }
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::SingleCluster);
    }
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        let own = labels[i];
        if sizes[own] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if j != i {
                sums[labels[j]] += dist.get(i, j);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Runs every seed and keeps the lowest-inertia model (earliest seed on ties).
pub fn best_of_seeds(rows: &[Vec<f64>], k: usize, cfg: &DistanceConfig, seeds: &[u64]) -> Result<ClusterModel> {
    let mut best: Option<ClusterModel> = None;
    for &seed in seeds {
        let m = fit(rows, k, cfg, seed)?;
        if best.as_ref().map_or(true, |b| m.inertia < b.inertia) {
            best = Some(m);
        }
    }
    best.ok_or_else(|| Error::invalid("no seeds given"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub silhouette: f64,
    pub inertia: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub k_best: usize,
    pub model: ClusterModel,
    pub curve: Vec<CurvePoint>,
}

/// Index of the highest silhouette, preferring the smaller k on ties.
pub fn pick_best(curve: &[CurvePoint]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, p) in curve.iter().enumerate() {
        if best.map_or(true, |b| p.silhouette > curve[b].silhouette) {
            best = Some(i);
        }
    }
    best
}

/// Fits every k in `k_min..=k_max` (best of `seeds` by inertia) and picks
/// the k with the highest silhouette.
pub fn select_k(
    rows: &[Vec<f64>],
    k_min: usize,
    k_max: usize,
    cfg: &DistanceConfig,
    seeds: &[u64],
) -> Result<Selection> {
    if k_min < 2 || k_max < k_min {
        return Err(Error::invalid("k range must satisfy 2 <= k_min <= k_max"));
    }
    if k_max > rows.len() {
        return Err(Error::TooFewRows { needed: k_max, available: rows.len() });
    }
    let dist = DistanceMatrix::compute(rows, cfg)?;
    let mut curve = Vec::new();
    let mut models = Vec::new();
    for k in k_min..=k_max {
        let mut m = best_of_seeds(rows, k, cfg, seeds)?;
        m.silhouette = silhouette_from_matrix(&dist, &m.assignments, k)?;
        curve.push(CurvePoint { k, silhouette: m.silhouette, inertia: m.inertia });
        models.push(m);
    }
    let best = pick_best(&curve).expect("non-empty range");
    Ok(Selection { k_best: curve[best].k, model: models.swap_remove(best), curve })
}

pub fn default_seeds() -> Vec<u64> {
    (0..DEFAULT_SEED_COUNT).collect()
}
