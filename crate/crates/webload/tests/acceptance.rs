//! Acceptance suite. Each criterion prints one PASS/FAIL line; the run fails
//! when any criterion fails. A criterion whose input data is not present on
//! this machine prints `FAIL (blocked)` and does not fail the run, so that
//! the rest of the suite stays usable offline; set `WEBLOAD_ACCEPTANCE_STRICT=1`
//! to make blocked criteria fail it too.

mod common;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use webload::core::clustering::{best_of_seeds, kmeans, select_k, silhouette, ClusterModel};
use webload::core::distance::{dtw_cost, DistanceConfig};
use webload::core::patterns::PatternLibrary;
use webload::core::polyfit::{daily_grid, fit_polynomial, PolynomialModel};
use webload::core::preprocess::{ema, zscore_row, SmoothingConfig};
use webload::core::stats::{burstiness, cv};
use webload::core::synth::{self, GenConfig, Noise, PatternRef, Schedule, ScheduleMeta};
use webload::core::timeseries::{bin_events, bin_instants, to_daily_matrix, BinWidth};
use webload::core::trace::{parse_clf_line, Record, TimezonePolicy};
use webload::replay::{replay, write_clf_to, ClfTemplate, ReplayConfig};

enum Verdict {
    Pass(String),
    Fail(String),
    Blocked(String),
}

type Check = fn() -> Verdict;

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt())
}

fn daily_pattern(name: &str) -> PolynomialModel {
    PatternLibrary::builtin().get(name).unwrap().model.clone()
}

/// Standardized fit coefficients mapped back to the pattern's own scale, using
/// the mean and spread of the generating curve over the hourly grid.
fn unstandardize(fit: &PolynomialModel, generating: &PolynomialModel) -> Vec<f64> {
    let curve: Vec<f64> = daily_grid().iter().map(|&t| generating.evaluate(t)).collect();
    let (m, s) = mean_std(&curve);
    let mut c: Vec<f64> = fit.coefficients.iter().map(|x| x * s).collect();
    *c.last_mut().unwrap() += m;
    c
}

/// Generated daily workload, binned hourly, z-scored and fitted with a cubic.
fn recover(name: &str, noise: Noise, seed: u64) -> PolynomialModel {
    let mut cfg = GenConfig::daily(PatternRef::named(name), 10_000.0, 3_000.0, 1);
    cfg.noise = noise;
    cfg.seed = seed;
    let schedule = synth::rate_schedule(&cfg, &PatternLibrary::builtin()).unwrap();
    assert_eq!(schedule.meta.clipped_fraction, 0.0, "{name} clipped");
    let events = synth::events(&schedule, noise, seed).unwrap();
    let ts = bin_instants(name, &events, BinWidth::Hour).unwrap();
    let m = to_daily_matrix(&ts).unwrap();
    assert_eq!(m.rows.len(), 1);
    let z = zscore_row(&m.rows[0].values).unwrap();
    fit_polynomial(&z, 3, &daily_grid()).unwrap()
}

fn round_trip() -> Verdict {
    let started = Instant::now();
    let mut worst_coef = 0.0f64;
    let mut worst_rmse = 0.0f64;
    for name in ["D1", "D2", "D3"] {
        let gen = daily_pattern(name);
        let got = unstandardize(&recover(name, Noise::None, 0), &gen);
        for (a, b) in got.iter().zip(&gen.coefficients) {
            worst_coef = worst_coef.max((a - b).abs());
        }
        for seed in 0..10 {
            let fit = recover(name, Noise::Poisson, seed);
            let curve = unstandardize(&fit, &gen);
            let model = PolynomialModel::new(curve, gen.domain).unwrap();
            let sse: f64 = daily_grid().iter().map(|&t| (model.evaluate(t) - gen.evaluate(t)).powi(2)).sum();
            worst_rmse = worst_rmse.max((sse / 24.0).sqrt());
        }
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        worst_coef <= 1e-4 && worst_rmse <= 0.15 && secs < 10.0,
        format!("max coefficient error {worst_coef:.2e} (<= 1e-4), max Poisson RMSE {worst_rmse:.4} (<= 0.15), {secs:.2} s (< 10 s)"),
    )
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, width: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..width).map(|_| rng.random_range(-5.0..5.0)).collect()).collect()
}

/// Lowest within-cluster sum of squares over every split into two
/// non-empty groups.
fn exhaustive_two_means(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let width = rows[0].len();
    let mut best = f64::INFINITY;
    // fixing row 0 in group A enumerates each split once
    for mask in 0u32..(1 << (n - 1)) {
        let in_b = |i: usize| i > 0 && mask >> (i - 1) & 1 == 1;
        let mut total = 0.0;
        for side in [false, true] {
            let members: Vec<&Vec<f64>> = (0..n).filter(|&i| in_b(i) == side).map(|i| &rows[i]).collect();
            if members.is_empty() {
                total = f64::INFINITY;
                break;
            }
            for j in 0..width {
                let mu = members.iter().map(|r| r[j]).sum::<f64>() / members.len() as f64;
                total += members.iter().map(|r| (r[j] - mu).powi(2)).sum::<f64>();
            }
        }
        best = best.min(total);
    }
    best
}

fn kmeans_oracle() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let seeds: Vec<u64> = (0..10).collect();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(3..=8);
        let width = rng.random_range(1..=4);
        let rows = random_rows(&mut rng, n, width);
        let model = best_of_seeds(&rows, 2, &DistanceConfig::Euclidean, &seeds).unwrap();
        worst = worst.max((model.inertia - exhaustive_two_means(&rows)).abs());
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(worst <= 1e-9 && secs < 30.0, format!("50 instances, max inertia gap {worst:.2e} (<= 1e-9), {secs:.2} s (< 30 s)"))
}

fn direct_silhouette(rows: &[Vec<f64>], model: &ClusterModel) -> f64 {
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let labels = &model.assignments;
    let mut total = 0.0;
    for i in 0..rows.len() {
        let own: Vec<usize> = (0..rows.len()).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if own.is_empty() {
            continue;
        }
        let a = own.iter().map(|&j| d(&rows[i], &rows[j])).sum::<f64>() / own.len() as f64;
        let mut b = f64::INFINITY;
        for c in 0..model.k {
            let other: Vec<usize> = (0..rows.len()).filter(|&j| labels[j] == c).collect();
            if c != labels[i] && !other.is_empty() {
                b = b.min(other.iter().map(|&j| d(&rows[i], &rows[j])).sum::<f64>() / other.len() as f64);
            }
        }
        if a.max(b) > 0.0 {
            total += (b - a) / a.max(b);
        }
    }
    total / rows.len() as f64
}

fn silhouette_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let n = rng.random_range(5..=12);
        let width = rng.random_range(1..=5);
        let rows = random_rows(&mut rng, n, width);
        let k = rng.random_range(2..=3.min(n - 1));
        let model = kmeans(&rows, k, &DistanceConfig::Euclidean, case).unwrap();
        worst = worst.max((silhouette(&rows, &model).unwrap() - direct_silhouette(&rows, &model)).abs());
    }
    verdict(worst <= 1e-9, format!("20 instances, max difference {worst:.2e} (<= 1e-9)"))
}

fn lm_vs_normal_equations() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let degree: u8 = rng.random_range(2..=3);
        let p = degree as usize + 1;
        let n = rng.random_range(p + 1..=30);
        let mut t: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..24.0)).collect();
        t.sort_by(f64::total_cmp);
        let y: Vec<f64> = t.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
        let fit = fit_polynomial(&y, degree, &t).unwrap();

        // (XᵀX) c = Xᵀy in the raw power basis, highest power first
        let x = DMatrix::from_fn(n, p, |i, j| t[i].powi((p - 1 - j) as i32));
        let xt = x.transpose();
        let c = (&xt * &x).lu().solve(&(&xt * DVector::from_vec(y))).unwrap();
        for (a, b) in fit.coefficients.iter().zip(c.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    verdict(worst <= 1e-6, format!("100 problems, max coefficient gap {worst:.2e} (<= 1e-6)"))
}

fn metric_identities() -> Verdict {
    let mut failures = Vec::new();
    for c in [1.0, 7.5, 1e6] {
        let row = vec![c; 24];
        if cv(&row).unwrap() != 0.0 || burstiness(&row).unwrap() != -1.0 {
            failures.push(format!("constant {c}"));
        }
    }
    // [0, 2μ] has σ = μ
    for mu in [0.5, 1.0, 3.0, 1234.5] {
        let b = burstiness(&[0.0, 2.0 * mu]).unwrap();
        if b.abs() > 1e-12 {
            failures.push(format!("σ=μ={mu}: burstiness {b:e}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let row: Vec<f64> = (0..24).map(|_| rng.random_range(0.0..1000.0)).collect();
        let (m, s) = mean_std(&zscore_row(&row).unwrap());
        if m.abs() > 1e-9 || (s - 1.0).abs() > 1e-9 {
            failures.push(format!("z-score mean {m:e} std {s}"));
        }
        if ema(&row, &SmoothingConfig::new(1.0).unwrap()) != row {
            failures.push("ema α=1 changed the row".into());
        }
    }
    verdict(failures.is_empty(), if failures.is_empty() { "all identities hold".into() } else { failures.join("; ") })
}

/// Minimum squared-cost over every monotone alignment path, by recursion.
fn brute_dtw(a: &[f64], b: &[f64]) -> f64 {
    fn go(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
        let c = (a[i] - b[j]).powi(2);
        if i == a.len() - 1 && j == b.len() - 1 {
            return c;
        }
        let mut best = f64::INFINITY;
        if i + 1 < a.len() && j + 1 < b.len() {
            best = best.min(go(a, b, i + 1, j + 1));
        }
        if i + 1 < a.len() {
            best = best.min(go(a, b, i + 1, j));
        }
        if j + 1 < b.len() {
            best = best.min(go(a, b, i, j + 1));
        }
        c + best
    }
    go(a, b, 0, 0)
}

fn dtw_brute_force() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut failures = Vec::new();
    for case in 0..20 {
        let (n, m) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (dp, brute) = (dtw_cost(&a, &b), brute_dtw(&a, &b));
        if (dp - brute).abs() > 1e-12 * brute.max(1.0) {
            failures.push(format!("case {case}: dp {dp} brute {brute}"));
        }
        if dtw_cost(&a, &a) != 0.0 {
            failures.push(format!("case {case}: dtw(a,a) != 0"));
        }
        let b_same: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let diagonal: f64 = a.iter().zip(&b_same).map(|(x, y)| (x - y).powi(2)).sum();
        if dtw_cost(&a, &b_same) > diagonal {
            failures.push(format!("case {case}: above diagonal cost"));
        }
    }
    verdict(failures.is_empty(), if failures.is_empty() { "20 cases agree with enumeration".into() } else { failures.join("; ") })
}

fn nasa_trace() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("WEBLOAD_NASA_TRACE") {
        return Some(PathBuf::from(p));
    }
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    ["NASA_access_log_Jul95", "NASA_access_log_Jul95.gz"].iter().map(|f| data.join(f)).find(|p| p.is_file())
}

fn nasa_pipeline() -> Verdict {
    let Some(trace) = nasa_trace() else {
        return Verdict::Blocked(
            "NASA July 1995 trace not found; set WEBLOAD_NASA_TRACE or place it under crates/webload/tests/data".into(),
        );
    };
    let dir = tempfile::tempdir().unwrap();
    match common::nasa_check(&trace, &dir.path().join("out")) {
        Ok(msg) => Verdict::Pass(msg),
        Err(msg) => Verdict::Fail(msg),
    }
}

/// Fraction of rows whose label matches the truth under the best one-to-one
/// relabeling.
fn best_match_accuracy(truth: &[usize], got: &[usize], k: usize) -> f64 {
    let perms: Vec<Vec<usize>> = vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]];
    assert_eq!(k, 3);
    perms
        .iter()
        .map(|p| truth.iter().zip(got).filter(|(t, g)| p[**g] == **t).count())
        .max()
        .unwrap() as f64
        / truth.len() as f64
}

fn cluster_recovery() -> Verdict {
    let curves: Vec<Vec<f64>> = ["D1", "D2", "D3"]
        .iter()
        .map(|n| {
            let p = daily_pattern(n);
            zscore_row(&daily_grid().iter().map(|&t| p.evaluate(t)).collect::<Vec<_>>()).unwrap()
        })
        .collect();
    let seeds: Vec<u64> = (0..10).collect();
    let mut results = Vec::new();
    let mut all_ok = true;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let noise = Normal::new(0.0, 0.2).unwrap();
        let truth: Vec<usize> = (0..300).map(|i| i % 3).collect();
        let rows: Vec<Vec<f64>> =
            truth.iter().map(|&c| curves[c].iter().map(|v| v + noise.sample(&mut rng)).collect()).collect();
        let sel = select_k(&rows, 2, 20, &DistanceConfig::Euclidean, &seeds).unwrap();
        let acc = if sel.model.k == 3 { best_match_accuracy(&truth, &sel.model.assignments, 3) } else { 0.0 };
        all_ok &= sel.model.k == 3 && acc >= 0.95;
        results.push(format!("k={} acc={:.3}", sel.model.k, acc));
    }
    verdict(all_ok, format!("10 seeds: {}", results.join(", ")))
}

fn burst_injection() -> Verdict {
    let flat = Schedule::from_rates(synth::DEFAULT_START, 3600, &[500.0; 168], ScheduleMeta::default()).unwrap();
    let total = flat.expected_total();
    let mut parts = Vec::new();
    let mut ok = true;
    for target in [-0.5, 0.0, 0.5] {
        match synth::inject_bursts(&flat, target, 7) {
            Ok(s) => {
                let b = burstiness(&s.rates()).unwrap();
                let vol = (s.expected_total() - total).abs() / total;
                ok &= (b - target).abs() <= 0.05 && vol <= 0.01;
                parts.push(format!("target {target:+.1}: got {b:+.4}, volume off {:.2e}", vol));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("target {target:+.1}: {e}"));
            }
        }
    }
    verdict(ok, parts.join("; "))
}

fn clf_round_trip() -> Verdict {
    let mut cfg = GenConfig::daily(PatternRef::named("D2"), 6_000.0, 1_800.0, 8);
    cfg.noise = Noise::Poisson;
    cfg.seed = 5;
    let schedule = synth::rate_schedule(&cfg, &PatternLibrary::builtin()).unwrap();
    let mut events = synth::emit_events(&schedule, 5).unwrap();
    if events.len() < 1_000_000 {
        return Verdict::Fail(format!("generator produced only {} events", events.len()));
    }
    events.truncate(1_000_000);
    let generated = bin_instants("gen", &events, BinWidth::Hour).unwrap();

    let mut buf = Vec::with_capacity(events.len() * 64);
    write_clf_to(&mut buf, &events, &ClfTemplate::default()).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let parsed: Vec<Record> =
        text.lines().map(|l| Record::Event(parse_clf_line(l, TimezonePolicy::UseOffset).unwrap().unwrap())).collect();
    let rebinned = bin_events("gen", parsed.iter(), None, BinWidth::Hour).unwrap();
    let same = rebinned.bins == generated.bins;
    verdict(
        same && parsed.len() == 1_000_000,
        format!("{} lines parsed, {} hourly bins, identical: {same}", parsed.len(), generated.bins.len()),
    )
}

fn replay_open_loop() -> Verdict {
    let hits = Arc::new(AtomicU64::new(0));
    let counter = hits.clone();
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let app = axum::Router::new().route(
                "/",
                axum::routing::get(move || {
                    let c = counter.clone();
                    async move {
                        c.fetch_add(1, Ordering::SeqCst);
                        "ok"
                    }
                }),
            );
            axum::serve(tokio::net::TcpListener::from_std(listener).unwrap(), app).await.unwrap();
        });
    });

    // 200 req/s for 10 s
    let events: Vec<f64> = (0..2000).map(|i| 1_000_000.0 + i as f64 * 0.005).collect();
    let cfg = ReplayConfig { target: Some(format!("http://{addr}/")), ..Default::default() };
    let r = match replay(&events, &cfg) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(format!("replay failed: {e}")),
    };
    // let the server finish counting responses it already sent
    std::thread::sleep(Duration::from_millis(50));
    let seen = hits.load(Ordering::SeqCst);
    let worst = r.intervals.iter().filter(|iv| iv.target_rate > 0.0).map(|iv| iv.rate_error.abs()).fold(0.0, f64::max);
    verdict(
        seen == r.completed && r.completed == 2000 && worst <= 0.05 && r.late_fraction < 0.01,
        format!(
            "server {seen}, completed {}, failed {}, worst interval error {:.2}% (<= 5%), late {:.2}% (< 1%)",
            r.completed,
            r.failed,
            100.0 * worst,
            100.0 * r.late_fraction
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, Check); 11] = [
        ("round-trip pattern recovery", round_trip),
        ("k-means exhaustive oracle", kmeans_oracle),
        ("silhouette pairwise oracle", silhouette_oracle),
        ("LM vs normal equations", lm_vs_normal_equations),
        ("metric identities", metric_identities),
        ("DTW brute-force equivalence", dtw_brute_force),
        ("pipeline fidelity on the NASA trace", nasa_pipeline),
        ("synthetic cluster recovery", cluster_recovery),
        ("burstiness injection", burst_injection),
        ("CLF round trip, 10^6 events", clf_round_trip),
        ("open-loop replay at 200 req/s", replay_open_loop),
    ];
    let strict = std::env::var("WEBLOAD_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut failed = Vec::new();
    println!();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let line = match check() {
            Verdict::Pass(d) => format!("PASS  [{:>2}] {name}: {d}", i + 1),
            Verdict::Fail(d) => {
                failed.push(*name);
                format!("FAIL  [{:>2}] {name}: {d}", i + 1)
            }
            Verdict::Blocked(d) => {
                if strict {
                    failed.push(*name);
                }
                format!("FAIL  [{:>2}] {name} (blocked): {d}", i + 1)
            }
        };
        println!("{line}");
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
