//! Plain-text summary of a characterization bundle, printed next to the
//! corpus-level reference numbers it can be compared with.

use std::fmt::Write;
use std::path::Path;

use crate::error::Result;
use crate::formats::{self, ModelExport};
use crate::pipeline::{Manifest, StageStatus, MANIFEST};

/// Reference corpus: daily and weekly row counts.
pub const REFERENCE_ROWS: (usize, usize) = (3191, 466);
/// Reference corpus: cluster sizes of the three daily patterns.
pub const REFERENCE_DAILY_SIZES: [usize; 3] = [2262, 406, 523];
/// Reference corpus: cluster sizes of the three weekly patterns.
pub const REFERENCE_WEEKLY_SIZES: [usize; 3] = [283, 64, 119];
/// Reference corpus: largest cell of the weekly-by-daily table, percent.
pub const REFERENCE_DOMINANT_CELL: f64 = 43.6;

fn sizes_desc(model: &ModelExport) -> Vec<usize> {
    let mut s = model.sizes.clone();
    s.sort_unstable_by(|a, b| b.cmp(a));
    s
}

fn dominant_cell(path: &Path) -> Result<Option<(String, String, f64)>> {
    if !path.exists() {
        return Ok(None);
    }
    let mut rd = csv::Reader::from_reader(formats::open(path)?);
    let mut best: Option<(String, String, f64)> = None;
    for rec in rd.records() {
        let rec = rec?;
        if &rec[0] == "total" || &rec[1] == "total" {
            continue;
        }
        let pct: f64 = rec[3].parse().unwrap_or(0.0);
        if best.as_ref().is_none_or(|b| pct > b.2) {
            best = Some((rec[0].to_string(), rec[1].to_string(), pct));
        }
    }
    Ok(best)
}

pub fn render(dir: &Path) -> Result<String> {
    let manifest: Manifest = formats::read_json(&dir.join(MANIFEST))?;
    let mut out = String::new();
    let _ = writeln!(out, "bundle: {}", dir.display());
    let _ = writeln!(out, "datasets: {}", manifest.config.datasets.iter().map(|d| d.id.as_str()).collect::<Vec<_>>().join(", "));
    for s in &manifest.stages {
        let status = match s.status {
            StageStatus::Ok => "ok",
            StageStatus::Skipped => "skipped",
            StageStatus::Failed => "FAILED",
        };
        let _ = writeln!(out, "  stage {:<16} {status}{}", s.name, s.detail.as_deref().map(|d| format!(" ({d})")).unwrap_or_default());
    }

    let rows = |g: &str| -> Result<Option<usize>> {
        let p = dir.join(format!("matrix_{g}.csv"));
        if !p.exists() {
            return Ok(None);
        }
        Ok(Some(csv::Reader::from_reader(formats::open(&p)?).records().count()))
    };
    let _ = writeln!(out, "\n{:<28} {:>14} {:>14}", "", "this bundle", "reference");
    let fmt = |v: Option<usize>| v.map_or("-".to_string(), |n| n.to_string());
    let _ = writeln!(out, "{:<28} {:>14} {:>14}", "daily rows", fmt(rows("daily")?), REFERENCE_ROWS.0);
    let _ = writeln!(out, "{:<28} {:>14} {:>14}", "weekly rows", fmt(rows("weekly")?), REFERENCE_ROWS.1);

    for (g, reference) in [("daily", REFERENCE_DAILY_SIZES), ("weekly", REFERENCE_WEEKLY_SIZES)] {
        let p = dir.join(format!("model_{g}.json"));
        let (k, sizes, sil) = if p.exists() {
            let m: ModelExport = formats::read_json(&p)?;
            let sizes = sizes_desc(&m).iter().map(usize::to_string).collect::<Vec<_>>().join("/");
            (m.k.to_string(), sizes, format!("{:.3}", m.silhouette))
        } else {
            ("-".into(), "-".into(), "-".into())
        };
        let mut ref_sorted = reference;
        ref_sorted.sort_unstable_by(|a, b| b.cmp(a));
        let ref_str = ref_sorted.iter().map(usize::to_string).collect::<Vec<_>>().join("/");
        let _ = writeln!(out, "{:<28} {:>14} {:>14}", format!("{g} k"), k, reference.len());
        let _ = writeln!(out, "{:<28} {:>14} {:>14}", format!("{g} cluster sizes"), sizes, ref_str);
        let _ = writeln!(out, "{:<28} {:>14} {:>14}", format!("{g} silhouette"), sil, "-");
    }
    let cell = dominant_cell(&dir.join("frequency_table.csv"))?;
    let cell_str = cell.as_ref().map_or("-".to_string(), |(w, d, p)| format!("{p:.1}% {w}x{d}"));
    let _ = writeln!(out, "{:<28} {:>14} {:>13.1}%", "dominant table cell", cell_str, REFERENCE_DOMINANT_CELL);
    if !manifest.notes.is_empty() {
        let _ = writeln!(out, "\nnotes:");
        for n in &manifest.notes {
            let _ = writeln!(out, "  {n}");
        }
    }
    let _ = writeln!(
        out,
        "\nReference values come from a twelve-dataset corpus and are for comparison only; a desk-scale bundle is not expected to match them."
    );
    Ok(out)
}
