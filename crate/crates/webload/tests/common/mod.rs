#![allow(dead_code)]

use std::io::Write;
use std::path::Path;

use webload::core::trace::{format_clf_line, TraceEvent};

/// 2023-01-02, a Monday.
pub const MONDAY: i64 = 1_672_617_600;

pub fn event(t: i64) -> TraceEvent {
    TraceEvent {
        timestamp: t,
        client: "10.0.0.1".into(),
        method: "GET".into(),
        path: "/index.html".into(),
        status: Some(200),
        bytes: Some(512),
    }
}

/// Writes a CLF log with `counts[i]` requests spread over hour `i` from `start`.
pub fn write_clf_hours(path: &Path, start: i64, counts: &[u32]) {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    for (h, &n) in counts.iter().enumerate() {
        for j in 0..n {
            let t = start + h as i64 * 3600 + (j as i64 * 3599) / n.max(1) as i64;
            writeln!(f, "{}", format_clf_line(&event(t))).unwrap();
        }
    }
}

/// Hourly counts for `days` days with a daytime or nighttime peak.
pub fn shaped_counts(days: usize, night: bool, salt: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(days * 24);
    for d in 0..days {
        let weekend = d % 7 >= 5;
        for h in 0..24u32 {
            let phase = if night { (h + 12) % 24 } else { h };
            let base = if (8..18).contains(&phase) { 40 } else { 8 };
            let wobble = (d as u32 * 7 + h * 3 + salt) % 5;
            let scale = if weekend { 2 } else { 3 };
            out.push(base * scale / 3 + wobble);
        }
    }
    out
}

pub fn bin_path() -> &'static str {
    env!("CARGO_BIN_EXE_webload")
}

/// Days since 1970-01-01 of a proleptic Gregorian date.
pub fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

/// Text-scan oracle: requests per UTC hour, read straight off the bracketed
/// timestamps without the library's parser.
pub fn scan_hours(bytes: &[u8]) -> std::collections::BTreeMap<i64, u64> {
    const MON: [&[u8]; 12] =
        [b"Jan", b"Feb", b"Mar", b"Apr", b"May", b"Jun", b"Jul", b"Aug", b"Sep", b"Oct", b"Nov", b"Dec"];
    let num = |s: &[u8]| s.iter().fold(0i64, |a, &c| a * 10 + (c - b'0') as i64);
    let mut out = std::collections::BTreeMap::new();
    for line in bytes.split(|&b| b == b'\n') {
        let Some(i) = line.iter().position(|&b| b == b'[') else { continue };
        let Some(ts) = line.get(i + 1..i + 27) else { continue };
        if ts[2] != b'/' || ts[20] != b' ' {
            continue;
        }
        let Some(m) = MON.iter().position(|&m| m == &ts[3..6]) else { continue };
        let (d, y) = (num(&ts[0..2]), num(&ts[7..11]));
        let (h, mi, s) = (num(&ts[12..14]), num(&ts[15..17]), num(&ts[18..20]));
        let off = (num(&ts[22..24]) * 3600 + num(&ts[24..26]) * 60) * if ts[21] == b'-' { -1 } else { 1 };
        let t = days_from_civil(y, m as i64 + 1, d) * 86_400 + h * 3600 + mi * 60 + s - off;
        *out.entry(t - t.rem_euclid(3600)).or_insert(0) += 1;
    }
    out
}

/// NASA-style access log: local time at -0400, mixed hosts, 304s and 404s
/// with `-` bytes, a protocol-less request and a stray non-UTF-8 byte.
pub fn write_nasa_like(path: &Path, days: u32) {
    let hosts = ["199.72.81.55", "unicomp6.unicomp.net", "burger.letters.com", "d104.aa.net", "129.94.144.152"];
    let paths = ["/history/apollo/", "/shuttle/countdown/", "/images/NASA-logosmall.gif", "/shuttle/missions/sts-73/"];
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    let mut k = 0u64;
    for day in 1..=days {
        for h in 0..24u32 {
            let n = 20 + ((h as u64 * 7 + day as u64 * 13) % 17) + if (9..17).contains(&h) { 40 } else { 0 };
            for j in 0..n {
                k += 1;
                let sec = (j * 3599 / n) as u32;
                let host = hosts[(k % 5) as usize];
                let p = paths[(k % 4) as usize];
                let stamp = format!("[{day:02}/Jul/1995:{h:02}:{:02}:{:02} -0400]", sec / 60, sec % 60);
                match k % 11 {
                    0 => writeln!(f, "{host} - - {stamp} \"GET {p} HTTP/1.0\" 304 0"),
                    1 => writeln!(f, "{host} - - {stamp} \"GET /missing.html HTTP/1.0\" 404 -"),
                    2 => writeln!(f, "{host} - - {stamp} \"GET {p}\" 200 1204"),
                    3 => {
                        f.write_all(format!("{host} - - {stamp} \"GET /pub/").as_bytes()).unwrap();
                        f.write_all(&[0xE9]).unwrap();
                        writeln!(f, "t.html HTTP/1.0\" 200 812")
                    }
                    _ => writeln!(f, "{host} - - {stamp} \"GET {p} HTTP/1.0\" 200 {}", 1000 + k % 7000),
                }
                .unwrap();
            }
        }
    }
}

/// Runs `characterize` over the first seven complete days of a NASA-format
/// trace and checks the daily matrix against the text-scan oracle.
pub fn nasa_check(trace: &Path, out: &Path) -> Result<String, String> {
    use webload::pipeline::{run_characterize, DatasetSpec, PipelineConfig};
    let started = std::time::Instant::now();
    let mut ds = DatasetSpec::clf("nasa", &[trace.to_str().unwrap()]);
    ds.max_days = Some(7);
    let cfg = PipelineConfig { output: out.to_path_buf(), datasets: vec![ds], ..Default::default() };
    let bundle = run_characterize(&cfg).map_err(|e| format!("characterize failed: {e}"))?;
    let elapsed = started.elapsed();

    let m = webload::formats::load_matrix(&out.join("matrix_daily.csv")).map_err(|e| e.to_string())?;
    if m.rows.len() != 7 || m.rows.iter().any(|r| r.values.len() != 24) {
        return Err(format!("daily matrix is {} rows, expected 7x24", m.rows.len()));
    }
    let raw = std::fs::read(trace).map_err(|e| e.to_string())?;
    let raw = if trace.extension().is_some_and(|e| e == "gz") {
        let mut v = Vec::new();
        std::io::Read::read_to_end(&mut flate2::read::MultiGzDecoder::new(&raw[..]), &mut v).map_err(|e| e.to_string())?;
        v
    } else {
        raw
    };
    let oracle = scan_hours(&raw);
    for row in &m.rows {
        let midnight = webload::core::calendar::midnight_of(row.origin);
        for (h, &v) in row.values.iter().enumerate() {
            let want = oracle.get(&(midnight + h as i64 * 3600)).copied().unwrap_or(0);
            if v as u64 != want {
                return Err(format!("{} hour {h}: pipeline {v}, oracle {want}", row.origin));
            }
        }
    }
    if elapsed.as_secs_f64() >= 60.0 {
        return Err(format!("characterize took {:.1} s", elapsed.as_secs_f64()));
    }
    let malformed = bundle.manifest.reads.get("nasa").map_or(0, |r| r.malformed);
    Ok(format!("7x24 matrix matches oracle, {malformed} malformed, {:.1} s", elapsed.as_secs_f64()))
}
