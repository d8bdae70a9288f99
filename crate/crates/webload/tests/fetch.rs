use std::cell::RefCell;
use std::collections::HashMap;
use std::io::{Read, Write};
use std::time::Duration;

use chrono::NaiveDate;
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use webload::fetch::{cache_path, dump_url, fetch_wikimedia, FetchOptions, Transport, TransportError};
use webload::Error;

/// Recorded responses keyed by URL; anything unrecorded is a 404.
struct Recorded {
    bodies: HashMap<String, Vec<u8>>,
    failures: RefCell<HashMap<String, Vec<u16>>>,
    calls: RefCell<Vec<String>>,
}

impl Recorded {
    fn new() -> Self {
        Recorded { bodies: HashMap::new(), failures: RefCell::default(), calls: RefCell::default() }
    }
}

impl Transport for Recorded {
    fn get(&self, url: &str) -> Result<Vec<u8>, TransportError> {
        self.calls.borrow_mut().push(url.to_string());
        if let Some(q) = self.failures.borrow_mut().get_mut(url) {
            if !q.is_empty() {
                return Err(TransportError::Status(q.remove(0)));
            }
        }
        self.bodies.get(url).cloned().ok_or(TransportError::Status(404))
    }
}

fn gz(text: &str) -> Vec<u8> {
    let mut e = GzEncoder::new(Vec::new(), flate2::Compression::fast());
    e.write_all(text.as_bytes()).unwrap();
    e.finish().unwrap()
}

fn day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 3, 1).unwrap()
}

fn recorded_day(base: &str) -> Recorded {
    let mut t = Recorded::new();
    for h in 0..24 {
        let hour = day().and_hms_opt(h, 0, 0).unwrap();
        let body = format!("en Main_Page {} 0\nde Hauptseite 5 0\nen Rust {} 0\n", 100 + h, h);
        t.bodies.insert(dump_url(base, hour), gz(&body));
    }
    t
}

fn opts(base: &str) -> FetchOptions {
    FetchOptions { base_url: base.into(), attempts: 3, backoff: Duration::from_millis(1) }
}

#[test]
fn cold_then_warm_cache() {
    let base = "http://recorded.test/pageviews";
    let dir = tempfile::tempdir().unwrap();
    let t = recorded_day(base);
    let paths = fetch_wikimedia("en", day(), day(), dir.path(), &t, &opts(base)).unwrap();
    assert_eq!(paths.len(), 24);
    assert_eq!(t.calls.borrow().len(), 24);
    assert_eq!(paths[5], cache_path(dir.path(), "en", day().and_hms_opt(5, 0, 0).unwrap()));

    // cached files hold only the project's lines
    let mut text = String::new();
    MultiGzDecoder::new(std::fs::File::open(&paths[5]).unwrap()).read_to_string(&mut text).unwrap();
    assert_eq!(text, "en Main_Page 105 0\nen Rust 5 0\n");

    let warm = recorded_day(base);
    let again = fetch_wikimedia("en", day(), day(), dir.path(), &warm, &opts(base)).unwrap();
    assert_eq!(again, paths);
    assert!(warm.calls.borrow().is_empty());
}

#[test]
fn reversed_range_is_a_precondition_error() {
    let dir = tempfile::tempdir().unwrap();
    let t = Recorded::new();
    let err = fetch_wikimedia("en", day(), day().pred_opt().unwrap(), dir.path(), &t, &opts("http://x")).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
    assert!(t.calls.borrow().is_empty());
}

#[test]
fn missing_hours_are_reported_after_the_rest_is_cached() {
    let base = "http://recorded.test/pageviews";
    let dir = tempfile::tempdir().unwrap();
    let mut t = recorded_day(base);
    t.bodies.remove(&dump_url(base, day().and_hms_opt(7, 0, 0).unwrap()));
    let err = fetch_wikimedia("en", day(), day(), dir.path(), &t, &opts(base)).unwrap_err();
    match err {
        Error::PartialRange(hours) => assert_eq!(hours, vec!["2023-03-01T07".to_string()]),
        other => panic!("unexpected {other:?}"),
    }
    let cached = (0..24).filter(|&h| cache_path(dir.path(), "en", day().and_hms_opt(h, 0, 0).unwrap()).exists()).count();
    assert_eq!(cached, 23);
}

#[test]
fn server_errors_are_retried_and_client_errors_abort() {
    let base = "http://recorded.test/pageviews";
    let dir = tempfile::tempdir().unwrap();
    let t = recorded_day(base);
    let first = dump_url(base, day().and_hms_opt(0, 0, 0).unwrap());
    t.failures.borrow_mut().insert(first.clone(), vec![503, 502]);
    fetch_wikimedia("en", day(), day(), dir.path(), &t, &opts(base)).unwrap();
    assert_eq!(t.calls.borrow().iter().filter(|u| **u == first).count(), 3);

    let dir = tempfile::tempdir().unwrap();
    let t = recorded_day(base);
    t.failures.borrow_mut().insert(first, vec![403]);
    let err = fetch_wikimedia("en", day(), day(), dir.path(), &t, &opts(base)).unwrap_err();
    assert!(matches!(err, Error::Http { status: 403, .. }));
}
