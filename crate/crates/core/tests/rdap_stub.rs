//! RDAP client against a local stub server.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use dnszombie::dataio::{Endpoints, FetchConfig, RdapFetcher};
use dnszombie::epoch::{RdapPolarity, RdapRecord};
use dnszombie::DayDate;

struct Stub {
    base: String,
    hits: Arc<Mutex<HashMap<String, usize>>>,
    total: Arc<AtomicUsize>,
}

/// Serves `/domain/<name>`:
/// `gone.*` 404, `busy.*` 429 twice then 200, `jammed.*` always 429,
/// anything else 200 with a registration event.
fn stub() -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let hits: Arc<Mutex<HashMap<String, usize>>> = Arc::default();
    let total = Arc::new(AtomicUsize::new(0));
    let (h, t) = (hits.clone(), total.clone());
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            if reader.read_line(&mut request_line).is_err() {
                continue;
            }
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
            }
            let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
            let name = path.rsplit('/').next().unwrap_or("").to_string();
            t.fetch_add(1, Ordering::SeqCst);
            let n = {
                let mut m = h.lock().unwrap();
                let c = m.entry(name.clone()).or_default();
                *c += 1;
                *c
            };
            let (status, extra, body) = if name.starts_with("gone.") {
                ("404 Not Found", "", String::new())
            } else if name.starts_with("jammed.") || (name.starts_with("busy.") && n <= 2) {
                ("429 Too Many Requests", "Retry-After: 0\r\n", String::new())
            } else {
                (
                    "200 OK",
                    "",
                    format!(
                        r#"{{"ldhName":"{name}","events":[{{"eventAction":"registration","eventDate":"2023-04-05T10:00:00Z"}}]}}"#
                    ),
                )
            };
            let resp = format!(
                "HTTP/1.1 {status}\r\nContent-Type: application/rdap+json\r\nContent-Length: {}\r\nConnection: close\r\n{extra}\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(resp.as_bytes());
        }
    });
    Stub { base, hits, total }
}

fn config(allow_network: bool) -> FetchConfig {
    FetchConfig {
        min_interval: Duration::ZERO,
        max_retries: 3,
        backoff_base: Duration::from_millis(1),
        max_backoff: Duration::from_millis(5),
        timeout: Duration::from_secs(10),
        allow_network,
    }
}

fn d(s: &str) -> DayDate {
    s.parse().unwrap()
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn endpoints(base: &str) -> Endpoints {
    let mut e = Endpoints::default();
    e.insert("com", base);
    e
}

#[test]
fn fetches_then_serves_from_cache() {
    let s = stub();
    let cache = tempfile::tempdir().unwrap();
    let mut f = RdapFetcher::new(endpoints(&s.base), cache.path(), config(true)).unwrap();
    let out = f.fetch(&names(&["a.com", "gone.com", "x.unknowntld"]), d("2025-06-01")).unwrap();
    assert_eq!(
        out.records,
        vec![
            RdapRecord::positive("a.com", d("2025-06-01"), d("2023-04-05")),
            RdapRecord::negative("gone.com", d("2025-06-01")),
        ]
    );
    assert_eq!(out.skipped, names(&["x.unknowntld"]));
    assert_eq!(out.network_calls, 2);
    assert!(!out.is_partial());

    // A fresh client on the same cache makes no calls and keeps the
    // original query dates.
    let before = s.total.load(Ordering::SeqCst);
    let mut f = RdapFetcher::new(endpoints(&s.base), cache.path(), config(true)).unwrap();
    let again = f.fetch(&names(&["a.com", "gone.com"]), d("2025-09-09")).unwrap();
    assert_eq!(again.network_calls, 0);
    assert_eq!(again.records, out.records);
    assert_eq!(s.total.load(Ordering::SeqCst), before);
}

#[test]
fn offline_mode_reports_uncached_domains() {
    let s = stub();
    let cache = tempfile::tempdir().unwrap();
    let mut f = RdapFetcher::new(endpoints(&s.base), cache.path(), config(false)).unwrap();
    let out = f.fetch(&names(&["a.com"]), d("2025-06-01")).unwrap();
    assert!(out.records.is_empty());
    assert_eq!(out.uncached, names(&["a.com"]));
    assert!(out.is_partial());
    assert_eq!(s.total.load(Ordering::SeqCst), 0);
}

#[test]
fn backs_off_on_throttling() {
    let s = stub();
    let cache = tempfile::tempdir().unwrap();
    let mut f = RdapFetcher::new(endpoints(&s.base), cache.path(), config(true)).unwrap();
    let out = f.fetch(&names(&["busy.com", "jammed.com"]), d("2025-06-01")).unwrap();
    assert_eq!(out.records.len(), 1);
    assert_eq!(out.records[0].polarity, RdapPolarity::Positive);
    assert_eq!(out.throttled, names(&["jammed.com"]));
    assert!(out.is_partial());
    let hits = s.hits.lock().unwrap();
    assert_eq!(hits["busy.com"], 3);
    // one attempt plus max_retries
    assert_eq!(hits["jammed.com"], 4);
    assert_eq!(out.network_calls, 7);
    // throttled responses are not cached
    assert!(!cache.path().join("jammed.com.json").exists());
    assert!(cache.path().join("busy.com.json").exists());
}
