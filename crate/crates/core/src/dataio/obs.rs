//! Daily presence observations: CSV with header `domain,date,source`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::day::DayDate;
use crate::error::{Error, Result};

pub const OBSERVATIONS_HEADER: [&str; 3] = ["domain", "date", "source"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObservationSource {
    Zone,
    Scan,
}

impl ObservationSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ObservationSource::Zone => "zone",
            ObservationSource::Scan => "scan",
        }
    }
}

/// Deduplicated zone and scan days of one domain.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DomainObservations {
    pub zone: BTreeSet<DayDate>,
    pub scan: BTreeSet<DayDate>,
}

impl DomainObservations {
    pub fn insert(&mut self, source: ObservationSource, day: DayDate) {
        match source {
            ObservationSource::Zone => self.zone.insert(day),
            ObservationSource::Scan => self.scan.insert(day),
        };
    }

    pub fn zone_days(&self) -> Vec<DayDate> {
        self.zone.iter().copied().collect()
    }

    pub fn scan_days(&self) -> Vec<DayDate> {
        self.scan.iter().copied().collect()
    }

    pub fn first_day(&self) -> Option<DayDate> {
        match (self.zone.first(), self.scan.first()) {
            (Some(a), Some(b)) => Some(*a.min(b)),
            (a, b) => a.or(b).copied(),
        }
    }

    pub fn last_day(&self) -> Option<DayDate> {
        match (self.zone.last(), self.scan.last()) {
            (Some(a), Some(b)) => Some(*a.max(b)),
            (a, b) => a.or(b).copied(),
        }
    }
}

pub type ObservationSet = BTreeMap<String, DomainObservations>;

struct RowReader<R: Read> {
    path: PathBuf,
    reader: csv::Reader<R>,
    record: csv::StringRecord,
}

impl<R: Read> RowReader<R> {
    fn new(path: &Path, inner: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(inner);
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(path, 1, e.to_string()))?;
        if headers.iter().map(str::trim).ne(OBSERVATIONS_HEADER) {
            return Err(Error::parse(
                path,
                1,
                format!("expected header `{}`", OBSERVATIONS_HEADER.join(",")),
            ));
        }
        Ok(RowReader { path: path.to_path_buf(), reader, record: csv::StringRecord::new() })
    }

    /// Next row as `(line, domain, date, source)`.
    fn next_row(&mut self) -> Result<Option<(u64, &str, DayDate, ObservationSource)>> {
        let more = self.reader.read_record(&mut self.record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(&self.path, line, e.to_string())
        })?;
        if !more {
            return Ok(None);
        }
        let line = self.record.position().map_or(0, |p| p.line());
        let err = |msg: String| Error::parse(&self.path, line, msg);
        if self.record.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", self.record.len())));
        }
        let domain = self.record[0].trim();
        if domain.is_empty() {
            return Err(err("empty domain".into()));
        }
        let date: DayDate = self.record[1].trim().parse().map_err(|e: Error| err(e.to_string()))?;
        let source = match self.record[2].trim() {
            "zone" => ObservationSource::Zone,
            "scan" => ObservationSource::Scan,
            other => return Err(err(format!("unknown source `{other}` (expected zone or scan)"))),
        };
        Ok(Some((line, domain, date, source)))
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::with_capacity(1 << 16, f))
}

/// Loads and groups an observation file in any row order.
pub fn load_observations(path: &Path) -> Result<ObservationSet> {
    let mut rows = RowReader::new(path, open(path)?)?;
    let mut out = ObservationSet::new();
    while let Some((_, domain, date, source)) = rows.next_row()? {
        match out.get_mut(domain) {
            Some(obs) => obs.insert(source, date),
            None => {
                let mut obs = DomainObservations::default();
                obs.insert(source, date);
                out.insert(domain.to_string(), obs);
            }
        }
    }
    Ok(out)
}

/// First and last observed day in a file, read without grouping.
pub fn observation_span(path: &Path) -> Result<Option<(DayDate, DayDate)>> {
    let mut rows = RowReader::new(path, open(path)?)?;
    let mut span: Option<(DayDate, DayDate)> = None;
    while let Some((_, _, date, _)) = rows.next_row()? {
        span = Some(match span {
            Some((a, b)) => (a.min(date), b.max(date)),
            None => (date, date),
        });
    }
    Ok(span)
}

/// Streams an observation file whose rows are grouped by domain, yielding
/// one domain at a time. Only the current group is held in memory.
pub struct GroupedObservations<R: Read> {
    rows: RowReader<R>,
    path: PathBuf,
    pending: Option<(String, DomainObservations)>,
    finished: std::collections::HashSet<String>,
    done: bool,
}

impl GroupedObservations<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        Self::from_reader(path, open(path)?)
    }
}

impl<R: Read> GroupedObservations<R> {
    /// `path` is used for error messages only.
    pub fn from_reader(path: &Path, inner: R) -> Result<Self> {
        Ok(GroupedObservations {
            rows: RowReader::new(path, inner)?,
            path: path.to_path_buf(),
            pending: None,
            finished: Default::default(),
            done: false,
        })
    }

    fn advance(&mut self) -> Result<Option<(String, DomainObservations)>> {
        loop {
            let Some((line, domain, date, source)) = self.rows.next_row()? else {
                self.done = true;
                return Ok(self.pending.take());
            };
            match &mut self.pending {
                Some((current, obs)) if current == domain => obs.insert(source, date),
                _ => {
                    if self.finished.contains(domain) {
                        return Err(Error::NotGrouped {
                            path: self.path.clone(),
                            line,
                            domain: domain.to_string(),
                        });
                    }
                    let mut obs = DomainObservations::default();
                    obs.insert(source, date);
                    let next = (domain.to_string(), obs);
                    if let Some(prev) = self.pending.replace(next) {
                        self.finished.insert(prev.0.clone());
                        return Ok(Some(prev));
                    }
                }
            }
        }
    }
}

impl<R: Read> Iterator for GroupedObservations<R> {
    type Item = Result<(String, DomainObservations)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.advance() {
            Ok(Some(group)) => Some(Ok(group)),
            Ok(None) => None,
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Writes rows sorted by domain, then date, with zone before scan.
pub fn write_observations<'a, W: Write>(
    out: W,
    domains: impl IntoIterator<Item = (&'a str, &'a DomainObservations)>,
) -> std::io::Result<u64> {
    let mut w = BufWriter::new(out);
    writeln!(w, "{}", OBSERVATIONS_HEADER.join(","))?;
    let mut rows = 0;
    for (domain, obs) in domains {
        let mut zone = obs.zone.iter().peekable();
        let mut scan = obs.scan.iter().peekable();
        loop {
            let (day, source) = match (zone.peek(), scan.peek()) {
                (Some(z), Some(s)) if z <= s => (*zone.next().unwrap(), ObservationSource::Zone),
                (Some(_), Some(_)) | (None, Some(_)) => (*scan.next().unwrap(), ObservationSource::Scan),
                (Some(_), None) => (*zone.next().unwrap(), ObservationSource::Zone),
                (None, None) => break,
            };
            writeln!(w, "{domain},{day},{}", source.as_str())?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(rows)
}

pub fn save_observations(path: &Path, set: &ObservationSet) -> Result<u64> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_observations(f, set.iter().map(|(d, o)| (d.as_str(), o))).map_err(|e| Error::io(path, e))
}
