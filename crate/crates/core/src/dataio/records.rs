//! JSON-lines record files (RDAP results, ecosystem inputs, linkages,
//! epochs, verdicts) and the serving CSV.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::classify::ZombieVerdict;
use crate::epoch::{EpochTimeline, RdapRecord};
use crate::error::{Error, Result};
use crate::indicators::ServingObservation;
use crate::linkage::{
    CertificateRecord, Ecosystem, EnsClaimEvent, GaslessTxtRecord, Linkage, MavenVersionRecord,
};

/// Reads one JSON value per non-blank line.
pub fn load_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::parse(path, i as u64 + 1, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<'a, T: Serialize + 'a, W: Write>(
    out: W,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<u64> {
    let mut w = BufWriter::new(out);
    let mut n = 0;
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
        n += 1;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(n)
}

pub fn save_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<u64> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl(f, items).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Loads RDAP results. Positive records without a registration date are
/// kept; inference skips them.
pub fn load_rdap(path: &Path) -> Result<Vec<RdapRecord>> {
    let records: Vec<RdapRecord> = load_jsonl(path)?;
    let undated = records.iter().filter(|r| !r.usable_for_refinement()).count();
    if undated > 0 {
        warn!(
            "{}: {undated} RDAP records carry no usable registration date",
            path.display()
        );
    }
    Ok(records)
}

/// Parsed ecosystem input, one schema per file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LinkageInput {
    Certificates(Vec<CertificateRecord>),
    EnsClaims(Vec<EnsClaimEvent>),
    MavenVersions(Vec<MavenVersionRecord>),
    GaslessTxt(Vec<GaslessTxtRecord>),
}

impl LinkageInput {
    pub fn len(&self) -> usize {
        match self {
            LinkageInput::Certificates(v) => v.len(),
            LinkageInput::EnsClaims(v) => v.len(),
            LinkageInput::MavenVersions(v) => v.len(),
            LinkageInput::GaslessTxt(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn save(&self, path: &Path) -> Result<u64> {
        match self {
            LinkageInput::Certificates(v) => save_jsonl(path, v),
            LinkageInput::EnsClaims(v) => save_jsonl(path, v),
            LinkageInput::MavenVersions(v) => save_jsonl(path, v),
            LinkageInput::GaslessTxt(v) => save_jsonl(path, v),
        }
    }
}

/// Loads an ecosystem input file under the schema of `ecosystem`.
pub fn load_linkage_input(path: &Path, ecosystem: Ecosystem) -> Result<LinkageInput> {
    Ok(match ecosystem {
        Ecosystem::Webpki => LinkageInput::Certificates(load_jsonl(path)?),
        Ecosystem::EnsOnchain => LinkageInput::EnsClaims(load_jsonl(path)?),
        Ecosystem::Maven => LinkageInput::MavenVersions(load_jsonl(path)?),
        Ecosystem::EnsGasless => LinkageInput::GaslessTxt(load_jsonl(path)?),
    })
}

pub fn load_linkages(path: &Path) -> Result<Vec<Linkage>> {
    load_jsonl(path)
}

pub fn save_linkages(path: &Path, linkages: &[Linkage]) -> Result<u64> {
    save_jsonl(path, linkages)
}

pub fn load_epochs(path: &Path) -> Result<Vec<EpochTimeline>> {
    load_jsonl(path)
}

pub fn save_epochs(path: &Path, timelines: &[EpochTimeline]) -> Result<u64> {
    save_jsonl(path, timelines)
}

pub fn load_verdicts(path: &Path) -> Result<Vec<ZombieVerdict>> {
    load_jsonl(path)
}

pub fn save_verdicts(path: &Path, verdicts: &[ZombieVerdict]) -> Result<u64> {
    save_jsonl(path, verdicts)
}

pub const SERVING_HEADER: [&str; 3] = ["fingerprint", "date", "served"];

/// Loads `fingerprint,date,served` rows. A repeated `(fingerprint, date)`
/// is an error.
pub fn load_serving(path: &Path) -> Result<Vec<ServingObservation>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(f));
    let headers = reader.headers().map_err(|e| Error::parse(path, 1, e.to_string()))?;
    if headers.iter().map(str::trim).ne(SERVING_HEADER) {
        return Err(Error::parse(path, 1, format!("expected header `{}`", SERVING_HEADER.join(","))));
    }
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::parse(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(Error::parse(path, line, format!("expected 3 fields, found {}", rec.len())));
        }
        let date = rec[1].trim().parse().map_err(|e: Error| Error::parse(path, line, e.to_string()))?;
        let served = match rec[2].trim() {
            "true" => true,
            "false" => false,
            other => return Err(Error::parse(path, line, format!("served must be true or false, got `{other}`"))),
        };
        let fingerprint = rec[0].trim().to_string();
        if !seen.insert((fingerprint.clone(), date)) {
            return Err(Error::parse(path, line, format!("duplicate observation for {fingerprint} on {date}")));
        }
        out.push(ServingObservation { fingerprint, date, served });
    }
    Ok(out)
}

pub fn write_serving<W: Write>(out: W, rows: &[ServingObservation]) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "{}", SERVING_HEADER.join(","))?;
    for r in rows {
        writeln!(w, "{},{},{}", r.fingerprint, r.date, r.served)?;
    }
    w.flush()
}

pub fn save_serving(path: &Path, rows: &[ServingObservation]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_serving(f, rows).map_err(|e| Error::io(path, e))
}
