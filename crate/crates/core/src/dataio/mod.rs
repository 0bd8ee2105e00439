//! File formats and persistence.
//!
//! Flat daily observations are CSV; nested records are JSON lines. Dates are
//! ISO-8601 calendar days in UTC.

mod manifest;
mod obs;
pub mod rdap_fetch;
mod records;

pub use manifest::{sha256_file, DatasetManifest, DigestReader, FileEntry, MANIFEST_FILE};
pub use rdap_fetch::{Endpoints, FetchConfig, FetchOutcome, RdapFetcher, CACHE_DIR_ENV};
pub use obs::{
    load_observations, observation_span, save_observations, write_observations, DomainObservations,
    GroupedObservations, ObservationSet, ObservationSource, OBSERVATIONS_HEADER,
};
pub use records::{
    load_epochs, load_jsonl, load_linkage_input, load_linkages, load_rdap, load_serving,
    load_verdicts, save_epochs, save_jsonl, save_linkages, save_serving, save_verdicts,
    write_jsonl, write_serving, LinkageInput, SERVING_HEADER,
};
