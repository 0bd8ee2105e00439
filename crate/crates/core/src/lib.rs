//! Inference of DNS registration epochs and detection of zombie linkages:
//! ecosystem entries (certificates, ENS claims, Maven namespaces) that
//! outlive the DNS registration they were validated against.

pub mod classify;
pub mod dataio;
pub mod day;
pub mod epoch;
pub mod error;
pub mod indicators;
pub mod linkage;
pub mod pipeline;
pub mod stats;
pub mod suffix;
pub mod synth;

pub use day::DayDate;
pub use error::{Error, Result};
