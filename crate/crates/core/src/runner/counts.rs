//! Counts CSV: `basis,k,l,mu,nu,pulses,successes,errors`, one row per
//! (basis, k, l) cell, integer counts, LF line endings.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::Basis;
use crate::error::{Error, Result};
use crate::estimation::{Counts, Observation, ObservedStats};

pub const COUNTS_HEADER: [&str; 8] = ["basis", "k", "l", "mu", "nu", "pulses", "successes", "errors"];

#[derive(Debug, Serialize, Deserialize)]
struct CountsRow {
    basis: Basis,
    k: usize,
    l: usize,
    mu: f64,
    nu: f64,
    pulses: u64,
    successes: u64,
    errors: u64,
}

pub fn ingest_counts(path: &Path) -> Result<ObservedStats> {
    read_counts(std::fs::File::open(path).map_err(|e| crate::error::unreadable(path, e))?)
}

pub fn read_counts<R: Read>(reader: R) -> Result<ObservedStats> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(COUNTS_HEADER.iter().copied()) {
        return Err(Error::CountsRow {
            line: 1,
            message: format!("expected header {}, got {}", COUNTS_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut obs = ObservedStats::new();
    for (i, row) in rdr.deserialize::<CountsRow>().enumerate() {
        let line = i + 2;
        let row_err = |message: String| Error::CountsRow { line, message };
        let row = row.map_err(|e| row_err(format!("malformed row: {e}")))?;
        if row.pulses == 0 {
            return Err(row_err("pulses must be positive".into()));
        }
        if row.successes > row.pulses {
            return Err(row_err(format!("successes {} exceed pulses {}", row.successes, row.pulses)));
        }
        if row.errors > row.successes {
            return Err(row_err(format!("errors {} exceed successes {}", row.errors, row.successes)));
        }
        if !(row.mu.is_finite() && row.mu >= 0.0 && row.nu.is_finite() && row.nu >= 0.0) {
            return Err(row_err("intensities must be nonnegative".into()));
        }
        if obs.get(row.basis, row.k, row.l).is_some() {
            return Err(row_err(format!("duplicate key ({}, {}, {})", row.basis, row.k, row.l)));
        }
        let counts = Counts { successes: row.successes, errors: row.errors };
        obs.insert(Observation::from_counts(row.basis, row.k, row.l, row.mu, row.nu, row.pulses, counts))
            .map_err(|e| row_err(e.to_string()))?;
    }
    if obs.is_empty() {
        return Err(Error::Validation("counts file has no data rows".into()));
    }
    Ok(obs)
}

/// Writes every observation. Rate-only observations are written with counts
/// rounded to the nearest integer.
pub fn write_counts<W: Write>(obs: &ObservedStats, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    for o in obs.iter() {
        let counts = o.counts.unwrap_or_else(|| {
            let successes = o.success_count().round() as u64;
            let errors = (o.error_count().round() as u64).min(successes);
            Counts { successes, errors }
        });
        wtr.serialize(CountsRow {
            basis: o.basis,
            k: o.k,
            l: o.l,
            mu: o.mu,
            nu: o.nu,
            pulses: o.pulses,
            successes: counts.successes,
            errors: counts.errors,
        })?;
    }
    wtr.flush()?;
    Ok(())
}
