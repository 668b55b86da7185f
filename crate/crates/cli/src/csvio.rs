//! CSV output. Every file is LF-terminated with a header row; floats use
//! the shortest representation that round-trips.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use whitewash_core::engine::IterationRecord;

use crate::CliError;

pub const RECORD_HEADER: [&str; 8] = [
    "iteration",
    "n_nodes",
    "whitewash_attempts",
    "whitewash_successes",
    "whitewash_fraction",
    "mean_offered_r_ini",
    "mean_w_estimate",
    "mean_w_max",
];

/// Writes `rows` under `header`. The header is written even when there
/// are no rows.
pub fn write_rows<W: Write, T: Serialize>(out: W, header: &[&str], rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(())
}

pub fn write_rows_to<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
    write_rows(io::BufWriter::new(file), header, rows)
}

pub fn emit_csv(records: &[IterationRecord], path: &Path) -> Result<(), CliError> {
    write_rows_to(path, &RECORD_HEADER, records)
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(CliError::from)).collect()
}

pub fn read_records(path: &Path) -> Result<Vec<IterationRecord>, CliError> {
    read_rows(path)
}
