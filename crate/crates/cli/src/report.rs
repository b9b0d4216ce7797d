//! Report rows and their CSV/JSON readers and writers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// One level of one slice in a drill report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrillRow {
    pub slice: String,
    pub p: f64,
    pub value: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerRow {
    pub interval: u64,
    pub statistic: f64,
    pub p_value: f64,
    pub fired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub size: usize,
    pub seconds: f64,
    /// Time growth per doubling of size relative to the previous row.
    pub ratio: Option<f64>,
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned, R: Read>(input: R) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<Result<Vec<T>, _>>()?;
    Ok(rows)
}

pub fn to_json<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(rows)?)
}

pub fn from_json<T: DeserializeOwned>(s: &str) -> Result<Vec<T>, CliError> {
    Ok(serde_json::from_str(s)?)
}

pub fn save_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<(), CliError> {
    write_csv(rows, BufWriter::new(File::create(path)?))
}

pub fn load_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    read_csv(BufReader::new(File::open(path)?))
}

pub fn save_json<T: Serialize>(rows: &[T], path: &Path) -> Result<(), CliError> {
    let mut text = to_json(rows)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    from_json(&std::fs::read_to_string(path)?)
}
