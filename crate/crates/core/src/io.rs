//! CSV tables and JSON documents written by the command-line tool.
//!
//! CSV dialect: comma separated, header row, `.` decimal point, no
//! thousands separators. Floating values are written with 17 significant
//! digits (`{:.16e}`) so they parse back to the same bits.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cluster::IslandSample;
use crate::error::{Error, Result};
use crate::experiments::memory::MemoryTimeRecord;
use crate::observables::{effective_sector, Trajectory};
use crate::params::{Cardinality, ModelParams};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const RECORD_HEADER: [&str; 9] = [
    "q",
    "q_bin",
    "L",
    "T",
    "realization_index",
    "tau_mcs",
    "censored",
    "accepts",
    "attempts",
];

pub const CLUSTER_HEADER: [&str; 9] = [
    "L",
    "T",
    "q",
    "sample_index",
    "largest_0",
    "largest_non0",
    "n_clusters_0",
    "wraps_x",
    "wraps_y",
];

/// Float formatted with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidParams(format!("csv: {e}"))
}

fn io_err(e: std::io::Error) -> Error {
    Error::InvalidParams(format!("io: {e}"))
}

pub fn write_records<W: Write>(out: W, records: &[MemoryTimeRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER).map_err(csv_err)?;
    for r in records {
        let p = &r.params;
        w.write_record([
            p.q.q_label(),
            p.q.q_bin().to_string(),
            p.size.to_string(),
            fmt_f64(p.temperature),
            r.realization_index.to_string(),
            r.tau.map(|t| t.to_string()).unwrap_or_default(),
            r.censored.to_string(),
            r.accepts.to_string(),
            r.attempts.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

fn field<'a>(row: &'a csv::StringRecord, idx: usize, name: &str) -> Result<&'a str> {
    row.get(idx)
        .ok_or_else(|| Error::InvalidParams(format!("missing column {name}")))
}

fn parse<T: std::str::FromStr>(row: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    let raw = field(row, idx, name)?;
    raw.trim()
        .parse()
        .map_err(|_| Error::InvalidParams(format!("cannot parse {name} from {raw:?}")))
}

/// Reads a records table; columns are located by header name.
pub fn read_records<R: Read>(input: R) -> Result<Vec<MemoryTimeRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::InvalidParams(format!("records table lacks column {name}")))
    };
    let idx: Vec<usize> = RECORD_HEADER.iter().map(|n| col(n)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let q_bin: u32 = parse(&row, idx[1], "q_bin")?;
        let q = Cardinality::parse(field(&row, idx[0], "q")?, q_bin)?;
        let params = ModelParams::new(parse(&row, idx[2], "L")?, q, parse(&row, idx[3], "T")?)?;
        let tau_raw = field(&row, idx[5], "tau_mcs")?.trim();
        let tau = if tau_raw.is_empty() {
            None
        } else {
            Some(parse(&row, idx[5], "tau_mcs")?)
        };
        let censored: bool = parse(&row, idx[6], "censored")?;
        if censored == tau.is_some() {
            return Err(Error::InvalidParams(
                "tau_mcs must be empty exactly for censored rows".into(),
            ));
        }
        out.push(MemoryTimeRecord {
            params,
            realization_index: parse(&row, idx[4], "realization_index")?,
            tau,
            censored,
            accepts: parse(&row, idx[7], "accepts")?,
            attempts: parse(&row, idx[8], "attempts")?,
        });
    }
    Ok(out)
}

pub fn write_trajectory<W: Write>(out: W, trajectory: &Trajectory) -> Result<()> {
    let q_bin = trajectory.params.q.q_bin();
    let n_species = trajectory.params.q.n_species();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["t", "m", "theta", "theta_defined", "energy_per_site", "sector"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..n_species).map(|s| format!("count_{s}")));
    w.write_record(&header).map_err(csv_err)?;
    for s in &trajectory.samples {
        let mut row = vec![
            s.t.to_string(),
            fmt_f64(s.m),
            fmt_f64(s.theta),
            s.theta_defined.to_string(),
            fmt_f64(s.energy_per_site),
            fmt_f64(effective_sector(s.theta, q_bin)),
        ];
        row.extend(s.counts.iter().map(|c| c.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_cluster_samples<W: Write>(out: W, samples: &[IslandSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CLUSTER_HEADER).map_err(csv_err)?;
    for s in samples {
        w.write_record([
            s.size.to_string(),
            fmt_f64(s.temperature),
            s.q.q_label(),
            s.sample_index.to_string(),
            s.largest_0.to_string(),
            s.largest_non0.to_string(),
            s.n_clusters_0.to_string(),
            s.wraps_x.to_string(),
            s.wraps_y.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

/// Pretty JSON with a trailing newline; key order follows field order.
pub fn to_document<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::InvalidParams(format!("json: {e}")))
}

pub fn from_document<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::InvalidParams(format!("json: {e}")))
}
