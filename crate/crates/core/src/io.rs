//! CSV formats for portfolios, value trees and per-path payoff tables.
//!
//! Prefixes are written over `{U, D}` with the empty prefix as `-`. Numbers
//! use the shortest representation that round-trips.
//!
//! Portfolio rows are `time,prefix,asset,quantity`: the quantity of `asset`
//! bought at rebalancing time `time` on the node `prefix` and held over
//! `]time, time+1]`. A predictable table has `|prefix| = time`; a longer prefix
//! makes the position depend on tosses not yet observed.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::lattice::{BinaryLattice, LatticeProcess, TossPath};
use crate::market::{PathwiseQuantities, Portfolio};
use crate::pricing::PathTable;

fn csv_error(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn io_error(e: std::io::Error) -> Error {
    Error::Format(e.to_string())
}

fn expect_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(csv_error)?;
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != expected {
        return Err(Error::Format(format!(
            "expected header `{}`, found `{}`",
            expected.join(","),
            found.join(",")
        )));
    }
    Ok(())
}

fn field(record: &csv::StringRecord, i: usize, line: u64) -> Result<&str> {
    record
        .get(i)
        .map(str::trim)
        .ok_or_else(|| Error::Format(format!("line {line}: missing column {}", i + 1)))
}

fn number<T: std::str::FromStr>(text: &str, what: &str, line: u64) -> Result<T> {
    text.parse()
        .map_err(|_| Error::Format(format!("line {line}: invalid {what} `{text}`")))
}

pub fn write_portfolio_csv(p: &Portfolio, out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(["time", "prefix", "asset", "quantity"])
        .map_err(csv_error)?;
    let lattice = BinaryLattice::new(p.horizon())?;
    for n in 0..p.horizon() {
        for w in lattice.paths(n) {
            for (asset, q) in p.quantities().assets() {
                let quantity = q.at(n + 1, w.index());
                writer
                    .write_record([
                        n.to_string(),
                        w.to_string(),
                        asset.to_string(),
                        quantity.to_string(),
                    ])
                    .map_err(csv_error)?;
            }
        }
    }
    writer.flush().map_err(io_error)
}

/// Reads portfolio rows into a per-path table over `horizon` periods. Rows
/// with shorter prefixes are applied first, so a longer prefix refines them.
pub fn read_portfolio_csv(input: impl Read, horizon: usize) -> Result<PathwiseQuantities> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    expect_header(&mut reader, &["time", "prefix", "asset", "quantity"])?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let time: usize = number(field(&record, 0, line)?, "time", line)?;
        let prefix: TossPath = field(&record, 1, line)?
            .parse()
            .map_err(|e| Error::Format(format!("line {line}: {e}")))?;
        let asset = field(&record, 2, line)?.to_string();
        if asset.is_empty() {
            return Err(Error::Format(format!("line {line}: empty asset id")));
        }
        let quantity: f64 = number(field(&record, 3, line)?, "quantity", line)?;
        if !quantity.is_finite() {
            return Err(Error::Format(format!(
                "line {line}: quantity must be finite"
            )));
        }
        if time >= horizon {
            return Err(Error::Format(format!(
                "line {line}: rebalancing time {time} must be below the horizon {horizon}"
            )));
        }
        if prefix.len() > horizon {
            return Err(Error::Format(format!(
                "line {line}: prefix `{prefix}` is longer than the horizon {horizon}"
            )));
        }
        rows.push((time, prefix, asset, quantity));
    }
    rows.sort_by_key(|(_, prefix, _, _)| prefix.len());
    let mut table = PathwiseQuantities::new(horizon)?;
    for (time, prefix, asset, quantity) in rows {
        table.set(&asset, time + 1, &prefix, quantity)?;
    }
    Ok(table)
}

/// `time,prefix,value` for every node.
pub fn write_lattice_csv(values: &LatticeProcess, out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(["time", "prefix", "value"])
        .map_err(csv_error)?;
    for (n, w, x) in values.nodes() {
        writer
            .write_record([n.to_string(), w.to_string(), x.to_string()])
            .map_err(csv_error)?;
    }
    writer.flush().map_err(io_error)
}

/// Reads a `prefix,value` table with exactly one row per length-`maturity` path.
pub fn read_path_table_csv(input: impl Read, maturity: usize) -> Result<PathTable> {
    BinaryLattice::new(maturity)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    expect_header(&mut reader, &["prefix", "value"])?;
    let mut values = vec![None; BinaryLattice::width(maturity)];
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let path: TossPath = field(&record, 0, line)?
            .parse()
            .map_err(|e| Error::Format(format!("line {line}: {e}")))?;
        if path.len() != maturity {
            return Err(Error::PathTable(format!(
                "line {line}: path `{path}` has length {}, expected {maturity}",
                path.len()
            )));
        }
        let value: f64 = number(field(&record, 1, line)?, "value", line)?;
        let slot = &mut values[path.index()];
        if slot.is_some() {
            return Err(Error::PathTable(format!(
                "line {line}: duplicate path `{path}`"
            )));
        }
        *slot = Some(value);
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            v.ok_or_else(|| {
                Error::PathTable(format!(
                    "missing path `{}`",
                    TossPath::from_index(maturity, k)
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PathTable::new(maturity, values)
}
