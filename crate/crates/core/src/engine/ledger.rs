use std::io::Write;

use super::DayRecord;
use crate::error::Result;
use crate::model::TypeSpace;

/// Column names of the per-load ledger, in order.
pub const LEDGER_HEADER: [&str; 12] = [
    "day",
    "z",
    "load_id",
    "true_type",
    "reported_type",
    "curtailment",
    "consumption",
    "p1",
    "p2",
    "penalty",
    "utility",
    "social_cost",
];

/// Receives day records as the simulation produces them.
pub trait LedgerSink {
    fn record(&mut self, record: &DayRecord, space: &TypeSpace) -> Result<()>;

    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Discards every record.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl LedgerSink for NullSink {
    fn record(&mut self, _: &DayRecord, _: &TypeSpace) -> Result<()> {
        Ok(())
    }
}

/// Keeps every record in memory.
#[derive(Debug, Default, Clone)]
pub struct MemorySink {
    pub records: Vec<DayRecord>,
}

impl LedgerSink for MemorySink {
    fn record(&mut self, record: &DayRecord, _: &TypeSpace) -> Result<()> {
        self.records.push(record.clone());
        Ok(())
    }
}

/// One row per load per day.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LedgerRow {
    pub day: u64,
    pub z: f64,
    pub load_id: usize,
    pub true_type: String,
    pub reported_type: String,
    pub curtailment: f64,
    pub consumption: f64,
    pub p1: f64,
    pub p2: f64,
    /// `J_p(l)` charged on the day, 0 when no penalty applies.
    pub penalty: f64,
    pub utility: f64,
    pub social_cost: f64,
}

/// Streams the ledger as CSV.
pub struct CsvLedger<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvLedger<W> {
    pub fn new(inner: W) -> Self {
        Self {
            writer: csv::WriterBuilder::new().has_headers(true).from_writer(inner),
        }
    }

    pub fn into_inner(self) -> Result<W> {
        self.writer
            .into_inner()
            .map_err(|e| crate::Error::Io(std::io::Error::other(e.to_string())))
    }
}

impl<W: Write> LedgerSink for CsvLedger<W> {
    fn record(&mut self, r: &DayRecord, space: &TypeSpace) -> Result<()> {
        for i in 0..r.true_types.len() {
            self.writer.serialize(LedgerRow {
                day: r.day,
                z: r.z,
                load_id: i,
                true_type: space.get(r.true_types[i]).id.clone(),
                reported_type: space.get(r.reported_types[i]).id.clone(),
                curtailment: r.curtailments[i],
                consumption: r.consumptions[i],
                p1: r.payments[i].p1,
                p2: r.payments[i].p2,
                penalty: r.payments[i].penalty,
                utility: r.utilities[i],
                social_cost: r.social_cost,
            })?;
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Reads a ledger written by [`CsvLedger`].
pub fn read_ledger<R: std::io::Read>(reader: R) -> Result<Vec<LedgerRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for row in rdr.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}
