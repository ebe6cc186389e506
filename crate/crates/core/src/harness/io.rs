use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sample_set::{fmt_real, SampleSet};
use crate::scalar::Scalar;

/// Reads a sample file, optionally insisting on a dimension.
pub fn ingest_csv(path: &Path, expected_dim: Option<usize>) -> Result<SampleSet<f64>> {
    let s = SampleSet::read_csv(BufReader::new(File::open(path)?))?;
    if let Some(d) = expected_dim {
        if s.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: s.dim() });
        }
    }
    Ok(s)
}

/// Comma-separated table with a header row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn real<T: Scalar>(v: T) -> String {
        fmt_real(v)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.header.join(","))?;
        for r in &self.rows {
            writeln!(out, "{}", r.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        // Writing into a Vec cannot fail.
        self.write(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii output")
    }
}
