//! Per-electron record of a density-matrix trajectory.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::linalg::fmt_full;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    /// Electrons scattered so far.
    pub m: usize,
    /// `⟨u_i|rho|u_i⟩` for `i = 1..=n`.
    pub diag: Vec<f64>,
    /// `Σ ln diag_i`; `-inf` while some label is still empty.
    pub log_product: f64,
    pub fidelity: Option<f64>,
    pub trace: f64,
}

impl TraceRecord {
    pub fn product(&self) -> f64 {
        self.log_product.exp()
    }
}

/// Append-only trace owned by one trajectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EvolutionTrace {
    pub n: usize,
    pub records: Vec<TraceRecord>,
}

impl EvolutionTrace {
    pub fn new(n: usize) -> Self {
        Self { n, records: Vec::new() }
    }

    pub fn push(&mut self, record: TraceRecord) {
        debug_assert_eq!(record.diag.len(), self.n);
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn get(&self, m: usize) -> Option<&TraceRecord> {
        self.records.iter().find(|r| r.m == m)
    }

    /// Writes `m, diag_1..diag_n, diag_product, fidelity, trace`. Fidelity is
    /// left empty when it was not tracked.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["m".to_string()];
        header.extend((1..=self.n).map(|i| format!("diag_{i}")));
        header.extend(["diag_product", "fidelity", "trace"].map(String::from));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.m.to_string()];
            row.extend(r.diag.iter().map(|&d| fmt_full(d)));
            row.push(fmt_full(r.product()));
            row.push(r.fidelity.map(fmt_full).unwrap_or_default());
            row.push(fmt_full(r.trace));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
