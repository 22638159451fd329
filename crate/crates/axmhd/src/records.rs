//! Diagnostic records as comma-separated text.
//!
//! The first row names every column of [`DiagnosticRecord::columns`] in order. Per-exponent
//! columns are suffixed with the exponent (`pi_lp_2`, `pi_lp_4`, ...), the Λ_v columns with
//! α (`lv_l2_0.75`). Values use the shortest decimal form that parses back to the same f64;
//! inactive entries are written `NaN`.

use crate::diagnostics::DiagnosticRecord;
use crate::error::{Error, Result};
use crate::norms::PGrid;
use std::fmt::Write as _;
use std::path::Path;

pub fn to_csv(records: &[DiagnosticRecord], pgrid: &PGrid) -> String {
    let header = match records.first() {
        Some(r) => r.header(),
        None => DiagnosticRecord::blank(pgrid).header(),
    };
    let mut out = header.join(",");
    out.push('\n');
    for r in records {
        let mut first = true;
        for (_, v) in r.columns() {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_records(path: &Path, records: &[DiagnosticRecord], pgrid: &PGrid) -> Result<()> {
    std::fs::write(path, to_csv(records, pgrid))?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<DiagnosticRecord>> {
    let mut lines = text.lines();
    let header: Vec<String> = match lines.next() {
        Some(h) => h.split(',').map(str::to_string).collect(),
        None => return Err(Error::Structural("records file has no header".into())),
    };
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != header.len() {
            return Err(Error::Structural(format!("row {} has {} fields, header has {}", i + 1, vals.len(), header.len())));
        }
        let cols = header
            .iter()
            .zip(vals)
            .map(|(h, v)| {
                v.parse::<f64>()
                    .map(|x| (h.clone(), x))
                    .map_err(|_| Error::Structural(format!("row {}: bad value {v:?} in column {h}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(DiagnosticRecord::from_columns(&cols)?);
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<DiagnosticRecord>> {
    parse_csv(&std::fs::read_to_string(path)?)
}
