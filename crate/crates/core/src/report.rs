//! Long-format CSV persistence for [`RiskReport`].
//!
//! One metric per row under a fixed header. Floats are written with 17
//! significant digits so every value survives a round trip exactly; empty
//! cells stand for absent optional columns.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{ReportRow, RiskReport};

pub const HEADER: [&str; 10] = ["scenario", "n", "q_n", "p", "psi2", "C", "replicate", "seed", "metric", "value"];

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

fn csv_error(path: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Csv {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

/// Serializes `report` to `out`. Non-finite values are refused before anything
/// is written.
pub fn write_risk_csv_to<W: Write>(report: &RiskReport, out: W) -> Result<()> {
    for (i, r) in report.rows.iter().enumerate() {
        let bad = !r.value.is_finite()
            || r.p.is_some_and(|v| !v.is_finite())
            || r.psi2.is_some_and(|v| !v.is_finite())
            || r.c.is_some_and(|v| !v.is_finite());
        if bad {
            // +2: header line, 1-based numbering
            return Err(csv_error(
                "<report>",
                i as u64 + 2,
                format!("non-finite value in metric `{}` at n = {}", r.metric, r.n),
            ));
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(HEADER).map_err(io)?;
    for r in &report.rows {
        w.write_record([
            r.scenario.clone(),
            r.n.to_string(),
            opt(r.q_n, |v| v.to_string()),
            opt(r.p, float),
            opt(r.psi2, float),
            opt(r.c, float),
            opt(r.replicate, |v| v.to_string()),
            r.seed.to_string(),
            r.metric.clone(),
            float(r.value),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_risk_csv(report: &RiskReport, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_risk_csv_to(report, &mut buf).map_err(|e| match e {
        Error::Csv { line, message, .. } => csv_error(&path.display().to_string(), line, message),
        other => other,
    })?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Parses a report; columns are matched by header name, so their order is
/// free. Runtimes are not part of the data file and come back empty.
pub fn read_risk_csv_from<R: Read>(input: R, name: &str) -> Result<RiskReport> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| csv_error(name, 1, e.to_string()))?
        .clone();
    let mut index = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        if !HEADER.contains(&h) {
            return Err(csv_error(name, 1, format!("unknown column `{h}`")));
        }
        if index.insert(h.to_string(), i).is_some() {
            return Err(csv_error(name, 1, format!("duplicate column `{h}`")));
        }
    }
    if let Some(missing) = HEADER.iter().find(|h| !index.contains_key(**h)) {
        return Err(csv_error(name, 1, format!("missing column `{missing}`")));
    }

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(name, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |col: &str| record.get(index[col]).unwrap_or("").trim();
        fn num<T: std::str::FromStr>(s: &str, col: &str, name: &str, line: u64) -> Result<T> {
            s.parse()
                .map_err(|_| csv_error(name, line, format!("column `{col}`: cannot parse `{s}`")))
        }
        let optional = |col: &str| -> Result<Option<f64>> {
            let s = cell(col);
            if s.is_empty() {
                Ok(None)
            } else {
                num(s, col, name, line).map(Some)
            }
        };
        let optional_int = |col: &str| -> Result<Option<usize>> {
            let s = cell(col);
            if s.is_empty() {
                Ok(None)
            } else {
                num(s, col, name, line).map(Some)
            }
        };
        let value: f64 = num(cell("value"), "value", name, line)?;
        if !value.is_finite() {
            return Err(csv_error(name, line, "non-finite value"));
        }
        if cell("metric").is_empty() {
            return Err(csv_error(name, line, "empty metric"));
        }
        rows.push(ReportRow {
            scenario: cell("scenario").to_string(),
            n: num(cell("n"), "n", name, line)?,
            q_n: optional_int("q_n")?,
            p: optional("p")?,
            psi2: optional("psi2")?,
            c: optional("C")?,
            replicate: optional_int("replicate")?,
            seed: num(cell("seed"), "seed", name, line)?,
            metric: cell("metric").to_string(),
            value,
        });
    }
    Ok(RiskReport {
        rows,
        runtimes: Vec::new(),
    })
}

pub fn read_risk_csv(path: &Path) -> Result<RiskReport> {
    let file = std::fs::File::open(path)?;
    read_risk_csv_from(file, &path.display().to_string())
}
