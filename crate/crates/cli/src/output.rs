use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::{json, Value};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Tabular view of a report; the seed is prepended to every row.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

/// What a subcommand produces: a verdict, a JSON body and a table.
pub struct Report {
    pub pass: bool,
    pub summary: String,
    pub body: Value,
    pub table: Table,
}

/// Run settings echoed into every artifact.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub seed: u64,
    pub rtol: f64,
    pub mi_tol: f64,
    pub trace_tol: f64,
}

/// Writes floats with 17 significant digits.
struct FullPrecision;

impl Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
}

pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        "0.0".into()
    } else if v.is_finite() {
        format!("{v:.16e}")
    } else {
        // JSON has no infinities; serde_json already maps them to null in `Value`.
        "null".into()
    }
}

pub fn to_json_bytes(cfg: &RunConfig, report: &Report) -> io::Result<Vec<u8>> {
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": cfg.command,
        "seed": cfg.seed,
        "config": cfg,
        "pass": report.pass,
        "summary": report.summary,
        "result": report.body,
    });
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision);
    doc.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn to_csv_bytes(cfg: &RunConfig, table: &Table) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["seed"];
    header.extend(&table.header);
    w.write_record(&header)?;
    let seed = cfg.seed.to_string();
    for row in &table.rows {
        w.write_record(std::iter::once(&seed).chain(row))?;
    }
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

pub fn emit(cfg: &RunConfig, report: &Report, format: Format, out: Option<&Path>) -> io::Result<()> {
    let bytes = match format {
        Format::Json => to_json_bytes(cfg, report)?,
        Format::Csv => to_csv_bytes(cfg, &report.table)?,
    };
    match out {
        Some(path) => std::fs::write(path, bytes),
        None => io::stdout().lock().write_all(&bytes),
    }
}

/// Cell helpers for the CSV view.
pub fn f(v: f64) -> String {
    if v.is_finite() {
        fmt_f64(v)
    } else {
        String::new()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(f).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_with_seventeen_digits() {
        for v in [0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
        assert_eq!(fmt_f64(f64::NAN), "null");
    }

    #[test]
    fn csv_rows_carry_the_seed() {
        let cfg = RunConfig {
            command: "x",
            seed: 42,
            rtol: 1e-10,
            mi_tol: 1e-8,
            trace_tol: 1e-8,
        };
        let t = Table {
            header: vec!["a"],
            rows: vec![vec!["1".into()], vec!["2".into()]],
        };
        let text = String::from_utf8(to_csv_bytes(&cfg, &t).unwrap()).unwrap();
        assert_eq!(text, "seed,a\n42,1\n42,2\n");
    }
}
