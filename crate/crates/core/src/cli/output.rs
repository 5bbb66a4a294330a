//! Report files: JSON with 17 significant digits and a per-check CSV.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use super::config::Format;
use crate::analysis::VerificationReport;
use crate::error::{Error, Result};

/// Pretty JSON whose floats are written as `{:.16e}`, enough for any
/// double to round-trip exactly.
struct Precise<'a>(PrettyFormatter<'a>);

impl Formatter for Precise<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serialize `value` as pretty JSON with full-precision floats.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Internal(format!("JSON serialization: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

fn csv_number(v: f64) -> String {
    if v == 0.0 || (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn opt_number(v: Option<f64>) -> String {
    v.map(csv_number).unwrap_or_default()
}

/// One row per check: `name,formula_value,brute_value,deviation,tolerance,pass`.
pub fn report_csv(report: &VerificationReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Internal(format!("CSV serialization: {e}"));
    w.write_record(["name", "formula_value", "brute_value", "deviation", "tolerance", "pass"])
        .map_err(csv_err)?;
    for c in &report.checks {
        let pass = match c.pass {
            Some(true) => "true",
            Some(false) => "false",
            None => "skipped",
        };
        w.write_record([
            c.name.clone(),
            opt_number(c.formula_value),
            opt_number(c.brute_value),
            opt_number(c.deviation),
            csv_number(c.tolerance),
            pass.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(format!("CSV serialization: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

/// Write `value` as `<stem>.json` when JSON is among `formats`.
pub fn emit_json<T: Serialize>(value: &T, stem: &str, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    if formats.contains(&Format::Json) {
        Ok(vec![write_file(dir, &format!("{stem}.json"), &to_json(value)?)?])
    } else {
        Ok(Vec::new())
    }
}

/// Write `report.json` and/or `report.csv` into `dir`.
pub fn emit_report(report: &VerificationReport, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    let mut written = emit_json(report, "report", dir, formats)?;
    if formats.contains(&Format::Csv) {
        written.push(write_file(dir, "report.csv", &report_csv(report)?)?);
    }
    Ok(written)
}
