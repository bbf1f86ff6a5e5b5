//! CSV output: one `#` comment line with the run settings, a header row, then data.

use std::io::{self, Write};

use lopt_core::{BigFloat, Rational, SignedLog};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub comment: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table { comment: String::new(), header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to(&self, out: &mut dyn Write) -> io::Result<()> {
        if !self.comment.is_empty() {
            writeln!(out, "# {}", self.comment)?;
        }
        writeln!(out, "{}", join(&self.header))?;
        for row in &self.rows {
            writeln!(out, "{}", join(row))?;
        }
        Ok(())
    }
}

fn join(cells: &[String]) -> String {
    cells.iter().map(|c| quote_if_needed(c)).collect::<Vec<_>>().join(",")
}

fn quote_if_needed(cell: &str) -> String {
    if cell.contains([',', '"', '\n', '/']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// A decimal for a float: plain between 1e-6 and 1e15, scientific otherwise,
/// 20 significant digits beyond the f64 range.
pub fn fmt_float(x: &BigFloat) -> String {
    if x.is_zero() {
        return "0".into();
    }
    if !x.is_finite() {
        return "nan".into();
    }
    let v = x.to_f64();
    let a = v.abs();
    if v.is_finite() && a >= 1e-300 {
        if (1e-6..1e15).contains(&a) {
            format!("{v}")
        } else {
            format!("{v:e}")
        }
    } else {
        x.to_string_radix(10, Some(20))
    }
}

pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if !v.is_finite() {
        "nan".into()
    } else if (1e-6..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// `p/q`, or `p` for an integer; quoted on output.
pub fn fmt_rational(r: &Rational) -> String {
    r.to_string()
}

/// `(sign, ln|value|)`.
pub fn fmt_signed_log(v: &SignedLog) -> (String, String) {
    match v.ln_abs() {
        None => ("0".into(), "-inf".into()),
        Some(l) => (v.sign().to_string(), fmt_float(l)),
    }
}
