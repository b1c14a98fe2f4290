//! Sampled 1-D signals and their CSV on-disk form.
//!
//! The CSV dialect is fixed: comma separators, `.` decimal points, any
//! number of leading `#`-prefixed comment lines (used for provenance
//! headers), then exactly one row of column names, then data rows.

use std::io::{BufRead, Write};

use crate::{Error, Result};

/// A sampled curve: strictly increasing x, one y per x, at least two points.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    x: Vec<f64>,
    y: Vec<f64>,
    pub meta: SignalMeta,
}

/// Axis labels plus free-form provenance lines for the CSV header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignalMeta {
    pub x_label: String,
    pub y_label: String,
    /// Written verbatim as `# <line>` before the column header.
    pub comments: Vec<String>,
}

impl SignalMeta {
    pub fn new(x_label: &str, y_label: &str) -> Self {
        SignalMeta {
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            comments: Vec::new(),
        }
    }
}

impl Signal {
    pub fn new(x: Vec<f64>, y: Vec<f64>, meta: SignalMeta) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid(format!(
                "signal axes differ in length: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::invalid("signal needs at least two points"));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("signal contains non-finite values"));
        }
        if x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("signal x values must be strictly increasing"));
        }
        Ok(Signal { x, y, meta })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Trapezoidal integral of y over x.
    pub fn area(&self) -> f64 {
        self.x
            .windows(2)
            .zip(self.y.windows(2))
            .map(|(xs, ys)| 0.5 * (ys[0] + ys[1]) * (xs[1] - xs[0]))
            .sum()
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        write_table(
            w,
            &self.meta.comments,
            &[&self.meta.x_label, &self.meta.y_label],
            &[&self.x, &self.y],
        )
    }
}

/// Write a multi-column CSV table with `#` comment lines and one header row.
///
/// Floats are formatted with Rust's shortest round-trip representation, so
/// identical inputs always produce identical bytes.
pub fn write_table<W: Write>(
    w: &mut W,
    comments: &[String],
    names: &[&str],
    columns: &[&[f64]],
) -> Result<()> {
    assert_eq!(names.len(), columns.len());
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::invalid("table columns differ in length"));
    }
    for line in comments {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "{}", names.join(","))?;
    for i in 0..rows {
        let row: Vec<String> = columns.iter().map(|c| c[i].to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// A parsed CSV table: comment lines (with the `# ` stripped), column names
/// and column data.
#[derive(Debug, Clone)]
pub struct Table {
    pub comments: Vec<String>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

pub fn read_table<R: BufRead>(r: R) -> Result<Table> {
    let mut comments = Vec::new();
    let mut names: Option<Vec<String>> = None;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            comments.push(rest.strip_prefix(' ').unwrap_or(rest).to_string());
            continue;
        }
        match &names {
            None => {
                let cols: Vec<String> = trimmed.split(',').map(|s| s.trim().to_string()).collect();
                columns = vec![Vec::new(); cols.len()];
                names = Some(cols);
            }
            Some(cols) => {
                let fields: Vec<&str> = trimmed.split(',').collect();
                if fields.len() != cols.len() {
                    return Err(Error::config(format!(
                        "line {lineno}: expected {} fields, found {}",
                        cols.len(),
                        fields.len()
                    )));
                }
                for (c, field) in fields.iter().enumerate() {
                    let v: f64 = field.trim().parse().map_err(|_| {
                        Error::config(format!("line {lineno}: bad number {field:?}"))
                    })?;
                    columns[c].push(v);
                }
            }
        }
    }
    let names = names.ok_or_else(|| Error::config("csv has no header row"))?;
    Ok(Table {
        comments,
        names,
        columns,
    })
}

/// Read a signal CSV: x from the first column, y from the column named
/// `signal` (or the second column when no column has that name), and
/// optional per-point fit weights from a column named `weight` or
/// `weights`. Other columns — e.g. an analytic reference emitted alongside
/// a simulation — are ignored, so simulation output feeds the fitter
/// directly.
pub fn read_signal_csv<R: BufRead>(r: R) -> Result<(Signal, Option<Vec<f64>>)> {
    let table = read_table(r)?;
    if table.columns.len() < 2 {
        return Err(Error::config(format!(
            "expected at least 2 columns (x, y), found {}",
            table.columns.len()
        )));
    }
    let y_idx = table
        .names
        .iter()
        .skip(1)
        .position(|n| n == "signal")
        .map(|i| i + 1)
        .unwrap_or(1);
    let weights = table
        .names
        .iter()
        .skip(1)
        .position(|n| n == "weight" || n == "weights")
        .map(|i| table.columns[i + 1].clone());
    if let Some(w) = &weights {
        if w.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::config("weights must be >= 0"));
        }
    }
    let mut meta = SignalMeta::new(&table.names[0], &table.names[y_idx]);
    meta.comments = table.comments;
    let signal = Signal::new(table.columns[0].clone(), table.columns[y_idx].clone(), meta)?;
    Ok((signal, weights))
}
