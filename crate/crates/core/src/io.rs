//! Deterministic CSV tables and long-format plot series.
//!
//! Floats are written in scientific notation with 17 significant digits so
//! every value round-trips exactly; rows keep insertion order.

use crate::analysis::SweepRow;
use crate::error::{Error, Result};
use crate::model::TransferRecord;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self, out: &mut String) {
        use std::fmt::Write;
        match self {
            Cell::Int(v) => write!(out, "{v}").unwrap(),
            Cell::Float(v) => write!(out, "{}", format_float(*v)).unwrap(),
            Cell::Text(s) => out.push_str(s),
            Cell::Empty => {}
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Table { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch { expected: self.columns.len(), got: row.len() });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| Error::MissingColumn {
            missing: name.to_string(),
            available: self.columns.join(", "),
        })
    }

    /// Reads a table written by [`Table::to_csv`]. Cells are kept as text
    /// so re-emitted values are byte-identical.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .filter(|h| !h.is_empty())
            .ok_or_else(|| Error::InvalidParameter("CSV has no header row".into()))?;
        let mut table = Table::new(&header.split(',').collect::<Vec<_>>());
        for line in lines.filter(|l| !l.is_empty()) {
            let row = line
                .split(',')
                .map(|c| if c.is_empty() { Cell::Empty } else { Cell::Text(c.to_string()) })
                .collect();
            table.push(row)?;
        }
        Ok(table)
    }

    /// Comma separated, header first, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.render(&mut out);
            }
            out.push('\n');
        }
        out
    }
}

pub fn rounds_table(record: &TransferRecord) -> Table {
    let mut t = Table::new(&["round", "time", "p_k", "absolute", "P_k", "remaining"]);
    for r in &record.rounds {
        t.rows.push(vec![
            r.round.into(),
            r.time.into(),
            r.conditional.into(),
            r.absolute.into(),
            r.cumulative.into(),
            r.remaining.into(),
        ]);
    }
    t
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(&["N", "policy", "F", "t", "rounds", "P_final", "status"]);
    for r in rows {
        t.rows.push(vec![
            r.n.into(),
            r.policy.as_str().into(),
            r.f.into(),
            r.t.into(),
            r.rounds.into(),
            r.p_final.into(),
            r.status.as_str().into(),
        ]);
    }
    t
}

/// Long-format `(group, x, y)` series. Without a group column every row is
/// labelled with the name of `y`.
pub fn emit_plot_series(table: &Table, x: &str, y: &str, group: Option<&str>) -> Result<String> {
    let xi = table.column(x)?;
    let yi = table.column(y)?;
    let gi = group.map(|g| table.column(g)).transpose()?;
    let mut out = Table::new(&["group", x, y]);
    for row in table.rows() {
        let label = match gi {
            Some(i) => row[i].clone(),
            None => Cell::Text(y.to_string()),
        };
        out.rows.push(vec![label, row[xi].clone(), row[yi].clone()]);
    }
    Ok(out.to_csv())
}
