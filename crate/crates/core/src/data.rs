//! Tabular datasets: typed columns (numeric or factor) parsed from CSV.
//!
//! Typing rule: quoted cells are factor values, unquoted cells must be
//! finite numbers; a column must be entirely one or the other. Empty cells
//! are missing values and are rejected (no NA handling).

use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone)]
pub enum Column {
    Numeric(Vec<f64>),
    Factor(Vec<String>),
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub names: Vec<String>,
    pub columns: Vec<Column>,
    pub n: usize,
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Column>) -> Result<Self> {
        let n = match columns.first() {
            Some(Column::Numeric(v)) => v.len(),
            Some(Column::Factor(v)) => v.len(),
            None => 0,
        };
        if names.len() != columns.len() {
            return Err(Error::InvalidInput("column name/count mismatch".into()));
        }
        for (name, c) in names.iter().zip(&columns) {
            let len = match c {
                Column::Numeric(v) => v.len(),
                Column::Factor(v) => v.len(),
            };
            if len != n {
                return Err(Error::InvalidInput(format!("ragged column {name}")));
            }
        }
        Ok(Dataset { names, columns, n })
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty CSV file".into()))?;
        let names: Vec<String> = split_line(header)
            .map_err(|e| Error::InvalidInput(format!("CSV header: {e}")))?
            .into_iter()
            .map(|(s, _)| s)
            .collect();
        let ncol = names.len();

        let mut cells: Vec<Vec<(String, bool)>> = Vec::new();
        for (r, line) in lines.enumerate() {
            let row = split_line(line)
                .map_err(|e| Error::InvalidInput(format!("CSV row {}: {e}", r + 1)))?;
            if row.len() != ncol {
                return Err(Error::InvalidInput(format!(
                    "CSV row {}: {} cells, expected {ncol}",
                    r + 1,
                    row.len()
                )));
            }
            cells.push(row);
        }
        if cells.is_empty() {
            return Err(Error::InvalidInput("CSV has a header but no data rows".into()));
        }

        let mut columns = Vec::with_capacity(ncol);
        for j in 0..ncol {
            let quoted = cells.iter().filter(|row| row[j].1).count();
            for (r, row) in cells.iter().enumerate() {
                if row[j].0.is_empty() {
                    return Err(Error::InvalidInput(format!(
                        "missing value at row {}, column {}",
                        r + 1,
                        names[j]
                    )));
                }
            }
            if quoted == cells.len() {
                columns.push(Column::Factor(
                    cells.iter().map(|row| row[j].0.clone()).collect(),
                ));
            } else if quoted == 0 {
                let mut vals = Vec::with_capacity(cells.len());
                for (r, row) in cells.iter().enumerate() {
                    let v: f64 = row[j].0.parse().map_err(|_| {
                        Error::InvalidInput(format!(
                            "non-numeric value '{}' at row {}, column {} (quote strings to make a factor)",
                            row[j].0,
                            r + 1,
                            names[j]
                        ))
                    })?;
                    if !v.is_finite() {
                        return Err(Error::InvalidInput(format!(
                            "non-finite value at row {}, column {}",
                            r + 1,
                            names[j]
                        )));
                    }
                    vals.push(v);
                }
                columns.push(Column::Numeric(vals));
            } else {
                return Err(Error::InvalidInput(format!(
                    "column {} mixes quoted and unquoted cells",
                    names[j]
                )));
            }
        }
        Dataset::new(names, columns)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::InvalidInput(format!("no column named '{name}'")))
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        match self.column(name)? {
            Column::Numeric(v) => Ok(v),
            Column::Factor(_) => Err(Error::InvalidInput(format!(
                "column '{name}' is a factor; a numeric column is required here"
            ))),
        }
    }

    pub fn factor(&self, name: &str) -> Result<&[String]> {
        match self.column(name)? {
            Column::Factor(v) => Ok(v),
            Column::Numeric(_) => Err(Error::InvalidInput(format!(
                "column '{name}' is numeric; a factor column (quoted values) is required here"
            ))),
        }
    }

    /// Write as CSV; factor cells are quoted, numerics use shortest
    /// round-trip formatting.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{}", self.names.join(","))?;
        for i in 0..self.n {
            for (j, c) in self.columns.iter().enumerate() {
                if j > 0 {
                    write!(w, ",")?;
                }
                match c {
                    Column::Numeric(v) => write!(w, "{}", v[i])?,
                    Column::Factor(v) => write!(w, "\"{}\"", v[i].replace('"', "\"\""))?,
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Split one CSV line into (cell, was_quoted) pairs. Double quotes escape as
/// "" inside quoted cells.
fn split_line(line: &str) -> std::result::Result<Vec<(String, bool)>, String> {
    let b: Vec<char> = line.chars().collect();
    let mut i = 0;
    let mut cells = Vec::new();
    loop {
        while i < b.len() && (b[i] == ' ' || b[i] == '\t') {
            i += 1;
        }
        if i < b.len() && b[i] == '"' {
            i += 1;
            let mut s = String::new();
            loop {
                if i >= b.len() {
                    return Err("unterminated quote".into());
                }
                if b[i] == '"' {
                    if i + 1 < b.len() && b[i + 1] == '"' {
                        s.push('"');
                        i += 2;
                    } else {
                        i += 1;
                        break;
                    }
                } else {
                    s.push(b[i]);
                    i += 1;
                }
            }
            while i < b.len() && (b[i] == ' ' || b[i] == '\t') {
                i += 1;
            }
            cells.push((s, true));
        } else {
            let start = i;
            while i < b.len() && b[i] != ',' {
                i += 1;
            }
            let s: String = b[start..i].iter().collect();
            cells.push((s.trim().to_string(), false));
        }
        if i >= b.len() {
            break;
        }
        if b[i] != ',' {
            return Err("unexpected character after quoted cell".into());
        }
        i += 1;
        if i >= b.len() {
            cells.push((String::new(), false));
            break;
        }
    }
    Ok(cells)
}
