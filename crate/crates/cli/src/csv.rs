//! Reading back the CSV files the CLI writes.

use std::fs;
use std::path::Path;

use crate::error::{io_err, CliError};

/// Header plus the data rows, split on commas.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path, expected: &[&str]) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io_err("read", path))?;
        Self::parse(&text, expected).map_err(|message| CliError::Csv {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn parse(text: &str, expected: &[&str]) -> Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = match lines.next() {
            Some(h) => h.split(',').map(|s| s.trim().to_string()).collect(),
            None => return Err("empty file".into()),
        };
        if header != expected {
            return Err(format!("expected header {}", expected.join(",")));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(format!(
                    "row {}: {} fields, expected {}",
                    i + 1,
                    row.len(),
                    header.len()
                ));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> usize {
        self.header
            .iter()
            .position(|h| h == name)
            .expect("column checked by header")
    }

    /// Parses one column as numbers; empty cells become NaN.
    pub fn numbers(&self, name: &str) -> Result<Vec<f64>, String> {
        let c = self.column(name);
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let cell = &row[c];
                if cell.is_empty() {
                    return Ok(f64::NAN);
                }
                cell.parse()
                    .map_err(|_| format!("row {}: {name} is not a number: {cell:?}", i + 1))
            })
            .collect()
    }
}

pub fn numeric(path: &Path, expected: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let table = Table::read(path, expected)?;
    let cols = expected
        .iter()
        .map(|name| table.numbers(name))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|message| CliError::Csv {
            path: path.to_path_buf(),
            message,
        })?;
    Ok(cols)
}
