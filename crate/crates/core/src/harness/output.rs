//! CSV tables. Reals are written in Rust's shortest round-trip form, so a
//! re-parse with `str::parse::<f64>` reproduces every value bitwise.

use std::fs;
use std::path::Path;

use super::HarnessError;

/// A named table with a fixed column set.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Columns holding measured times or ratios of them; the only columns that
/// differ between two runs of the same configuration.
pub const TIMING_COLUMNS: &[&str] = &["wall_seconds", "speedup", "time_overhead"];

impl CsvTable {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Values of a numeric column; unparsable or empty cells become NaN.
    pub fn reals(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.column(name)?;
        Some(self.rows.iter().map(|r| r[c].parse().unwrap_or(f64::NAN)).collect())
    }

    /// Copy without the [`TIMING_COLUMNS`].
    pub fn without_timing(&self) -> CsvTable {
        let keep: Vec<usize> = (0..self.header.len()).filter(|&i| !TIMING_COLUMNS.contains(&self.header[i].as_str())).collect();
        CsvTable {
            name: self.name.clone(),
            header: keep.iter().map(|&i| self.header[i].clone()).collect(),
            rows: self.rows.iter().map(|r| keep.iter().map(|&i| r[i].clone()).collect()).collect(),
        }
    }
}

/// Shortest round-trip form; scientific notation outside `[1e-4, 1e15)`.
pub fn real(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

pub fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

/// Writes `table` to `path`: header row, then one record per line.
pub fn emit_csv(table: &CsvTable, path: &Path) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

/// Reads a table written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<CsvTable, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect())).collect::<Result<_, _>>()?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(CsvTable { name, header, rows })
}
