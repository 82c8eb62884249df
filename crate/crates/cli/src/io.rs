use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::error::CliError;

/// A numeric table read from a headed CSV file.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    /// Column-major values.
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    /// Resolves a column given by header name or 0-based position.
    pub fn column_index(&self, key: &str) -> Result<usize, CliError> {
        if let Some(i) = self.headers.iter().position(|h| h == key) {
            return Ok(i);
        }
        match key.parse::<usize>() {
            Ok(i) if i < self.headers.len() => Ok(i),
            _ => Err(CliError::input(format!(
                "no column named or numbered '{key}'"
            ))),
        }
    }
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::input(format!(
            "{}: missing header row",
            path.display()
        )));
    }
    let mut columns = vec![Vec::new(); headers.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                CliError::input(format!(
                    "{}: row {}, column '{}': '{field}' is not a number",
                    path.display(),
                    line + 2,
                    headers[col]
                ))
            })?;
            if !value.is_finite() {
                return Err(CliError::input(format!(
                    "{}: row {}: non-finite value",
                    path.display(),
                    line + 2
                )));
            }
            columns[col].push(value);
        }
    }
    if columns[0].is_empty() {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    Ok(Table { headers, columns })
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory and an atomic rename, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, contents: &[u8]) -> Result<(), CliError> {
    match path {
        None => {
            let mut out = io::stdout().lock();
            out.write_all(contents)?;
            out.flush()?;
            Ok(())
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            fs::create_dir_all(dir)?;
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(contents)?;
            tmp.as_file().sync_all()?;
            tmp.persist(path).map_err(|e| CliError::from(e.error))?;
            Ok(())
        }
    }
}
