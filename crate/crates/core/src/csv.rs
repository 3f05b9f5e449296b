//! Numeric CSV with `# key=value` metadata lines.
//!
//! Layout: metadata lines, one column-name line, then rows of values in
//! `{:.16e}` form (17 significant digits, exact round trip).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            metadata: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.metadata.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        self.rows.push(row);
    }

    pub fn get_meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Renders the table, checking that every row matches the column line.
    pub fn render(&self) -> Result<String> {
        let mut s = String::new();
        for (k, v) in &self.metadata {
            if k.is_empty() || k.contains(['=', '\n', '\r']) || v.contains(['\n', '\r']) {
                return Err(Error::invalid(format!(
                    "metadata entry `{k}` cannot be encoded"
                )));
            }
            let _ = writeln!(s, "# {k}={v}");
        }
        if self
            .columns
            .iter()
            .any(|c| c.is_empty() || c.contains([',', '\n', '#']))
        {
            return Err(Error::invalid("column names must be non-empty plain words"));
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            if row.len() != self.columns.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.columns.len(),
                    got: row.len(),
                });
            }
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{v:.16e}");
            }
            s.push('\n');
        }
        Ok(s)
    }
}

pub fn write_csv(path: impl AsRef<Path>, table: &CsvTable) -> Result<()> {
    let text = table.render()?;
    if let Some(dir) = path.as_ref().parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut table = CsvTable::default();
    let mut have_columns = false;
    for (i, line) in text.lines().enumerate() {
        if let Some(meta) = line.strip_prefix('#') {
            if have_columns {
                return Err(Error::config(i + 1, "metadata after the column line"));
            }
            let (k, v) = meta
                .trim_start()
                .split_once('=')
                .ok_or_else(|| Error::config(i + 1, "metadata line without `=`"))?;
            table.metadata.push((k.to_string(), v.to_string()));
        } else if !have_columns {
            table.columns = line.split(',').map(|c| c.trim().to_string()).collect();
            have_columns = true;
        } else if !line.trim().is_empty() {
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::config(i + 1, format!("bad number: {e}")))?;
            if row.len() != table.columns.len() {
                return Err(Error::config(
                    i + 1,
                    format!("expected {} values, got {}", table.columns.len(), row.len()),
                ));
            }
            table.rows.push(row);
        }
    }
    if !have_columns {
        return Err(Error::config(0, "missing column line"));
    }
    Ok(table)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<CsvTable> {
    parse_csv(&std::fs::read_to_string(path)?)
}
