//! Minimal CSV writer: comma-separated, `.` decimals, LF endings.
//!
//! The first line of every file is a schema tag such as `#tkyweld-sweep/1`,
//! followed by the header row.

use std::fmt::Display;
use std::path::Path;

use crate::error::{file_err, CliError};

#[derive(Debug, Clone)]
pub struct Table {
    schema: &'static str,
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(schema: &'static str, header: &'static [&'static str]) -> Self {
        Self { schema, header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = format!("#{}\n{}\n", self.schema, self.header.join(","));
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.render()).map_err(file_err(path))
    }
}

/// A cell; `f64` uses the shortest representation that round-trips.
pub fn cell(v: impl Display) -> String {
    v.to_string()
}

/// Empty for `None`.
pub fn opt_cell<T: Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Rows of `path` after the schema and header lines, split on commas.
/// For reading back files this crate wrote; quoting is not supported.
pub fn read_rows(text: &str) -> Option<(String, Vec<String>, Vec<Vec<String>>)> {
    let mut lines = text.lines();
    let schema = lines.next()?.strip_prefix('#')?.to_string();
    let header = lines.next()?.split(',').map(str::to_string).collect();
    Some((schema, header, lines.map(|l| l.split(',').map(str::to_string).collect()).collect()))
}
