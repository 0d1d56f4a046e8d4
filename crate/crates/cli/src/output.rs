//! CSV and JSON rendering. Both embed the resolved configuration.

use anyhow::Result;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, RunConfig};

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub json: Value,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new(), json: Value::Array(Vec::new()) }
    }

    pub fn push<T: Serialize>(&mut self, row: Vec<String>, record: &T) -> Result<()> {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
        if let Value::Array(items) = &mut self.json {
            items.push(serde_json::to_value(record)?);
        }
        Ok(())
    }

    /// A table whose CSV rows are preformatted lines.
    pub fn from_lines(header: &'static str, lines: Vec<String>, json: Value) -> Self {
        Self {
            columns: header.split(',').collect(),
            rows: lines.into_iter().map(|l| vec![l]).collect(),
            json,
        }
    }
}

/// A finished run: the table, plus a description of any detected invariant
/// violation.
pub struct Outcome {
    pub table: Table,
    pub violation: Option<String>,
}

impl From<Table> for Outcome {
    fn from(table: Table) -> Self {
        Self { table, violation: None }
    }
}

pub fn render(config: &RunConfig, table: &Table, format: Format) -> Result<String> {
    match format {
        Format::Csv => {
            let mut out = format!("# config: {}\n", serde_json::to_string(config)?);
            out.push_str(&table.columns.join(","));
            out.push('\n');
            for row in &table.rows {
                out.push_str(&row.join(","));
                out.push('\n');
            }
            Ok(out)
        }
        Format::Json => {
            let doc = json!({ "config": config, "results": table.json });
            Ok(serde_json::to_string_pretty(&doc)? + "\n")
        }
    }
}

/// Shortest round-trip decimal.
pub fn num(v: f64) -> String {
    v.to_string()
}
