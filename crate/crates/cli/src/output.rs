use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::cli::Format;
use crate::error::CliError;

/// One result table. Cells are JSON values so CSV and JSON share a payload;
/// `null` cells render as empty CSV fields.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub command: &'static str,
    pub units: &'static str,
    pub config_hash: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    pub diagnostics: Map<String, Value>,
}

impl Table {
    pub fn new(command: &'static str, units: &'static str, columns: &[&'static str]) -> Self {
        Self {
            command,
            units,
            config_hash: String::new(),
            columns: columns.to_vec(),
            rows: Vec::new(),
            diagnostics: Map::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn diag(&mut self, key: &str, value: impl Into<Value>) {
        self.diagnostics.insert(key.to_string(), value.into());
    }

    fn csv(&self) -> Result<Vec<u8>, CliError> {
        let mut buf = format!(
            "# ellipsoidal {}; units: {}; config_hash: {}\n",
            self.command, self.units, self.config_hash
        )
        .into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.columns).map_err(CliError::io)?;
            for row in &self.rows {
                w.write_record(row.iter().map(cell)).map_err(CliError::io)?;
            }
            w.flush().map_err(CliError::io)?;
        }
        Ok(buf)
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Csv => self.csv(),
            Format::Json => {
                let mut v = serde_json::to_vec_pretty(self).map_err(CliError::io)?;
                v.push(b'\n');
                Ok(v)
            }
        }
    }

    pub fn write(&self, format: Format, out: Option<&Path>) -> Result<(), CliError> {
        let bytes = self.render(format)?;
        match out {
            Some(path) => fs::write(path, bytes).map_err(CliError::io),
            None => io::stdout().write_all(&bytes).map_err(CliError::io),
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// `null` for non-finite floats, so both formats stay parseable.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}
