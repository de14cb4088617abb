use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const REPORT_SCHEMA: &str = "report-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Everything needed to reproduce a run: configuration, seed, weight
/// checksum, per-file rows and their aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema: String,
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub weights_sha256: Option<String>,
    pub config: Value,
    pub rows: Vec<BTreeMap<String, Value>>,
    pub aggregate: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            schema: REPORT_SCHEMA.into(),
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed: None,
            weights_sha256: None,
            config: Value::Null,
            rows: Vec::new(),
            aggregate: BTreeMap::new(),
        }
    }

    pub fn render(&self, format: Format) -> anyhow::Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
            Format::Csv => self.to_csv(),
        }
    }

    pub fn write_json(&self, path: &Path) -> anyhow::Result<()> {
        std::fs::write(path, self.render(Format::Json)?)
            .with_context(|| format!("writing {}", path.display()))
    }

    /// One line per row, then a `mean` line with the aggregates.
    fn to_csv(&self) -> anyhow::Result<String> {
        let mut columns: Vec<&String> = Vec::new();
        for row in &self.rows {
            for key in row.keys() {
                if !columns.contains(&key) {
                    columns.push(key);
                }
            }
        }
        if let Some(i) = columns.iter().position(|c| c.as_str() == "file") {
            let file = columns.remove(i);
            columns.insert(0, file);
        }
        let cell = |v: Option<&Value>| match v {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Null) | None => String::new(),
            Some(other) => other.to_string(),
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&columns)?;
        for row in &self.rows {
            w.write_record(columns.iter().map(|c| cell(row.get(*c))))?;
        }
        w.write_record(columns.iter().map(|c| {
            if c.as_str() == "file" {
                "mean".to_string()
            } else {
                self.aggregate
                    .get(*c)
                    .map(|v| v.to_string())
                    .unwrap_or_default()
            }
        }))?;
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}
