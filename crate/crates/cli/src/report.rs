//! Plain-text reports.
//!
//! A report is a provenance block (comment header plus the full effective
//! config) followed by `[result]` and one `key = value` record per line.
//! Records come in a fixed order and never include timings, so two runs of
//! one config produce identical bytes.

use std::fmt;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub provenance: String,
    pub records: Vec<(String, String)>,
    pub summary: String,
}

impl Report {
    pub fn new(config: &ExperimentConfig) -> Self {
        Report {
            provenance: config.to_text(),
            records: Vec::new(),
            summary: String::new(),
        }
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl fmt::Display) {
        self.records.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.records.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// The `[result]` section alone.
    pub fn results_text(&self) -> String {
        self.records.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# corrlab {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(f, "[provenance]")?;
        f.write_str(&self.provenance)?;
        writeln!(f, "[result]")?;
        f.write_str(&self.results_text())
    }
}

/// Fixed-width decimal for floating statistics.
pub fn float(x: f64) -> String {
    format!("{x:.9}")
}
