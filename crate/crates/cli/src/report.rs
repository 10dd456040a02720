use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

/// Version tag of the `report.json` layout.
pub const SCHEMA: &str = "livsic-report/1";

/// Keys that legitimately differ between identical runs.
pub const VOLATILE_KEYS: [&str; 2] = ["generated_at", "timing"];

/// A CSV side file held in memory until the report is written.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvFile {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvFile {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub command: String,
    pub config: Value,
    pub seed: u64,
    pub stages: BTreeMap<String, Value>,
    pub timing: BTreeMap<String, f64>,
    pub verdict: String,
    pub csv: Vec<CsvFile>,
}

impl RunReport {
    pub fn new(command: &str, config: &impl Serialize, seed: u64) -> Self {
        Self {
            command: command.into(),
            config: serde_json::to_value(config).unwrap_or(Value::Null),
            seed,
            stages: BTreeMap::new(),
            timing: BTreeMap::new(),
            verdict: String::new(),
            csv: Vec::new(),
        }
    }

    pub fn stage(&mut self, name: &str, value: &impl Serialize) {
        self.stages.insert(name.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    /// The full report. Object keys come out sorted and non-finite numbers
    /// as `null`.
    pub fn to_json(&self) -> Value {
        let generated_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        json!({
            "schema": SCHEMA,
            "tool": { "name": "livsic", "version": env!("CARGO_PKG_VERSION") },
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "stages": self.stages,
            "timing": self.timing,
            "generated_at": generated_at,
            "verdict": self.verdict,
            "artifacts": self.csv.iter().map(|c| c.name.clone()).collect::<Vec<_>>(),
        })
    }

    /// Writes `report.json` and the CSV side files into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut text = serde_json::to_string_pretty(&self.to_json())?;
        text.push('\n');
        std::fs::write(dir.join("report.json"), text).context("writing report.json")?;
        for file in &self.csv {
            let path = dir.join(&file.name);
            let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
            w.write_record(&file.header)?;
            for row in &file.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

/// `report` without the keys in [`VOLATILE_KEYS`].
pub fn canonical(report: &Value) -> Value {
    let mut v = report.clone();
    if let Some(map) = v.as_object_mut() {
        for k in VOLATILE_KEYS {
            map.remove(k);
        }
    }
    v
}

/// Formats a number for CSV: shortest round-trip form, empty when not finite.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_values_become_null_and_keys_sort() {
        let mut r = RunReport::new("livsic", &json!({"b": 1, "a": 2}), 3);
        r.stage("z", &json!({"value": f64::NAN}));
        r.stage("a", &1.5);
        let v = r.to_json();
        assert_eq!(v["stages"]["z"]["value"], Value::Null);
        let text = serde_json::to_string(&v).unwrap();
        assert!(text.find("\"a\":2").unwrap() < text.find("\"b\":1").unwrap());
        assert!(canonical(&v).get("timing").is_none());
    }

    #[test]
    fn writes_report_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = RunReport::new("x", &Value::Null, 0);
        let mut c = CsvFile::new("t.csv", &["a", "b"]);
        c.push(vec![num(1.0), num(f64::INFINITY)]);
        r.csv.push(c);
        r.write(dir.path()).unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("t.csv")).unwrap(), "a,b\n1,\n");
        let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(v["schema"], SCHEMA);
        assert_eq!(v["artifacts"][0], "t.csv");
    }
}
