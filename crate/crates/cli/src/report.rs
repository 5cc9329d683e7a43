//! What a subcommand produces: named pass/fail checks, summary values and
//! output files, written together with a JSON summary.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::config::config_hash;

/// File written only when a check fails; removed on a passing rerun.
pub const COUNTEREXAMPLE: &str = "counterexample.txt";

#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    /// The effective configuration, defaults included.
    pub config: Value,
    pub seed: Option<u64>,
    pub checks: Vec<(String, bool)>,
    pub results: Map<String, Value>,
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, String)>,
}

impl Report {
    pub fn new(command: &str, config: Value, seed: Option<u64>) -> Self {
        Report {
            command: command.to_string(),
            config,
            seed,
            checks: Vec::new(),
            results: Map::new(),
            files: Vec::new(),
        }
    }

    pub fn check(&mut self, name: &str, passed: bool) {
        self.checks.push((name.to_string(), passed));
    }

    pub fn result(&mut self, key: &str, value: impl Into<Value>) {
        self.results.insert(key.to_string(), value.into());
    }

    pub fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }

    pub fn config_hash(&self) -> String {
        config_hash(&self.config)
    }

    pub fn summary(&self) -> Value {
        let checks: Map<String, Value> = self.checks.iter().map(|(k, v)| (k.clone(), Value::from(*v))).collect();
        json!({
            "command": self.command,
            "config": self.config,
            "config_hash": self.config_hash(),
            "seed": self.seed,
            "checks": checks,
            "pass": self.passed(),
            "results": self.results,
        })
    }

    pub fn summary_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.summary()).expect("JSON values serialize");
        text.push('\n');
        text
    }

    /// Write every file plus `summary.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, contents) in &self.files {
            std::fs::write(dir.join(name), contents)?;
        }
        std::fs::write(dir.join("summary.json"), self.summary_json())?;
        let stale = dir.join(COUNTEREXAMPLE);
        if !self.files.iter().any(|(n, _)| n == COUNTEREXAMPLE) && stale.exists() {
            std::fs::remove_file(stale)?;
        }
        Ok(())
    }
}

/// CSV text from a header and rows of already formatted cells.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_carries_hash_and_checks() {
        let mut r = Report::new("graph", json!({ "level": 2 }), None);
        r.check("ok", true);
        r.result("vertices", 15);
        let s = r.summary();
        assert_eq!(s["pass"], true);
        assert_eq!(s["results"]["vertices"], 15);
        assert_eq!(s["config_hash"].as_str().unwrap().len(), 64);
        r.check("bad", false);
        assert!(!r.passed());
    }

    #[test]
    fn csv_layout() {
        assert_eq!(csv(&["a", "b"], vec![vec!["1".into(), "2".into()]]), "a,b\n1,2\n");
    }
}
