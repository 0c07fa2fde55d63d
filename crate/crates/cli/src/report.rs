use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use paytv_core::Config;
use serde::Serialize;
use serde_json::Value;

/// Output of one subcommand: human-readable lines plus a structured record.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub config: Config,
    pub met: bool,
    pub lines: Vec<String>,
    pub data: Value,
}

impl Report {
    pub fn new(command: &str, seed: u64, config: &Config) -> Self {
        Report {
            command: command.to_string(),
            seed,
            config: config.clone(),
            met: true,
            lines: Vec::new(),
            data: Value::Null,
        }
    }

    pub fn line(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }

    /// Records one expectation; the report fails if any does.
    pub fn expect(&mut self, ok: bool, what: impl AsRef<str>) {
        self.met &= ok;
        self.lines
            .push(format!("{} {}", if ok { "PASS" } else { "FAIL" }, what.as_ref()));
    }

    pub fn set_data<T: Serialize>(&mut self, data: &T) -> Result<()> {
        self.data = serde_json::to_value(data)?;
        Ok(())
    }

    pub fn text(&self) -> String {
        let mut out = format!("# paytv {} seed={}\n", self.command, self.seed);
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out.push_str(if self.met {
            "result: all expectations met\n"
        } else {
            "result: expectations NOT met\n"
        });
        out
    }

    /// Writes `<stem>.txt` and `<stem>.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let stem = self.command.split_whitespace().next().unwrap_or("report");
        let txt = dir.join(format!("{stem}-report.txt"));
        let json = dir.join(format!("{stem}-report.json"));
        fs::write(&txt, self.text()).with_context(|| format!("writing {}", txt.display()))?;
        fs::write(&json, serde_json::to_string_pretty(self)?)
            .with_context(|| format!("writing {}", json.display()))?;
        Ok((txt, json))
    }
}
