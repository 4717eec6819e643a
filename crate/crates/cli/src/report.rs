use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use ncfolner::report::Check;
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;

#[derive(Serialize)]
pub struct Summary {
    pub rows: usize,
    pub asserted: usize,
    pub failed: usize,
    pub measured_only: usize,
    pub pass: bool,
}

/// Wall-clock data, kept apart so the rest of the report is reproducible.
#[derive(Serialize, Default)]
pub struct Timing {
    pub total_ms: u128,
    pub stages: Vec<(String, u128)>,
}

#[derive(Serialize)]
pub struct ReportEnvelope {
    pub command: String,
    pub config: RunConfig,
    pub summary: Summary,
    pub rows: Vec<Check>,
    pub details: BTreeMap<String, Value>,
    pub timing: Timing,
}

impl ReportEnvelope {
    pub fn new(command: &str, config: RunConfig, rows: Vec<Check>, details: BTreeMap<String, Value>, timing: Timing) -> Self {
        let asserted = rows.iter().filter(|r| r.asserted).count();
        let failed = rows.iter().filter(|r| r.failed()).count();
        let summary = Summary { rows: rows.len(), asserted, failed, measured_only: rows.len() - asserted, pass: failed == 0 };
        ReportEnvelope { command: command.into(), config, summary, rows, details, timing }
    }
}

/// A CSV table.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn from_checks(rows: &[Check]) -> Table {
        let header = ["name", "claim", "hypothesis", "measured", "bound", "holds", "asserted", "detail"];
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: rows
                .iter()
                .map(|r| {
                    vec![
                        r.name.clone(),
                        r.claim.clone(),
                        r.hypothesis.map(|h| h.to_string()).unwrap_or_default(),
                        format!("{:e}", r.measured),
                        format!("{:e}", r.bound),
                        r.holds.to_string(),
                        r.asserted.to_string(),
                        r.detail.clone(),
                    ]
                })
                .collect(),
        }
    }
}

pub struct Outputs {
    pub envelope: ReportEnvelope,
    pub table: Table,
    pub figures: Vec<(String, String)>,
}

pub fn write_outputs(dir: &Path, out: &Outputs) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let json = serde_json::to_string_pretty(&out.envelope)?;
    std::fs::write(dir.join("report.json"), json + "\n")?;
    let mut w = csv::Writer::from_path(dir.join("tables.csv"))?;
    w.write_record(&out.table.header)?;
    for r in &out.table.rows {
        w.write_record(r)?;
    }
    w.flush()?;
    if !out.figures.is_empty() {
        let fig = dir.join("figures");
        std::fs::create_dir_all(&fig)?;
        for (name, svg) in &out.figures {
            std::fs::write(fig.join(name), svg)?;
        }
    }
    Ok(())
}
