//! `results.csv` and `manifest.json` writers.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::experiment::ResultRow;

pub const SCHEMA_VERSION: u32 = 1;

pub const COLUMNS: [&str; 10] = [
    "experiment",
    "n",
    "m",
    "h",
    "policy",
    "T",
    "replications",
    "seed",
    "cost_mean",
    "cost_stderr",
];

/// CSV text: `#` comment lines carrying the schema version and the config,
/// then the header and one record per row.
pub fn render_csv(cfg: &ExperimentConfig, rows: &[ResultRow]) -> Result<String, csv::Error> {
    let mut out = format!("# schema_version = {SCHEMA_VERSION}\n");
    for line in cfg.render().lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record([
            r.experiment.name().to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.h.map_or(String::new(), |h| h.to_string()),
            r.policy.to_string(),
            r.t.to_string(),
            r.replications.to_string(),
            r.seed.to_string(),
            format!("{:.12}", r.cost_mean),
            format!("{:.12}", r.cost_stderr),
        ])?;
    }
    let body = w.into_inner().map_err(|e| e.into_error())?;
    out.push_str(&String::from_utf8(body).expect("CSV fields are ASCII"));
    Ok(out)
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    Sha256::digest(cfg.render().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `results.csv` and `manifest.json` into `dir`, creating it if needed.
pub fn write_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    rows: &[ResultRow],
    wall_secs: f64,
) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let csv = render_csv(cfg, rows).map_err(std::io::Error::other)?;
    fs::write(dir.join("results.csv"), csv)?;
    let manifest = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment.name(),
        "config_hash": config_hash(cfg),
        "code_version": env!("CARGO_PKG_VERSION"),
        "wall_time_secs": wall_secs,
        "rows": rows.len(),
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
    fs::write(dir.join("manifest.json"), text + "\n")
}
