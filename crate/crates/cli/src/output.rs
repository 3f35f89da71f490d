//! CSV and JSON sidecar writing.

use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::experiments::Table;
use crate::seed::trial_seed;

/// CSV text of `table`, header first.
pub fn to_csv(table: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| crate::error::CliError::Io(e.to_string()))
}

/// Provenance record written next to the CSV.
pub fn sidecar(table: &Table, cfg: &ExperimentConfig) -> serde_json::Value {
    let first: Vec<u64> = (0..cfg.trials.min(3)).map(|i| trial_seed(cfg.master_seed, i)).collect();
    json!({
        "experiment": cfg.experiment.name(),
        "config": cfg,
        "library_version": otfs_core::VERSION,
        "cli_version": env!("CARGO_PKG_VERSION"),
        "seeds": {
            "master_seed": cfg.master_seed,
            "trial_seed": "splitmix64(splitmix64(master) + 0x9e3779b97f4a7c15 * (index + 1))",
            "first_trial_seeds": first,
        },
        "columns": table.header,
        "rows": table.rows.len(),
        "summary": table.summary,
    })
}

/// Writes `<dir>/<experiment>.csv` and `<dir>/<experiment>.json`; returns both paths.
pub fn write(table: &Table, cfg: &ExperimentConfig, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", cfg.experiment.name()));
    let json_path = dir.join(format!("{}.json", cfg.experiment.name()));
    std::fs::write(&csv_path, to_csv(table)?)?;
    std::fs::write(&json_path, serde_json::to_string_pretty(&sidecar(table, cfg))? + "\n")?;
    Ok((csv_path, json_path))
}
