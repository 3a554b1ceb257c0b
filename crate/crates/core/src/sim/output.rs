//! CSV result tables and the metadata sidecar.

use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::experiments::{ResultRow, SlotLogEntry};
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 17] = [
    "scheme",
    "K",
    "N",
    "L",
    "M",
    "replica",
    "pe_target",
    "power_linear",
    "power_db",
    "sep",
    "ber",
    "iters_mean",
    "messages_mean",
    "adds_mean",
    "muls_mean",
    "slots",
    "stderr_power",
];

/// Extra columns appended for channel-uncertainty rows.
pub const UNCERTAINTY_COLUMNS: [&str; 2] = ["sigma_e", "tau_db"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Writes one CSV row per result. The uncertainty columns are added when
/// any row carries a `σ_e`.
pub fn write_results_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let uncertainty = rows.iter().any(|r| r.sigma_e.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    if uncertainty {
        header.extend(UNCERTAINTY_COLUMNS);
    }
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.scheme.to_string(),
            r.k.to_string(),
            r.n.to_string(),
            r.l.to_string(),
            r.m.to_string(),
            r.replica.to_string(),
            r.pe_target.to_string(),
            r.power_linear.to_string(),
            r.power_db.to_string(),
            opt(r.sep),
            opt(r.ber),
            r.iters_mean.to_string(),
            r.messages_mean.to_string(),
            r.adds_mean.to_string(),
            r.muls_mean.to_string(),
            r.slots.to_string(),
            r.stderr_power.to_string(),
        ];
        if uncertainty {
            rec.push(opt(r.sigma_e));
            rec.push(opt(r.tau_db));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-slot power log for auditing the aggregated means.
pub fn write_slot_log<W: Write>(entries: &[SlotLogEntry], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "K", "L", "pe_target", "sigma_e", "slot", "power", "iterations"])
        .map_err(csv_err)?;
    for e in entries {
        w.write_record([
            e.scheme.to_string(),
            e.k.to_string(),
            e.l.to_string(),
            e.pe_target.to_string(),
            opt(e.sigma_e),
            e.slot.to_string(),
            e.power.to_string(),
            e.iterations.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// SHA-256 of the canonical TOML form of the configuration, hex encoded.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance record written next to every result table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub code_version: String,
    pub rows: usize,
    pub channel_redraws: usize,
    pub nonconverged_solves: usize,
    pub config: ExperimentConfig,
}

impl RunMetadata {
    pub fn new(command: &str, cfg: &ExperimentConfig, rows: &[ResultRow]) -> Self {
        let mut seen = std::collections::BTreeMap::new();
        for r in rows {
            seen.insert((r.k, r.l, r.pe_target.to_bits()), r.redraws);
        }
        RunMetadata {
            command: command.to_string(),
            config_sha256: config_hash(cfg),
            seed: cfg.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            rows: rows.len(),
            channel_redraws: seen.values().sum(),
            nonconverged_solves: rows.iter().map(|r| r.nonconverged).sum(),
            config: cfg.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("metadata is always serializable")
    }
}
