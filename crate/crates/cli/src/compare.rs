//! Cross-ontology comparison of manifests from the same scenario: identical
//! Born-level statistics, different individual processes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::manifest::RunManifest;
use crate::pipeline::CliError;

#[derive(Debug, Serialize)]
pub struct CompareColumn {
    pub manifest: String,
    pub ontologies: Vec<String>,
    pub seed: u64,
    pub values: BTreeMap<String, f64>,
    /// Per-key difference from the first manifest's value.
    pub deltas: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub scenario_name: String,
    pub scenario_sha256: String,
    pub columns: Vec<CompareColumn>,
    pub max_abs_delta: f64,
}

/// Keys pulled from summaries and metric statistics for the table.
const INTERESTING: [&str; 10] = [
    "bohm/record_fraction_high",
    "bohm/record_fraction_low",
    "bohm/equivariance/ks",
    "bohm/node_aborts",
    "grwm/branch_mass_high",
    "grwm/branch_mass_low",
    "grwm/event_count",
    "grwm/delocation_magnitude",
    "grwf/event_count",
    "grwf/flash_fraction_high",
];

fn column_values(m: &RunManifest) -> BTreeMap<String, f64> {
    let mut values = BTreeMap::new();
    for key in INTERESTING {
        if let Some(v) = m.summaries.get(key) {
            values.insert(key.to_string(), *v);
        }
    }
    for metric in &m.metrics {
        if INTERESTING.contains(&metric.name.as_str()) {
            values.insert(metric.name.clone(), metric.statistic);
        }
    }
    values
}

pub fn compare(paths: &[&Path]) -> Result<CompareReport, CliError> {
    if paths.len() < 2 {
        return Err(CliError::Config("compare needs at least two manifests".into()));
    }
    let mut manifests = Vec::new();
    for p in paths {
        let m = RunManifest::load(p).map_err(|e| {
            CliError::Config(format!("cannot load manifest {}: {e}", p.display()))
        })?;
        manifests.push((p.to_path_buf(), m));
    }
    let reference = &manifests[0].1;
    for (p, m) in &manifests[1..] {
        if m.scenario_sha256 != reference.scenario_sha256 {
            return Err(CliError::Config(format!(
                "scenario hash mismatch: {} has {} but {} has {}",
                manifests[0].0.display(),
                reference.scenario_sha256,
                p.display(),
                m.scenario_sha256
            )));
        }
    }

    let base = column_values(reference);
    let mut max_abs_delta: f64 = 0.0;
    let columns = manifests
        .iter()
        .map(|(p, m)| {
            let values = column_values(m);
            let mut deltas = BTreeMap::new();
            for (k, v) in &values {
                if let Some(b) = base.get(k) {
                    let d = v - b;
                    deltas.insert(k.clone(), d);
                    max_abs_delta = max_abs_delta.max(d.abs());
                }
            }
            CompareColumn {
                manifest: p.to_string_lossy().into_owned(),
                ontologies: m.ontologies.clone(),
                seed: m.master_seed,
                values,
                deltas,
            }
        })
        .collect();

    Ok(CompareReport {
        scenario_name: reference.scenario_name.clone(),
        scenario_sha256: reference.scenario_sha256.clone(),
        columns,
        max_abs_delta,
    })
}

pub fn render_text(report: &CompareReport) -> String {
    let mut keys: Vec<&String> = report
        .columns
        .iter()
        .flat_map(|c| c.values.keys())
        .collect();
    keys.sort();
    keys.dedup();

    let mut out = String::new();
    out.push_str(&format!(
        "scenario {} ({})\n",
        report.scenario_name,
        &report.scenario_sha256[..12.min(report.scenario_sha256.len())]
    ));
    out.push_str(&format!("{:<34}", "metric"));
    for c in &report.columns {
        out.push_str(&format!(" | {:>20}", format!("seed {}", c.seed)));
    }
    out.push('\n');
    for key in keys {
        out.push_str(&format!("{key:<34}"));
        for c in &report.columns {
            match c.values.get(key) {
                Some(v) => out.push_str(&format!(" | {v:>20.6}")),
                None => out.push_str(&format!(" | {:>20}", "-")),
            }
        }
        out.push('\n');
    }
    out.push_str(&format!("max |delta| vs first: {}\n", report.max_abs_delta));
    out
}
